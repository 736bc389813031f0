//! Structural variation operators on expression trees, and the [`Genome`]
//! abstraction that lets the engine evolve single trees or whole forests.

use rand::Rng;

use super::config::Strategy;
use crate::expr::{random_constant, random_leaf, random_tree, ExprNode, ExprTree, Operator, TreeGenConfig};

const PLACEMENT_TRIES: usize = 10;

/// Settings shared by all variation operators.
#[derive(Debug, Clone)]
pub struct VariationConfig {
    pub gen: TreeGenConfig,
    pub max_depth: usize,
}

/// `a` with a uniformly chosen subtree replaced by a uniformly chosen subtree
/// of `b`. Insertion points that would break the depth cap are re-drawn; after
/// ten failures the result is a copy of `a`.
pub fn crossover<R: Rng + ?Sized>(a: &ExprTree, b: &ExprTree, max_depth: usize, rng: &mut R) -> ExprTree {
    let (na, nb) = (a.node_count(), b.node_count());
    for _ in 0..PLACEMENT_TRIES {
        let ia = rng.random_range(0..na);
        let ib = rng.random_range(0..nb);
        let donor = b.root.get(ib).expect("index in range").clone();
        let root = a.root.replace(ia, donor);
        if root.depth() <= max_depth {
            return ExprTree { root, ..a.clone() };
        }
    }
    a.clone()
}

/// Replaces a random node with a fresh random tree that fits under the depth cap.
pub fn subtree_mutation<R: Rng + ?Sized>(t: &ExprTree, cfg: &VariationConfig, rng: &mut R) -> ExprTree {
    let idx = rng.random_range(0..t.node_count());
    let at = t.root.depth_of(idx).expect("index in range");
    let budget = cfg.max_depth.saturating_sub(at) + 1;
    let gen = TreeGenConfig {
        max_depth: cfg.gen.max_depth.min(budget).max(1),
        min_depth: cfg.gen.min_depth.min(budget).max(1),
        ..cfg.gen.clone()
    };
    let fresh = random_tree(&gen, rng).root;
    ExprTree {
        root: t.root.replace(idx, fresh),
        ..t.clone()
    }
}

/// Replaces a random subtree with one of its own descendants. Never deepens.
pub fn hoist_mutation<R: Rng + ?Sized>(t: &ExprTree, rng: &mut R) -> ExprTree {
    let idx = rng.random_range(0..t.node_count());
    let sub = t.root.get(idx).expect("index in range");
    let inner = rng.random_range(0..sub.node_count());
    let hoisted = sub.get(inner).expect("index in range").clone();
    ExprTree {
        root: t.root.replace(idx, hoisted),
        ..t.clone()
    }
}

/// Point mutation at a random node.
pub fn point_mutation<R: Rng + ?Sized>(t: &ExprTree, cfg: &VariationConfig, rng: &mut R) -> ExprTree {
    let idx = rng.random_range(0..t.node_count());
    point_mutation_at(t, idx, cfg, rng)
}

/// Replaces node `idx` in place: an operator becomes a different operator of
/// the same arity (children kept), a leaf becomes a different leaf.
pub fn point_mutation_at<R: Rng + ?Sized>(
    t: &ExprTree,
    idx: usize,
    cfg: &VariationConfig,
    rng: &mut R,
) -> ExprTree {
    let node = t.root.get(idx).expect("index in range");
    let replacement = match node {
        ExprNode::Op(op, children) => {
            let choices: Vec<Operator> = op.same_arity().iter().copied().filter(|o| o != op).collect();
            ExprNode::Op(choices[rng.random_range(0..choices.len())], children.clone())
        }
        leaf => {
            let mut next = random_leaf(&cfg.gen, rng);
            for _ in 0..PLACEMENT_TRIES {
                if &next != leaf {
                    break;
                }
                next = random_leaf(&cfg.gen, rng);
            }
            if &next == leaf {
                next = random_constant(&cfg.gen, rng);
            }
            next
        }
    };
    ExprTree {
        root: t.root.replace(idx, replacement),
        ..t.clone()
    }
}

pub fn reproduction(t: &ExprTree) -> ExprTree {
    t.clone()
}

/// Something the engine can evolve.
pub trait Genome: Clone + Send + Sync {
    fn node_count(&self) -> usize;
    fn constants(&self) -> Vec<f64>;
    fn with_constants(&self, values: &[f64]) -> Self;
    /// Applies one structural strategy. `donor` is only read by crossover.
    fn vary<R: Rng + ?Sized>(
        &self,
        strategy: Strategy,
        donor: &Self,
        cfg: &VariationConfig,
        rng: &mut R,
    ) -> Self;
}

impl Genome for ExprTree {
    fn node_count(&self) -> usize {
        ExprTree::node_count(self)
    }

    fn constants(&self) -> Vec<f64> {
        ExprTree::constants(self)
    }

    fn with_constants(&self, values: &[f64]) -> Self {
        ExprTree::with_constants(self, values)
    }

    fn vary<R: Rng + ?Sized>(&self, strategy: Strategy, donor: &Self, cfg: &VariationConfig, rng: &mut R) -> Self {
        match strategy {
            Strategy::Crossover => crossover(self, donor, cfg.max_depth, rng),
            Strategy::Subtree => subtree_mutation(self, cfg, rng),
            Strategy::Hoist => hoist_mutation(self, rng),
            Strategy::Point => point_mutation(self, cfg, rng),
            Strategy::Reproduction | Strategy::Sgd => reproduction(self),
        }
    }
}

/// A whole forest evolved as one individual; every tree is varied at once.
#[derive(Debug, Clone, PartialEq)]
pub struct ForestGenome(pub Vec<ExprTree>);

impl Genome for ForestGenome {
    fn node_count(&self) -> usize {
        self.0.iter().map(ExprTree::node_count).sum()
    }

    fn constants(&self) -> Vec<f64> {
        self.0.iter().flat_map(ExprTree::constants).collect()
    }

    fn with_constants(&self, values: &[f64]) -> Self {
        let mut offset = 0;
        ForestGenome(
            self.0
                .iter()
                .map(|t| {
                    let n = t.num_constants();
                    let out = t.with_constants(&values[offset..offset + n]);
                    offset += n;
                    out
                })
                .collect(),
        )
    }

    fn vary<R: Rng + ?Sized>(&self, strategy: Strategy, donor: &Self, cfg: &VariationConfig, rng: &mut R) -> Self {
        ForestGenome(
            self.0
                .iter()
                .zip(&donor.0)
                .map(|(t, d)| t.vary(strategy, d, cfg, rng))
                .collect(),
        )
    }
}
