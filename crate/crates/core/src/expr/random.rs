use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ops::Operator;
use super::tree::{ExprNode, ExprTree};

/// Parameters for random tree construction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeGenConfig {
    pub num_features: usize,
    /// Smallest depth in the ramp; clipped to `max_depth`.
    pub min_depth: usize,
    pub max_depth: usize,
    /// Chance of stopping at a leaf at any position where an operator is allowed ("grow").
    pub leaf_prob: f64,
    /// Chance that a leaf is a constant rather than a variable.
    pub const_prob: f64,
    pub const_range: (f64, f64),
    /// Variables a leaf may use; empty means all of `0..num_features`.
    pub active_features: Vec<usize>,
}

impl Default for TreeGenConfig {
    fn default() -> Self {
        TreeGenConfig {
            num_features: 1,
            min_depth: 2,
            max_depth: 6,
            leaf_prob: 0.3,
            const_prob: 0.3,
            const_range: (-5.0, 5.0),
            active_features: Vec::new(),
        }
    }
}

impl TreeGenConfig {
    pub fn with_features(num_features: usize) -> Self {
        TreeGenConfig {
            num_features,
            ..Default::default()
        }
    }
}

/// Ramped half-and-half: a depth is drawn uniformly from the ramp, then the
/// tree is built with either the "full" or "grow" method with equal odds.
/// Above depth one the root is always an operator.
pub fn random_tree<R: Rng + ?Sized>(cfg: &TreeGenConfig, rng: &mut R) -> ExprTree {
    let max = cfg.max_depth.max(1);
    let min = cfg.min_depth.clamp(1, max);
    let depth = rng.random_range(min..=max);
    let full = rng.random_bool(0.5);
    let root = if depth > 1 {
        let op = Operator::ALL[rng.random_range(0..Operator::ALL.len())];
        ExprNode::Op(op, (0..op.arity()).map(|_| build(cfg, depth - 1, full, rng)).collect())
    } else {
        random_leaf(cfg, rng)
    };
    ExprTree {
        root,
        num_features: cfg.num_features,
        label: String::new(),
    }
}

/// A subtree of depth at most `depth` built with the grow method.
pub fn random_subtree<R: Rng + ?Sized>(cfg: &TreeGenConfig, depth: usize, rng: &mut R) -> ExprNode {
    let depth = depth.max(1);
    let d = rng.random_range(1..=depth);
    build(cfg, d, false, rng)
}

fn build<R: Rng + ?Sized>(cfg: &TreeGenConfig, depth: usize, full: bool, rng: &mut R) -> ExprNode {
    if depth <= 1 || (!full && rng.random_bool(cfg.leaf_prob)) {
        return random_leaf(cfg, rng);
    }
    let op = Operator::ALL[rng.random_range(0..Operator::ALL.len())];
    let children = (0..op.arity())
        .map(|_| build(cfg, depth - 1, full, rng))
        .collect();
    ExprNode::Op(op, children)
}

pub fn random_leaf<R: Rng + ?Sized>(cfg: &TreeGenConfig, rng: &mut R) -> ExprNode {
    if cfg.num_features == 0 || rng.random_bool(cfg.const_prob) {
        random_constant(cfg, rng)
    } else if cfg.active_features.is_empty() {
        ExprNode::Var(rng.random_range(0..cfg.num_features))
    } else {
        ExprNode::Var(cfg.active_features[rng.random_range(0..cfg.active_features.len())])
    }
}

pub fn random_constant<R: Rng + ?Sized>(cfg: &TreeGenConfig, rng: &mut R) -> ExprNode {
    let (lo, hi) = cfg.const_range;
    ExprNode::constant(if hi > lo { rng.random_range(lo..hi) } else { lo })
}
