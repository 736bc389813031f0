use std::fmt::Write as _;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::sexpr::{parse_with_features, render};
use super::tree::{ExprNode, ExprTree};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ActionMode {
    Continuous,
    Discrete,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Action {
    Continuous(Vec<f64>),
    Discrete(usize),
}

impl Action {
    /// Flat numeric form for logging.
    pub fn to_vec(&self) -> Vec<f64> {
        match self {
            Action::Continuous(v) => v.clone(),
            Action::Discrete(i) => vec![*i as f64],
        }
    }
}

/// One expression tree per action dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct Forest {
    pub trees: Vec<ExprTree>,
    pub action_mode: ActionMode,
}

impl Forest {
    pub fn new(trees: Vec<ExprTree>, action_mode: ActionMode) -> Result<Self> {
        if trees.is_empty() {
            return Err(Error::InvalidInput("forest needs at least one tree".into()));
        }
        let nf = trees[0].num_features;
        if let Some(t) = trees.iter().find(|t| t.num_features != nf) {
            return Err(Error::DimensionMismatch {
                expected: nf,
                got: t.num_features,
            });
        }
        Ok(Forest { trees, action_mode })
    }

    pub fn num_actions(&self) -> usize {
        self.trees.len()
    }

    pub fn num_features(&self) -> usize {
        self.trees[0].num_features
    }

    pub fn eval(&self, features: &[f64]) -> Result<Vec<f64>> {
        self.trees.iter().map(|t| t.eval(features)).collect()
    }

    pub fn node_count(&self) -> usize {
        self.trees.iter().map(ExprTree::node_count).sum()
    }

    pub fn to_file(&self, env: &str) -> ForestFile {
        ForestFile {
            env: env.to_string(),
            action_mode: self.action_mode,
            num_features: self.num_features(),
            trees: self.trees.iter().map(render).collect(),
        }
    }

    pub fn save_json(&self, env: &str, path: &Path) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.to_file(env))?;
        std::fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
    }

    pub fn load_json(path: &Path) -> Result<(String, Forest)> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let file: ForestFile = serde_json::from_str(&text)?;
        let env = file.env.clone();
        Ok((env, file.into_forest()?))
    }
}

/// On-disk forest: trees stored as prefix s-expressions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ForestFile {
    pub env: String,
    pub action_mode: ActionMode,
    pub num_features: usize,
    pub trees: Vec<String>,
}

impl ForestFile {
    pub fn into_forest(self) -> Result<Forest> {
        let trees = self
            .trees
            .iter()
            .map(|s| parse_with_features(s, self.num_features))
            .collect::<Result<Vec<_>>>()?;
        Forest::new(trees, self.action_mode)
    }
}

pub fn softmax(values: &[f64]) -> Vec<f64> {
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let e: Vec<f64> = values.iter().map(|v| (v - m).exp()).collect();
    let s: f64 = e.iter().sum();
    e.into_iter().map(|v| v / s).collect()
}

pub fn log_softmax(values: &[f64]) -> Vec<f64> {
    let m = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + values.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    values.iter().map(|v| v - lse).collect()
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = i;
        }
    }
    best
}

/// Samples an index from `probs` with one uniform draw.
pub fn sample_categorical<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.len() - 1
}

/// Turns tree outputs into an action. Continuous outputs pass through; discrete
/// outputs are treated as logits and sampled (or arg-maxed when `deterministic`).
pub fn select_action<R: Rng + ?Sized>(
    values: &[f64],
    mode: ActionMode,
    deterministic: bool,
    rng: &mut R,
) -> Result<Action> {
    if values.is_empty() {
        return Err(Error::InvalidInput("empty value vector".into()));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput("non-finite action value".into()));
    }
    Ok(match mode {
        ActionMode::Continuous => Action::Continuous(values.to_vec()),
        ActionMode::Discrete if deterministic => Action::Discrete(argmax(values)),
        ActionMode::Discrete => Action::Discrete(sample_categorical(&softmax(values), rng)),
    })
}

/// Graphviz rendering of one tree.
pub fn to_dot(tree: &ExprTree, name: &str) -> String {
    fn go(node: &ExprNode, next: &mut usize, out: &mut String) -> usize {
        let id = *next;
        *next += 1;
        let (label, shape) = match node {
            ExprNode::Const { value, .. } => (format!("{value}"), "box"),
            ExprNode::Var(i) => (format!("x{i}"), "box"),
            ExprNode::Op(op, _) => (op.name().to_string(), "ellipse"),
        };
        writeln!(out, "  n{id} [label=\"{label}\", shape={shape}];").unwrap();
        for child in node.children() {
            let cid = go(child, next, out);
            writeln!(out, "  n{id} -> n{cid};").unwrap();
        }
        id
    }
    let mut out = format!("digraph {name} {{\n");
    go(&tree.root, &mut 0, &mut out);
    out.push_str("}\n");
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_with_features;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn forest(trees: &[&str], nf: usize) -> Forest {
        Forest::new(
            trees
                .iter()
                .map(|s| parse_with_features(s, nf).unwrap())
                .collect(),
            ActionMode::Continuous,
        )
        .unwrap()
    }

    #[test]
    fn eval_forest_examples() {
        assert_eq!(
            forest(&["(const 0)"; 3], 1).eval(&[7.0]).unwrap(),
            vec![0.0; 3]
        );
        assert_eq!(
            forest(&["(var 0)", "(const 5)"], 1).eval(&[2.0]).unwrap(),
            vec![2.0, 5.0]
        );
        let cartpole = forest(
            &["(add (var 2) (add (mul (const 2) (var 3)) (mul (const 3) (var 4))))"],
            5,
        );
        assert_eq!(cartpole.eval(&[0.0, 0.0, 1.0, 1.0, 1.0]).unwrap(), vec![6.0]);
    }

    #[test]
    fn mismatched_feature_counts_are_rejected() {
        let a = parse_with_features("(var 0)", 1).unwrap();
        let b = parse_with_features("(var 0)", 2).unwrap();
        assert!(Forest::new(vec![a, b], ActionMode::Discrete).is_err());
        assert!(Forest::new(vec![], ActionMode::Discrete).is_err());
    }

    #[test]
    fn select_action_modes() {
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert_eq!(
            select_action(&[0.3, -1.2], ActionMode::Continuous, false, &mut rng).unwrap(),
            Action::Continuous(vec![0.3, -1.2])
        );
        assert_eq!(
            select_action(&[1000.0, 0.0, 0.0], ActionMode::Discrete, true, &mut rng).unwrap(),
            Action::Discrete(0)
        );
        assert_eq!(
            select_action(&[2.0, 2.0, 1.0], ActionMode::Discrete, true, &mut rng).unwrap(),
            Action::Discrete(0)
        );
        assert!(select_action(&[], ActionMode::Discrete, true, &mut rng).is_err());
    }

    #[test]
    fn uniform_logits_sample_uniformly() {
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let mut counts = [0usize; 3];
        let n = 100_000;
        for _ in 0..n {
            match select_action(&[0.0, 0.0, 0.0], ActionMode::Discrete, false, &mut rng).unwrap() {
                Action::Discrete(i) => counts[i] += 1,
                _ => unreachable!(),
            }
        }
        for c in counts {
            assert!((c as f64 / n as f64 - 1.0 / 3.0).abs() < 0.01, "{counts:?}");
        }
    }

    #[test]
    fn softmax_shift_invariance() {
        let v = [0.5, -2.0, 3.0];
        let p = softmax(&v);
        assert!((p.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        let shifted: Vec<f64> = v.iter().map(|x| x + 17.0).collect();
        let q = softmax(&shifted);
        for (a, b) in p.iter().zip(&q) {
            assert!((a - b).abs() < 1e-12);
        }
        assert_eq!(argmax(&v), argmax(&shifted));
        let ls = log_softmax(&v);
        for (a, b) in ls.iter().zip(&p) {
            assert!((a.exp() - b).abs() < 1e-12);
        }
    }

    #[test]
    fn json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("forest.json");
        let f = forest(&["(div (var 1) (const 0.175))"], 2);
        f.save_json("mountaincar-cont", &path).unwrap();
        let (env, g) = Forest::load_json(&path).unwrap();
        assert_eq!(env, "mountaincar-cont");
        assert_eq!(f, g);
        let text = std::fs::read_to_string(&path).unwrap();
        assert!(text.contains("\"action_mode\": \"continuous\""));
    }

    #[test]
    fn dot_has_one_node_per_expr_node() {
        let t = parse_with_features("(add (var 0) (mul (const 2) (var 1)))", 2).unwrap();
        let dot = to_dot(&t, "policy");
        assert_eq!(dot.matches("label=").count(), 5);
        assert!(dot.contains("label=\"x1\""));
        assert!(dot.contains("label=\"mul\""));
        assert_eq!(dot.matches("->").count(), 4);
    }
}
