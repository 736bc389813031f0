use super::ops::{saturate, Operator, VALUE_LIMIT};
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub enum ExprNode {
    Const { value: f64, trainable: bool },
    Var(usize),
    Op(Operator, Vec<ExprNode>),
}

impl ExprNode {
    pub fn constant(value: f64) -> Self {
        ExprNode::Const {
            value,
            trainable: true,
        }
    }

    pub fn var(index: usize) -> Self {
        ExprNode::Var(index)
    }

    pub fn unary(op: Operator, a: ExprNode) -> Self {
        debug_assert_eq!(op.arity(), 1);
        ExprNode::Op(op, vec![a])
    }

    pub fn binary(op: Operator, a: ExprNode, b: ExprNode) -> Self {
        debug_assert_eq!(op.arity(), 2);
        ExprNode::Op(op, vec![a, b])
    }

    pub fn is_leaf(&self) -> bool {
        !matches!(self, ExprNode::Op(..))
    }

    pub fn children(&self) -> &[ExprNode] {
        match self {
            ExprNode::Op(_, c) => c,
            _ => &[],
        }
    }

    pub fn node_count(&self) -> usize {
        1 + self.children().iter().map(ExprNode::node_count).sum::<usize>()
    }

    /// Number of nodes on the longest root-to-leaf path; a leaf has depth 1.
    pub fn depth(&self) -> usize {
        1 + self
            .children()
            .iter()
            .map(ExprNode::depth)
            .max()
            .unwrap_or(0)
    }

    pub fn max_var(&self) -> Option<usize> {
        match self {
            ExprNode::Var(i) => Some(*i),
            ExprNode::Const { .. } => None,
            ExprNode::Op(_, c) => c.iter().filter_map(ExprNode::max_var).max(),
        }
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        match self {
            ExprNode::Const { value, .. } => *value,
            ExprNode::Var(i) => x[*i],
            ExprNode::Op(op, c) => {
                let a = c[0].eval(x);
                let b = if c.len() > 1 { c[1].eval(x) } else { 0.0 };
                op.apply(a, b)
            }
        }
    }

    /// Pre-order node at `index`.
    pub fn get(&self, index: usize) -> Option<&ExprNode> {
        if index == 0 {
            return Some(self);
        }
        let mut offset = 1;
        for child in self.children() {
            let n = child.node_count();
            if index < offset + n {
                return child.get(index - offset);
            }
            offset += n;
        }
        None
    }

    /// Depth of the node at pre-order `index` measured from this node (root = 1).
    pub fn depth_of(&self, index: usize) -> Option<usize> {
        if index == 0 {
            return Some(1);
        }
        let mut offset = 1;
        for child in self.children() {
            let n = child.node_count();
            if index < offset + n {
                return child.depth_of(index - offset).map(|d| d + 1);
            }
            offset += n;
        }
        None
    }

    /// Copy of `self` with the subtree at pre-order `index` swapped for `replacement`.
    pub fn replace(&self, index: usize, replacement: ExprNode) -> ExprNode {
        fn go(node: &ExprNode, index: usize, replacement: &mut Option<ExprNode>) -> ExprNode {
            if index == 0 {
                return replacement.take().expect("replacement used once");
            }
            match node {
                ExprNode::Op(op, children) => {
                    let mut offset = 1;
                    let mut out = Vec::with_capacity(children.len());
                    for child in children {
                        let n = child.node_count();
                        if index >= offset && index < offset + n {
                            out.push(go(child, index - offset, replacement));
                        } else {
                            out.push(child.clone());
                        }
                        offset += n;
                    }
                    ExprNode::Op(*op, out)
                }
                leaf => leaf.clone(),
            }
        }
        let mut slot = Some(replacement);
        let out = go(self, index, &mut slot);
        assert!(slot.is_none(), "index {index} out of range");
        out
    }

    fn visit_constants<F: FnMut(f64)>(&self, f: &mut F) {
        match self {
            ExprNode::Const {
                value,
                trainable: true,
            } => f(*value),
            ExprNode::Op(_, c) => c.iter().for_each(|n| n.visit_constants(f)),
            _ => {}
        }
    }

    fn assign_constants(&mut self, values: &mut std::slice::Iter<'_, f64>) {
        match self {
            ExprNode::Const {
                value,
                trainable: true,
            } => *value = *values.next().expect("constant count mismatch"),
            ExprNode::Op(_, c) => c.iter_mut().for_each(|n| n.assign_constants(values)),
            _ => {}
        }
    }
}

/// A symbolic expression over a feature vector of fixed length.
#[derive(Debug, Clone, PartialEq)]
pub struct ExprTree {
    pub root: ExprNode,
    pub num_features: usize,
    pub label: String,
}

impl ExprTree {
    pub fn new(root: ExprNode, num_features: usize) -> Result<Self> {
        let tree = ExprTree {
            root,
            num_features,
            label: String::new(),
        };
        tree.validate()?;
        Ok(tree)
    }

    pub fn with_label(mut self, label: impl Into<String>) -> Self {
        self.label = label.into();
        self
    }

    /// Checks arity, variable range and finiteness of constants.
    pub fn validate(&self) -> Result<()> {
        fn go(node: &ExprNode, nf: usize) -> Result<()> {
            match node {
                ExprNode::Const { value, .. } if !value.is_finite() => Err(Error::InvalidTree(
                    format!("non-finite constant {value}"),
                )),
                ExprNode::Const { .. } => Ok(()),
                ExprNode::Var(i) if *i >= nf => Err(Error::InvalidTree(format!(
                    "variable x{i} out of range for {nf} features"
                ))),
                ExprNode::Var(_) => Ok(()),
                ExprNode::Op(op, c) => {
                    if c.len() != op.arity() {
                        return Err(Error::InvalidTree(format!(
                            "{op} expects {} children, got {}",
                            op.arity(),
                            c.len()
                        )));
                    }
                    c.iter().try_for_each(|n| go(n, nf))
                }
            }
        }
        go(&self.root, self.num_features)
    }

    pub fn node_count(&self) -> usize {
        self.root.node_count()
    }

    pub fn depth(&self) -> usize {
        self.root.depth()
    }

    pub fn eval(&self, features: &[f64]) -> Result<f64> {
        self.check_input(features)?;
        Ok(self.root.eval(features))
    }

    /// Evaluation without the dimension check, for hot loops that validated once.
    pub fn eval_unchecked(&self, features: &[f64]) -> f64 {
        self.root.eval(features)
    }

    fn check_input(&self, features: &[f64]) -> Result<()> {
        if features.len() != self.num_features {
            return Err(Error::DimensionMismatch {
                expected: self.num_features,
                got: features.len(),
            });
        }
        Ok(())
    }

    /// Trainable constants in depth-first, left-to-right order.
    pub fn constants(&self) -> Vec<f64> {
        let mut out = Vec::new();
        self.root.visit_constants(&mut |v| out.push(v));
        out
    }

    pub fn num_constants(&self) -> usize {
        let mut n = 0;
        self.root.visit_constants(&mut |_| n += 1);
        n
    }

    pub fn with_constants(&self, values: &[f64]) -> ExprTree {
        assert_eq!(values.len(), self.num_constants());
        let mut out = self.clone();
        out.root.assign_constants(&mut values.iter());
        out
    }

    /// Gradient of `upstream * eval(features)` with respect to every trainable
    /// constant, ordered as in [`ExprTree::constants`].
    pub fn grad_constants(&self, features: &[f64], upstream: f64) -> Result<Vec<f64>> {
        self.check_input(features)?;
        let mut grads = Vec::with_capacity(self.num_constants());
        self.accumulate_grad(features, upstream, &mut grads);
        Ok(grads)
    }

    /// Adds `upstream * d eval / d c` into `grads`, which must be either empty
    /// (it is then filled) or already sized to the constant count.
    pub fn accumulate_grad(&self, features: &[f64], upstream: f64, grads: &mut Vec<f64>) {
        let tape = Tape::record(&self.root, features);
        let fill = grads.is_empty();
        let mut cursor = 0;
        let mut k = 0;
        tape.backward(&self.root, upstream, &mut cursor, &mut k, grads, fill);
    }
}

/// Forward values in pre-order, plus the pre-order index one past each subtree.
struct Tape {
    values: Vec<f64>,
    ends: Vec<usize>,
}

impl Tape {
    fn record(root: &ExprNode, x: &[f64]) -> Tape {
        let n = root.node_count();
        let mut tape = Tape {
            values: vec![0.0; n],
            ends: vec![0; n],
        };
        let mut cursor = 0;
        tape.forward(root, x, &mut cursor);
        tape
    }

    fn forward(&mut self, node: &ExprNode, x: &[f64], cursor: &mut usize) -> f64 {
        let idx = *cursor;
        *cursor += 1;
        let v = match node {
            ExprNode::Const { value, .. } => *value,
            ExprNode::Var(i) => x[*i],
            ExprNode::Op(op, c) => {
                let a = self.forward(&c[0], x, cursor);
                let b = if c.len() > 1 {
                    self.forward(&c[1], x, cursor)
                } else {
                    0.0
                };
                op.apply(a, b)
            }
        };
        self.values[idx] = v;
        self.ends[idx] = *cursor;
        v
    }

    fn backward(
        &self,
        node: &ExprNode,
        adjoint: f64,
        cursor: &mut usize,
        k: &mut usize,
        grads: &mut Vec<f64>,
        fill: bool,
    ) {
        let idx = *cursor;
        *cursor += 1;
        match node {
            ExprNode::Const {
                trainable: true, ..
            } => {
                if fill {
                    grads.push(adjoint);
                } else {
                    grads[*k] += adjoint;
                }
                *k += 1;
            }
            ExprNode::Const { .. } | ExprNode::Var(_) => {}
            ExprNode::Op(op, c) => {
                let ia = idx + 1;
                let a = self.values[ia];
                let b = if c.len() > 1 {
                    self.values[self.ends[ia]]
                } else {
                    0.0
                };
                let (da, db) = op.partials(a, b);
                self.backward(&c[0], adjoint * da, cursor, k, grads, fill);
                if c.len() > 1 {
                    self.backward(&c[1], adjoint * db, cursor, k, grads, fill);
                }
            }
        }
    }
}

/// True when `v` sits at the saturation limit.
pub fn is_saturated(v: f64) -> bool {
    saturate(v).abs() >= VALUE_LIMIT
}
