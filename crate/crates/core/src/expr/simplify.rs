use super::ops::Operator;
use super::tree::{ExprNode, ExprTree};

/// Folds constant subtrees and drops additive/multiplicative identities.
pub fn simplify(tree: &ExprTree) -> ExprTree {
    ExprTree {
        root: simplify_node(&tree.root),
        num_features: tree.num_features,
        label: tree.label.clone(),
    }
}

fn const_of(node: &ExprNode) -> Option<(f64, bool)> {
    match node {
        ExprNode::Const { value, trainable } => Some((*value, *trainable)),
        _ => None,
    }
}

fn is(node: &ExprNode, v: f64) -> bool {
    const_of(node).is_some_and(|(c, _)| c == v)
}

pub fn simplify_node(node: &ExprNode) -> ExprNode {
    let ExprNode::Op(op, children) = node else {
        return node.clone();
    };
    let c: Vec<ExprNode> = children.iter().map(simplify_node).collect();

    if c.iter().all(|n| const_of(n).is_some()) {
        let a = const_of(&c[0]).unwrap();
        let b = c.get(1).and_then(const_of).unwrap_or((0.0, false));
        return ExprNode::Const {
            value: op.apply(a.0, b.0),
            trainable: a.1 || b.1,
        };
    }

    if c.len() == 2 {
        let (l, r) = (&c[0], &c[1]);
        match op {
            Operator::Add if is(r, 0.0) => return l.clone(),
            Operator::Add if is(l, 0.0) => return r.clone(),
            Operator::Sub if is(r, 0.0) => return l.clone(),
            Operator::Mul if is(r, 1.0) => return l.clone(),
            Operator::Mul if is(l, 1.0) => return r.clone(),
            Operator::Mul if is(l, 0.0) || is(r, 0.0) => return ExprNode::constant(0.0),
            Operator::Div if is(r, 1.0) => return l.clone(),
            _ => {}
        }
    }
    ExprNode::Op(*op, c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::{parse, render};

    fn s(text: &str) -> String {
        render(&simplify(&parse(text).unwrap()))
    }

    #[test]
    fn examples() {
        assert_eq!(s("(add (const 1) (const 2))"), "(const 3.0)");
        assert_eq!(s("(mul (var 0) (const 1))"), "(var 0)");
        assert_eq!(
            s("(div (var 0) (const 0.175))"),
            "(div (var 0) (const 0.175))"
        );
    }

    #[test]
    fn nested_folding() {
        assert_eq!(
            s("(add (var 0) (mul (const 0) (exp (var 1))))"),
            "(var 0)"
        );
        assert_eq!(s("(sqrt (square (const -3)))"), "(const 3.0)");
    }
}
