//! Prefix s-expression text format and an infix pretty printer.
//!
//! Grammar:
//!
//! ```text
//! expr  := "(" "var" INT ")" | "(" "const" REAL ")" | "(" "fixed" REAL ")"
//!        | "(" OP expr+ ")"
//! ```
//!
//! `fixed` marks a constant that gradient refinement must not touch.

use std::fmt::Write;

use super::ops::Operator;
use super::tree::{ExprNode, ExprTree};
use crate::error::{Error, Result};

/// Parses a tree; `num_features` is inferred as one past the largest variable index.
pub fn parse(text: &str) -> Result<ExprTree> {
    let root = parse_node(text)?;
    let nf = root.max_var().map_or(0, |m| m + 1);
    Ok(ExprTree {
        root,
        num_features: nf,
        label: String::new(),
    })
}

/// Parses a tree declared over exactly `num_features` inputs.
pub fn parse_with_features(text: &str, num_features: usize) -> Result<ExprTree> {
    ExprTree::new(parse_node(text)?, num_features)
}

fn parse_node(text: &str) -> Result<ExprNode> {
    let mut p = Parser { src: text, pos: 0 };
    let node = p.expr()?;
    p.skip_ws();
    if p.pos != text.len() {
        return Err(p.err("trailing input"));
    }
    Ok(node)
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
}

impl<'a> Parser<'a> {
    fn err(&self, message: impl Into<String>) -> Error {
        Error::Parse {
            pos: self.pos,
            message: message.into(),
        }
    }

    fn skip_ws(&mut self) {
        let rest = &self.src[self.pos..];
        self.pos += rest.len() - rest.trim_start().len();
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn expect(&mut self, c: char) -> Result<()> {
        self.skip_ws();
        if self.peek() == Some(c) {
            self.pos += c.len_utf8();
            Ok(())
        } else {
            Err(self.err(format!("expected '{c}'")))
        }
    }

    fn atom(&mut self) -> Result<(usize, &'a str)> {
        self.skip_ws();
        let start = self.pos;
        let rest = &self.src[start..];
        let len = rest
            .find(|c: char| c.is_whitespace() || c == '(' || c == ')')
            .unwrap_or(rest.len());
        if len == 0 {
            return Err(self.err("expected atom"));
        }
        self.pos += len;
        Ok((start, &rest[..len]))
    }

    fn expr(&mut self) -> Result<ExprNode> {
        self.expect('(')?;
        let (head_pos, head) = self.atom()?;
        let node = match head {
            "var" => {
                let (p, tok) = self.atom()?;
                let i = tok.parse::<usize>().map_err(|_| Error::Parse {
                    pos: p,
                    message: format!("malformed variable index '{tok}'"),
                })?;
                ExprNode::Var(i)
            }
            "const" | "fixed" => {
                let (p, tok) = self.atom()?;
                let value = tok.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| {
                    Error::Parse {
                        pos: p,
                        message: format!("malformed constant '{tok}'"),
                    }
                })?;
                ExprNode::Const {
                    value,
                    trainable: head == "const",
                }
            }
            name => {
                let op: Operator = name.parse().map_err(|_| Error::Parse {
                    pos: head_pos,
                    message: format!("unknown operator '{name}'"),
                })?;
                let mut children = Vec::with_capacity(2);
                loop {
                    self.skip_ws();
                    match self.peek() {
                        Some('(') => children.push(self.expr()?),
                        Some(')') => break,
                        None => return Err(self.err("unexpected end of input")),
                        Some(_) => return Err(self.err("expected '(' or ')'")),
                    }
                }
                if children.len() != op.arity() {
                    return Err(Error::Parse {
                        pos: head_pos,
                        message: format!(
                            "arity error: {op} takes {} argument(s), got {}",
                            op.arity(),
                            children.len()
                        ),
                    });
                }
                ExprNode::Op(op, children)
            }
        };
        self.expect(')')?;
        Ok(node)
    }
}

/// Prefix s-expression. Constants use the shortest decimal that round-trips.
pub fn render(tree: &ExprTree) -> String {
    let mut out = String::new();
    render_node(&tree.root, &mut out);
    out
}

pub fn render_node(node: &ExprNode, out: &mut String) {
    match node {
        ExprNode::Const { value, trainable } => {
            let head = if *trainable { "const" } else { "fixed" };
            write!(out, "({head} {value:?})").unwrap();
        }
        ExprNode::Var(i) => write!(out, "(var {i})").unwrap(),
        ExprNode::Op(op, c) => {
            write!(out, "({op}").unwrap();
            for child in c {
                out.push(' ');
                render_node(child, out);
            }
            out.push(')');
        }
    }
}

/// Human-readable infix form. `names` overrides the default `x{i}` labels.
pub fn render_infix(tree: &ExprTree, names: Option<&[String]>) -> String {
    let mut out = String::new();
    infix(&tree.root, names, &mut out);
    out
}

fn infix(node: &ExprNode, names: Option<&[String]>, out: &mut String) {
    match node {
        ExprNode::Const { value, .. } => write!(out, "{}", short(*value)).unwrap(),
        ExprNode::Var(i) => match names.and_then(|n| n.get(*i)) {
            Some(name) => out.push_str(name),
            None => write!(out, "x{i}").unwrap(),
        },
        ExprNode::Op(op, c) => {
            let sym = match op {
                Operator::Add => Some("+"),
                Operator::Sub => Some("-"),
                Operator::Mul => Some("*"),
                Operator::Div => Some("/"),
                Operator::Leq => Some("<="),
                Operator::Geq => Some(">="),
                _ => None,
            };
            match sym {
                Some(s) => {
                    out.push('(');
                    infix(&c[0], names, out);
                    write!(out, " {s} ").unwrap();
                    infix(&c[1], names, out);
                    out.push(')');
                }
                None => {
                    let f = match op {
                        Operator::Not => "not",
                        Operator::Square => "sq",
                        Operator::Cube => "cube",
                        Operator::Sqrt => "sqrt",
                        Operator::Exp => "exp",
                        _ => "log",
                    };
                    write!(out, "{f}(").unwrap();
                    infix(&c[0], names, out);
                    out.push(')');
                }
            }
        }
    }
}

fn short(v: f64) -> String {
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" || s.is_empty() {
        "0".into()
    } else {
        s.to_string()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_simple_tree() {
        let tree = parse("(add (var 0) (const 2.5))").unwrap();
        assert_eq!(
            tree.root,
            ExprNode::binary(Operator::Add, ExprNode::Var(0), ExprNode::constant(2.5))
        );
        assert_eq!(tree.num_features, 1);
    }

    #[test]
    fn arity_error_has_position() {
        match parse("(add (var 0))") {
            Err(Error::Parse { pos, message }) => {
                assert_eq!(pos, 1);
                assert!(message.contains("arity"), "{message}");
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(parse("(pow (var 0) (var 1))"), Err(Error::Parse { pos: 1, .. })));
        assert!(matches!(parse("(const abc)"), Err(Error::Parse { pos: 7, .. })));
        assert!(matches!(parse("(var -1)"), Err(Error::Parse { .. })));
        assert!(matches!(parse("(var 0) x"), Err(Error::Parse { .. })));
        assert!(matches!(parse("(sqrt (var 0)"), Err(Error::Parse { .. })));
        assert!(matches!(parse("(const inf)"), Err(Error::Parse { .. })));
    }

    #[test]
    fn render_is_lossless() {
        let text = "(div (var 1) (const 0.17500000000000002))";
        let tree = parse(text).unwrap();
        assert_eq!(render(&tree), text);
        let text = "(sub (fixed -3.0) (exp (var 0)))";
        assert_eq!(render(&parse(text).unwrap()), text);
    }

    #[test]
    fn infix_form() {
        let tree = parse("(div (var 1) (const 0.175))").unwrap();
        assert_eq!(render_infix(&tree, None), "(x1 / 0.175)");
        let names = vec!["pos".to_string(), "vel".to_string()];
        assert_eq!(render_infix(&tree, Some(&names)), "(vel / 0.175)");
        let tree = parse("(not (square (var 0)))").unwrap();
        assert_eq!(render_infix(&tree, None), "not(sq(x0))");
    }

    #[test]
    fn parse_with_features_validates() {
        assert!(parse_with_features("(var 3)", 2).is_err());
        assert_eq!(parse_with_features("(var 0)", 4).unwrap().num_features, 4);
    }
}
