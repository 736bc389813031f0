use std::fmt;
use std::str::FromStr;

/// Largest magnitude any node may produce. Results beyond it saturate.
pub const VALUE_LIMIT: f64 = 1e30;

/// Denominators smaller than this make `div` return 1.
pub const DIV_EPSILON: f64 = 1e-6;

/// Upper clamp applied to the argument of `exp`.
pub const EXP_ARG_MAX: f64 = 80.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Operator {
    Add,
    Sub,
    Mul,
    Div,
    Leq,
    Geq,
    Not,
    Square,
    Cube,
    Sqrt,
    Exp,
    Log,
}

impl Operator {
    pub const ALL: [Operator; 12] = [
        Operator::Add,
        Operator::Sub,
        Operator::Mul,
        Operator::Div,
        Operator::Leq,
        Operator::Geq,
        Operator::Not,
        Operator::Square,
        Operator::Cube,
        Operator::Sqrt,
        Operator::Exp,
        Operator::Log,
    ];

    pub const BINARY: [Operator; 6] = [
        Operator::Add,
        Operator::Sub,
        Operator::Mul,
        Operator::Div,
        Operator::Leq,
        Operator::Geq,
    ];

    pub const UNARY: [Operator; 6] = [
        Operator::Not,
        Operator::Square,
        Operator::Cube,
        Operator::Sqrt,
        Operator::Exp,
        Operator::Log,
    ];

    pub fn arity(self) -> usize {
        match self {
            Operator::Add
            | Operator::Sub
            | Operator::Mul
            | Operator::Div
            | Operator::Leq
            | Operator::Geq => 2,
            _ => 1,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Operator::Add => "add",
            Operator::Sub => "sub",
            Operator::Mul => "mul",
            Operator::Div => "div",
            Operator::Leq => "leq",
            Operator::Geq => "geq",
            Operator::Not => "not",
            Operator::Square => "square",
            Operator::Cube => "cube",
            Operator::Sqrt => "sqrt",
            Operator::Exp => "exp",
            Operator::Log => "log",
        }
    }

    /// Operators with the same arity, used by point mutation.
    pub fn same_arity(self) -> &'static [Operator] {
        if self.arity() == 2 {
            &Self::BINARY
        } else {
            &Self::UNARY
        }
    }

    /// Protected evaluation. `b` is ignored for unary operators.
    pub fn apply(self, a: f64, b: f64) -> f64 {
        let v = match self {
            Operator::Add => a + b,
            Operator::Sub => a - b,
            Operator::Mul => a * b,
            Operator::Div => {
                if b.abs() < DIV_EPSILON {
                    1.0
                } else {
                    a / b
                }
            }
            Operator::Leq => bool_value(a <= b),
            Operator::Geq => bool_value(a >= b),
            Operator::Not => bool_value(a.abs() < 0.5),
            Operator::Square => a * a,
            Operator::Cube => a * a * a,
            Operator::Sqrt => a.abs().sqrt(),
            Operator::Exp => a.min(EXP_ARG_MAX).exp(),
            Operator::Log => {
                if a == 0.0 {
                    0.0
                } else {
                    a.abs().ln()
                }
            }
        };
        saturate(v)
    }

    /// Local partial derivatives `(d/da, d/db)` of [`Operator::apply`].
    ///
    /// Comparison and negation outputs are piecewise constant and carry zero
    /// gradient. Saturated outputs and protected branches are flat as well.
    pub fn partials(self, a: f64, b: f64) -> (f64, f64) {
        let raw = self.apply(a, b);
        if raw.abs() >= VALUE_LIMIT {
            return (0.0, 0.0);
        }
        match self {
            Operator::Add => (1.0, 1.0),
            Operator::Sub => (1.0, -1.0),
            Operator::Mul => (b, a),
            Operator::Div => {
                if b.abs() < DIV_EPSILON {
                    (0.0, 0.0)
                } else {
                    (1.0 / b, -a / (b * b))
                }
            }
            Operator::Leq | Operator::Geq | Operator::Not => (0.0, 0.0),
            Operator::Square => (2.0 * a, 0.0),
            Operator::Cube => (3.0 * a * a, 0.0),
            Operator::Sqrt => {
                if a == 0.0 {
                    (0.0, 0.0)
                } else {
                    (a.signum() / (2.0 * a.abs().sqrt()), 0.0)
                }
            }
            Operator::Exp => {
                if a > EXP_ARG_MAX {
                    (0.0, 0.0)
                } else {
                    (raw, 0.0)
                }
            }
            Operator::Log => {
                if a == 0.0 {
                    (0.0, 0.0)
                } else {
                    (1.0 / a, 0.0)
                }
            }
        }
    }
}

fn bool_value(b: bool) -> f64 {
    if b {
        1.0
    } else {
        0.0
    }
}

/// Clamp to `±VALUE_LIMIT`; NaN (unreachable for finite inputs) maps to 0.
pub fn saturate(v: f64) -> f64 {
    if v.is_nan() {
        0.0
    } else {
        v.clamp(-VALUE_LIMIT, VALUE_LIMIT)
    }
}

impl fmt::Display for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Operator {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Operator::ALL
            .iter()
            .copied()
            .find(|op| op.name() == s)
            .ok_or(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arities() {
        for op in Operator::BINARY {
            assert_eq!(op.arity(), 2);
        }
        for op in Operator::UNARY {
            assert_eq!(op.arity(), 1);
        }
        assert_eq!(Operator::ALL.len(), 12);
    }

    #[test]
    fn protected_semantics() {
        assert_eq!(Operator::Div.apply(1.0, 0.0), 1.0);
        assert_eq!(Operator::Div.apply(1.0, 5e-7), 1.0);
        assert_eq!(Operator::Log.apply(0.0, 0.0), 0.0);
        assert_eq!(Operator::Log.apply(-std::f64::consts::E, 0.0), 1.0);
        assert_eq!(Operator::Sqrt.apply(-4.0, 0.0), 2.0);
        assert_eq!(Operator::Exp.apply(1000.0, 0.0), VALUE_LIMIT);
        assert_eq!(Operator::Exp.apply(60.0, 0.0), 60f64.exp());
        assert_eq!(Operator::Square.apply(1e20, 0.0), VALUE_LIMIT);
        assert_eq!(Operator::Cube.apply(-1e20, 0.0), -VALUE_LIMIT);
    }

    #[test]
    fn boolean_encoding() {
        assert_eq!(Operator::Leq.apply(1.0, 1.0), 1.0);
        assert_eq!(Operator::Leq.apply(2.0, 1.0), 0.0);
        assert_eq!(Operator::Geq.apply(2.0, 1.0), 1.0);
        assert_eq!(Operator::Not.apply(0.2, 0.0), 1.0);
        assert_eq!(Operator::Not.apply(1.0, 0.0), 0.0);
    }

    #[test]
    fn names_round_trip() {
        for op in Operator::ALL {
            assert_eq!(op.name().parse::<Operator>(), Ok(op));
        }
        assert!("pow".parse::<Operator>().is_err());
    }
}
