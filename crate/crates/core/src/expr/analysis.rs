use super::tree::ExprTree;

/// Closest fit of `tree` to the form `x_j / c`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VarOverConst {
    pub var: usize,
    pub divisor: f64,
    /// Largest absolute difference between the tree and `x_j / c` on the probes.
    pub max_abs_diff: f64,
}

/// Tests whether `tree` behaves like a single variable divided by a constant.
///
/// For each variable `j`, the gain `1/c` is read off by evaluating the tree at
/// the unit vector `e_j`; the candidate form is then compared against the tree
/// on every probe input. Returns the best-matching variable.
pub fn match_var_over_const(tree: &ExprTree, probes: &[Vec<f64>]) -> Option<VarOverConst> {
    let nf = tree.num_features;
    let mut best: Option<VarOverConst> = None;
    for j in 0..nf {
        let mut unit = vec![0.0; nf];
        unit[j] = 1.0;
        let gain = tree.eval_unchecked(&unit);
        if gain == 0.0 || !gain.is_finite() {
            continue;
        }
        let divisor = 1.0 / gain;
        let max_abs_diff = probes
            .iter()
            .map(|x| (tree.eval_unchecked(x) - x[j] / divisor).abs())
            .fold(0.0, f64::max);
        if best.is_none_or(|b| max_abs_diff < b.max_abs_diff) {
            best = Some(VarOverConst {
                var: j,
                divisor,
                max_abs_diff,
            });
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse_with_features;

    fn probes() -> Vec<Vec<f64>> {
        (0..50)
            .map(|i| vec![(i as f64 * 0.37).sin(), (i as f64 * 0.71).cos() * 0.07])
            .collect()
    }

    #[test]
    fn detects_division_form() {
        let t = parse_with_features("(div (var 1) (const 0.175))", 2).unwrap();
        let m = match_var_over_const(&t, &probes()).unwrap();
        assert_eq!(m.var, 1);
        assert!((m.divisor - 0.175).abs() < 1e-12);
        assert!(m.max_abs_diff < 1e-12);
    }

    #[test]
    fn equivalent_product_form_matches() {
        let t = parse_with_features("(mul (const 5.0) (add (var 1) (fixed 0)))", 2).unwrap();
        let m = match_var_over_const(&t, &probes()).unwrap();
        assert!((m.divisor - 0.2).abs() < 1e-12);
        assert!(m.max_abs_diff < 1e-12);
    }

    #[test]
    fn nonlinear_tree_has_large_residual() {
        let t = parse_with_features("(add (var 0) (square (var 1)))", 2).unwrap();
        let m = match_var_over_const(&t, &probes()).unwrap();
        assert!(m.max_abs_diff > 1e-3);
    }
}
