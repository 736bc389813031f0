use std::io::Write;
use std::path::Path;

use super::config::GpConfig;
use super::engine::{best_index, evolve, Candidate, Fitness, GenerationStats, Workers};
use super::variation::VariationConfig;
use crate::error::{Error, Result};
use crate::expr::{random_tree, render, ExprNode, ExprTree};
use crate::rng;

/// Mean squared error against a fixed dataset. Fitness is `-mse`.
pub struct MseFitness<'a> {
    pub x: &'a [Vec<f64>],
    pub y: &'a [f64],
}

impl MseFitness<'_> {
    pub fn mse(&self, tree: &ExprTree) -> f64 {
        let n = self.y.len() as f64;
        self.x
            .iter()
            .zip(self.y)
            .map(|(row, y)| {
                let r = tree.eval_unchecked(row) - y;
                r * r
            })
            .sum::<f64>()
            / n
    }
}

impl Fitness<ExprTree> for MseFitness<'_> {
    fn fitness(&self, tree: &ExprTree, _stream: u64) -> f64 {
        -self.mse(tree)
    }

    fn loss_grad(&self, tree: &ExprTree) -> Option<(f64, Vec<f64>)> {
        let n = self.y.len() as f64;
        let mut grad = vec![0.0; tree.num_constants()];
        let mut loss = 0.0;
        for (row, y) in self.x.iter().zip(self.y) {
            let r = tree.eval_unchecked(row) - y;
            loss += r * r;
            tree.accumulate_grad(row, 2.0 * r / n, &mut grad);
        }
        Some((loss / n, grad))
    }
}

#[derive(Debug, Clone)]
pub struct RegressionResult {
    pub tree: ExprTree,
    pub mse: f64,
    pub history: Vec<GenerationStats>,
    /// Best expression after every generation, as s-expressions.
    pub best_exprs: Vec<String>,
}

impl RegressionResult {
    /// First generation whose best MSE is below `threshold`.
    pub fn generations_to(&self, threshold: f64) -> Option<usize> {
        self.history
            .iter()
            .find(|h| -h.best_fitness < threshold)
            .map(|h| h.generation)
    }
}

/// Symbolic regression of `y` on the rows of `x`.
/// Columns that take more than one value; constant columns are never sampled as leaves.
pub fn varying_columns(x: &[Vec<f64>]) -> Vec<usize> {
    let Some(first) = x.first() else {
        return Vec::new();
    };
    (0..first.len()).filter(|&j| x.iter().any(|r| r[j] != first[j])).collect()
}

pub fn run_regression(x: &[Vec<f64>], y: &[f64], cfg: &GpConfig) -> Result<RegressionResult> {
    cfg.validate()?;
    if x.is_empty() || x.len() != y.len() {
        return Err(Error::InvalidInput(format!(
            "need matching non-empty X ({} rows) and y ({} rows)",
            x.len(),
            y.len()
        )));
    }
    let nf = x[0].len();
    if nf == 0 || x.iter().any(|r| r.len() != nf) {
        return Err(Error::InvalidInput("rows must share a positive feature count".into()));
    }
    if x.iter().flatten().chain(y).any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("regression data".into()));
    }

    let (lo, hi) = y
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(*v), b.max(*v)));
    if lo == hi {
        let tree = ExprTree::new(ExprNode::constant(lo), nf)?;
        let best_exprs = vec![render(&tree)];
        return Ok(RegressionResult {
            tree,
            mse: 0.0,
            history: vec![GenerationStats {
                generation: 0,
                best_fitness: 0.0,
                mean_fitness: 0.0,
                best_node_count: 1,
                wall_time_s: 0.0,
            }],
            best_exprs,
        });
    }

    let fitness = MseFitness { x, y };
    let mut var = VariationConfig {
        gen: cfg.tree_gen(nf),
        max_depth: cfg.max_depth,
    };
    var.gen.active_features = varying_columns(x);
    let mut init_rng = rng::stream(cfg.seed, &[0x1417]);
    let pop: Vec<_> = (0..cfg.population_size)
        .map(|_| Candidate::new(random_tree(&var.gen, &mut init_rng)))
        .collect();
    let workers = Workers::new(cfg.workers);
    let mut best_exprs = Vec::new();
    let (pop, history) = evolve(pop, &fitness, cfg, &var, &workers, |stats, pop| {
        best_exprs.push(render(&pop[best_index(pop)].genome));
        -stats.best_fitness >= cfg.target_mse
    });
    let best = &pop[best_index(&pop)];
    Ok(RegressionResult {
        tree: best.genome.clone(),
        mse: -best.raw(),
        history,
        best_exprs,
    })
}

pub const GENERATION_CSV_HEADER: &str = "generation,best_fitness,mean_fitness,best_node_count,wall_time_s";

pub fn write_generation_csv(path: &Path, history: &[GenerationStats]) -> Result<()> {
    let mut out = String::from(GENERATION_CSV_HEADER);
    out.push('\n');
    for h in history {
        out.push_str(&format!(
            "{},{},{},{},{:.3}\n",
            h.generation, h.best_fitness, h.mean_fitness, h.best_node_count, h.wall_time_s
        ));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// One s-expression per line: the best tree after each generation.
pub fn write_best_log(path: &Path, exprs: &[String]) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    for e in exprs {
        writeln!(f, "{e}").map_err(|err| Error::io(path, err))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn constant_target_gives_constant_tree() {
        let x: Vec<Vec<f64>> = (0..20).map(|i| vec![i as f64]).collect();
        let y = vec![4.2; 20];
        let r = run_regression(&x, &y, &GpConfig::default()).unwrap();
        for row in &x {
            assert_eq!(r.tree.eval(row).unwrap(), 4.2);
        }
        assert_eq!(r.mse, 0.0);
    }

    #[test]
    fn rejects_bad_data() {
        let cfg = GpConfig::default();
        assert!(run_regression(&[], &[], &cfg).is_err());
        assert!(run_regression(&[vec![1.0]], &[1.0, 2.0], &cfg).is_err());
        assert!(run_regression(&[vec![f64::NAN]], &[1.0], &cfg).is_err());
    }

    fn uniform_rows(n: usize, f: usize, half_width: f64, seed: u64) -> Vec<Vec<f64>> {
        use rand::Rng;
        let mut r = rng::stream(seed, &[]);
        (0..n)
            .map(|_| (0..f).map(|_| r.random_range(-half_width..half_width)).collect())
            .collect()
    }

    #[test]
    fn recovers_velocity_over_constant() {
        let x = uniform_rows(2000, 2, 5.0, 1);
        let y: Vec<f64> = x.iter().map(|r| r[0] / 0.175).collect();
        let cfg = GpConfig {
            target_mse: 1e-6,
            ..Default::default()
        };
        let r = run_regression(&x, &y, &cfg).unwrap();
        assert!(r.mse < 1e-6, "mse {} for {}", r.mse, render(&r.tree));
    }

    #[test]
    fn recovers_weighted_sum() {
        let x = uniform_rows(2000, 5, 1.0, 2);
        let y: Vec<f64> = x.iter().map(|r| r[2] + 2.0 * r[3] + 3.0 * r[4]).collect();
        let r = run_regression(&x, &y, &GpConfig::default()).unwrap();
        assert!(r.mse < 1e-4, "mse {} for {}", r.mse, render(&r.tree));
    }

    #[test]
    fn mse_gradient_matches_finite_difference() {
        let x: Vec<Vec<f64>> = (0..30).map(|i| vec![i as f64 / 10.0]).collect();
        let y: Vec<f64> = x.iter().map(|r| 3.0 * r[0] - 1.0).collect();
        let f = MseFitness { x: &x, y: &y };
        let t = crate::expr::parse_with_features("(add (mul (const 1.5) (var 0)) (const 0.2))", 1).unwrap();
        let (_, g) = f.loss_grad(&t).unwrap();
        let c = t.constants();
        for k in 0..c.len() {
            let h = 1e-6;
            let mut up = c.clone();
            up[k] += h;
            let mut dn = c.clone();
            dn[k] -= h;
            let fd = (f.mse(&t.with_constants(&up)) - f.mse(&t.with_constants(&dn))) / (2.0 * h);
            assert!((fd - g[k]).abs() < 1e-5 * fd.abs().max(1.0));
        }
    }
}
