//! Recovers `x0 / 0.175` from samples with GP plus gradient steps on constants,
//! and compares against GP without the gradient strategy.

use symforest::cli::ablate::regression_benchmark;
use symforest::expr::{render_infix, simplify};
use symforest::gp::{run_regression, GpConfig, StrategyProbs};

fn main() -> Result<(), symforest::Error> {
    let (x, y) = regression_benchmark(0);
    for (name, probs) in [("gp+sgd", StrategyProbs::default()), ("vanilla", StrategyProbs::vanilla())] {
        let cfg = GpConfig {
            strategy_probs: probs,
            target_mse: 1e-6,
            ..Default::default()
        };
        let r = run_regression(&x, &y, &cfg)?;
        println!(
            "{name:>8}: mse {:.2e} after {} generations: {}",
            r.mse,
            r.history.len() - 1,
            render_infix(&simplify(&r.tree), None)
        );
    }
    Ok(())
}
