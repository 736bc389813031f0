use super::policy::{Observer, Policy};
use crate::envs;
use crate::error::{Error, Result};
use crate::expr::{ActionMode, Forest};
use crate::gp::{run_regression, GpConfig, RegressionResult};
use crate::objects::ExtractorConfig;
use crate::rng;
use crate::tinynn::MlpPolicy;

/// Feature rows and the teacher's logits (or action means) for each row.
#[derive(Debug, Clone, PartialEq)]
pub struct DistillDataset {
    pub x: Vec<Vec<f64>>,
    pub y: Vec<Vec<f64>>,
}

/// Samples exactly `n` states from stochastic teacher rollouts, starting new
/// episodes as needed.
pub fn collect_distill_dataset(
    teacher: &MlpPolicy,
    env_id: &str,
    extractor: &ExtractorConfig,
    n: usize,
    seed: u64,
) -> Result<DistillDataset> {
    if n == 0 {
        return Err(Error::InvalidInput("dataset size must be positive".into()));
    }
    let mut env = envs::make(env_id)?;
    let mut observer = Observer::for_env(env.spec(), extractor);
    if observer.num_features(env.spec()) != teacher.state_dim() {
        return Err(Error::DimensionMismatch {
            expected: observer.num_features(env.spec()),
            got: teacher.state_dim(),
        });
    }
    let mut act_rng = rng::stream(seed, &[0xD157]);
    let (mut x, mut y) = (Vec::with_capacity(n), Vec::with_capacity(n));
    let mut episode = 0u64;
    'episodes: loop {
        let ep_seed = rng::derive(seed, &[0xD15E, episode]);
        episode += 1;
        let state = env.reset(ep_seed);
        observer.reset(ep_seed);
        let mut obs = observer.observe(env.as_ref(), &state)?;
        loop {
            x.push(obs.clone());
            y.push(teacher.logits(&obs)?);
            if x.len() == n {
                break 'episodes;
            }
            let a = teacher.act(&obs, false, &mut act_rng)?;
            let r = env.step(&a)?;
            if r.done {
                break;
            }
            obs = observer.observe(env.as_ref(), &r.next_state)?;
        }
    }
    Ok(DistillDataset { x, y })
}

/// One symbolic regression per output column, all with the same config.
pub fn distill_forest(
    x: &[Vec<f64>],
    y: &[Vec<f64>],
    gp: &GpConfig,
    mode: ActionMode,
) -> Result<(Forest, Vec<RegressionResult>)> {
    let na = y.first().map_or(0, Vec::len);
    if na == 0 || y.iter().any(|r| r.len() != na) {
        return Err(Error::InvalidInput("targets need a consistent positive column count".into()));
    }
    let mut results = Vec::with_capacity(na);
    for i in 0..na {
        let col: Vec<f64> = y.iter().map(|r| r[i]).collect();
        log::info!("distilling action {i} of {na}");
        results.push(run_regression(x, &col, gp)?);
    }
    let forest = Forest::new(results.iter().map(|r| r.tree.clone()).collect(), mode)?;
    Ok((forest, results))
}
