use std::path::PathBuf;

use rand::Rng;

use super::config::RunConfig;
use super::stages::{load_teacher, stage_distill, stage_train_teacher, DISTILLED_FILE, FINETUNED_FILE};
use crate::envs::{BALL_CLASS, DECORATION_CLASS};
use crate::error::{Error, Result};
use crate::expr::Forest;
use crate::gp::{run_regression, GpConfig, StrategyProbs};
use crate::objects::{ExtractorConfig, ExtractorMode};
use crate::pipeline::{evaluate_policy, neural_guided_finetune, EvalResult};
use crate::rng;

pub const PRESETS: [&str; 5] = ["ng-on-off", "sgd-on-off", "drop-robustness", "od-underfit", "transfer-skin"];

/// Comparison table written as `ablate_<preset>.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    pub fn to_csv(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }

    pub fn column(&self, name: &str) -> Vec<f64> {
        let Some(k) = self.header.iter().position(|h| *h == name) else {
            return Vec::new();
        };
        self.rows.iter().map(|r| r[k].parse().unwrap_or(f64::NAN)).collect()
    }
}

/// Median of a non-empty sample (mean of the middle pair when even).
pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        (v[n / 2 - 1] + v[n / 2]) / 2.0
    }
}

pub fn run_preset(cfg: &RunConfig, preset: &str, seeds: usize) -> Result<Table> {
    match preset {
        "ng-on-off" => ng_on_off(cfg, seeds),
        "sgd-on-off" => sgd_on_off(&cfg.gp, cfg.workers, cfg.seed, seeds),
        "drop-robustness" => drop_robustness(cfg),
        "od-underfit" => od_underfit(cfg),
        "transfer-skin" => transfer_skin(cfg),
        other => Err(Error::Config(format!("unknown preset '{other}'; available: {}", PRESETS.join(", ")))),
    }
}

/// `y = x0 / 0.175` on 2000 points drawn uniformly from `[-5, 5]^2`.
pub fn regression_benchmark(seed: u64) -> (Vec<Vec<f64>>, Vec<f64>) {
    let mut r = rng::stream(seed, &[0xBE7C]);
    let x: Vec<Vec<f64>> = (0..2000)
        .map(|_| vec![r.random_range(-5.0..5.0), r.random_range(-5.0..5.0)])
        .collect();
    let y = x.iter().map(|row| row[0] / 0.175).collect();
    (x, y)
}

pub const SGD_TARGET_MSE: f64 = 1e-6;

/// Generations each seed needed to reach [`SGD_TARGET_MSE`], with and
/// without the SGD strategy. Runs that never reach it count as the full budget.
#[derive(Debug, Clone, PartialEq)]
pub struct SgdComparison {
    pub config: &'static str,
    pub generations: Vec<usize>,
    pub final_mse: Vec<f64>,
}

pub fn sgd_comparison(base: &GpConfig, workers: usize, seed: u64, seeds: usize) -> Result<Vec<SgdComparison>> {
    let mut out = Vec::new();
    for (config, probs) in [("vanilla", StrategyProbs::vanilla()), ("gp+sgd", StrategyProbs::default())] {
        let mut generations = Vec::new();
        let mut final_mse = Vec::new();
        for k in 0..seeds as u64 {
            let (x, y) = regression_benchmark(rng::derive(seed, &[k]));
            let gp = GpConfig {
                strategy_probs: probs,
                target_mse: SGD_TARGET_MSE,
                seed: rng::derive(seed, &[0x5E, k]),
                workers,
                ..base.clone()
            };
            let r = run_regression(&x, &y, &gp)?;
            log::info!("sgd-on-off {config} seed {k}: mse {:.3e}", r.mse);
            generations.push(r.generations_to(SGD_TARGET_MSE).unwrap_or(gp.generations));
            final_mse.push(r.mse);
        }
        out.push(SgdComparison {
            config,
            generations,
            final_mse,
        });
    }
    Ok(out)
}

fn sgd_on_off(base: &GpConfig, workers: usize, seed: u64, seeds: usize) -> Result<Table> {
    let rows = sgd_comparison(base, workers, seed, seeds)?
        .into_iter()
        .map(|c| {
            let g: Vec<f64> = c.generations.iter().map(|&g| g as f64).collect();
            vec![c.config.to_string(), median(&g).to_string(), median(&c.final_mse).to_string()]
        })
        .collect();
    Ok(Table {
        header: vec!["config", "median_generations", "final_mse"],
        rows,
    })
}

/// One seed of the neural-guidance comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct NgTrial {
    pub teacher_reward: f64,
    pub warm_start_reward: f64,
    /// `(generations to target or budget, final forest reward)`.
    pub with_ng: (usize, f64),
    pub without_ng: (usize, f64),
}

/// Trains a teacher and distills a forest for one seed, then fine-tunes it
/// with and without guidance towards 90% of the teacher's reward.
pub fn ng_trial(cfg: &RunConfig) -> Result<NgTrial> {
    cfg.validate()?;
    stage_train_teacher(cfg)?;
    stage_distill(cfg)?;
    let teacher = load_teacher(cfg)?.policy;
    let init = super::stages::load_forest(cfg, DISTILLED_FILE)?;
    let t = evaluate_policy(&teacher, &cfg.env, &cfg.extractor, cfg.eval_episodes, cfg.seed, true)?;
    let target = 0.9 * t.mean;
    let budget = cfg.finetune.iterations * init.num_actions();
    let run = |ng: bool| -> Result<(usize, f64, f64)> {
        let ft = crate::pipeline::FinetuneConfig {
            neural_guidance: ng,
            target_reward: Some(target),
            ..cfg.finetune.clone()
        };
        let r = neural_guided_finetune(
            &teacher,
            &init,
            &cfg.env,
            &cfg.extractor,
            &cfg.stage_gp(3),
            &cfg.ppo,
            &ft,
            rng::derive(cfg.seed, &[0xF7]),
        )?;
        Ok((r.generations_to_target.unwrap_or(budget), r.forest_reward, r.warm_start_reward))
    };
    let (g_ng, r_ng, warm) = run(true)?;
    let (g_plain, r_plain, _) = run(false)?;
    Ok(NgTrial {
        teacher_reward: t.mean,
        warm_start_reward: warm,
        with_ng: (g_ng, r_ng),
        without_ng: (g_plain, r_plain),
    })
}

fn ng_on_off(cfg: &RunConfig, seeds: usize) -> Result<Table> {
    let mut trials = Vec::new();
    for k in 0..seeds as u64 {
        let sub = RunConfig {
            seed: rng::derive(cfg.seed, &[0x4E, k]),
            out: cfg.out.join(format!("ng-on-off/seed{k}")),
            ..cfg.clone()
        };
        let t = ng_trial(&sub)?;
        log::info!("ng-on-off seed {k}: {t:?}");
        trials.push(t);
    }
    let pick = |f: &dyn Fn(&NgTrial) -> f64| median(&trials.iter().map(f).collect::<Vec<_>>()).to_string();
    Ok(Table {
        header: vec!["config", "median_generations", "final_reward"],
        rows: vec![
            vec!["with-ng".into(), pick(&|t| t.with_ng.0 as f64), pick(&|t| t.with_ng.1)],
            vec!["without-ng".into(), pick(&|t| t.without_ng.0 as f64), pick(&|t| t.without_ng.1)],
        ],
    })
}

/// The fine-tuned forest when present, else the distilled one, from `cfg.out`.
pub fn trained_forest(cfg: &RunConfig) -> Result<Forest> {
    let file = if cfg.out.join(FINETUNED_FILE).exists() { FINETUNED_FILE } else { DISTILLED_FILE };
    let path: PathBuf = cfg.out.join(file);
    if !path.exists() {
        return Err(Error::MissingArtifact {
            path,
            hint: "run distill (and optionally finetune) first".into(),
        });
    }
    Ok(Forest::load_json(&path)?.1)
}

fn score(cfg: &RunConfig, forest: &Forest, env: &str, ex: &ExtractorConfig) -> Result<EvalResult> {
    evaluate_policy(forest, env, ex, cfg.eval_episodes, cfg.seed, true)
}

pub const DROP_PROBS: [f64; 4] = [0.0, 0.3, 0.5, 0.9];

fn drop_robustness(cfg: &RunConfig) -> Result<Table> {
    let forest = trained_forest(cfg)?;
    let mut rows = Vec::new();
    for p in DROP_PROBS {
        let ex = ExtractorConfig {
            drop_probs: vec![(BALL_CLASS, p)],
            ..cfg.extractor.clone()
        };
        let e = score(cfg, &forest, &cfg.env, &ex)?;
        rows.push(vec!["ball".into(), p.to_string(), cfg.env.clone(), e.mean.to_string(), e.std.to_string()]);
    }
    for p in [0.0, 1.0] {
        let ex = ExtractorConfig {
            mode: ExtractorMode::ConnectedComponents,
            drop_probs: vec![(DECORATION_CLASS, p)],
            ..cfg.extractor.clone()
        };
        let e = score(cfg, &forest, "objectpong-skin2", &ex)?;
        rows.push(vec!["decoration".into(), p.to_string(), "objectpong-skin2".into(), e.mean.to_string(), e.std.to_string()]);
    }
    Ok(Table {
        header: vec!["object", "drop_prob", "env", "mean_reward", "std_reward"],
        rows,
    })
}

fn od_underfit(cfg: &RunConfig) -> Result<Table> {
    let forest = trained_forest(cfg)?;
    let mut rows = Vec::new();
    for pct in [30, 50, 80, 100] {
        let ex = cfg.extractor.clone().with_underfit(pct)?;
        let e = score(cfg, &forest, &cfg.env, &ex)?;
        rows.push(vec![format!("{pct}%"), e.mean.to_string(), e.std.to_string()]);
    }
    Ok(Table {
        header: vec!["detector", "mean_reward", "std_reward"],
        rows,
    })
}

fn transfer_skin(cfg: &RunConfig) -> Result<Table> {
    let forest = trained_forest(cfg)?;
    let ex = ExtractorConfig {
        mode: ExtractorMode::ConnectedComponents,
        ..cfg.extractor.clone()
    };
    let base = score(cfg, &forest, "objectpong", &ex)?;
    let moved = score(cfg, &forest, "objectpong-skin2", &ex)?;
    let retention = if base.mean != 0.0 { moved.mean / base.mean } else { f64::NAN };
    Ok(Table {
        header: vec!["env", "extractor", "mean_reward", "std_reward", "retention"],
        rows: vec![
            vec!["objectpong".into(), "connected_components".into(), base.mean.to_string(), base.std.to_string(), "1".into()],
            vec![
                "objectpong-skin2".into(),
                "connected_components".into(),
                moved.mean.to_string(),
                moved.std.to_string(),
                retention.to_string(),
            ],
        ],
    })
}
