use std::path::{Path, PathBuf};

use super::config::RunConfig;
use crate::error::{Error, Result};
use crate::expr::{render, render_infix, simplify, to_dot, Forest};
use crate::gp::{write_best_log, write_generation_csv, GENERATION_CSV_HEADER};
use crate::objects::{read_dataset_csv, write_dataset_csv, ExtractorConfig};
use crate::pipeline::{
    collect_distill_dataset, distill_forest, evaluate_policy, neural_guided_finetune, teacher_threshold,
    train_teacher, write_curve_csv, write_stage3_csv, EvalResult, FinetuneResult, Policy,
};
use crate::rng;
use crate::tinynn::Checkpoint;

pub const TEACHER_FILE: &str = "teacher.json";
pub const CURVE_FILE: &str = "stage1_curve.csv";
pub const DATASET_FILE: &str = "distill_dataset.csv";
pub const DISTILLED_FILE: &str = "forest_distilled.json";
pub const STAGE2_FILE: &str = "stage2_gen.csv";
pub const FINETUNED_FILE: &str = "forest_finetuned.json";
pub const STAGE3_FILE: &str = "stage3_gen.csv";
pub const EVAL_FILE: &str = "eval.csv";
pub const TIMING_FILE: &str = "timing.log";

/// What a stage produced and whether its reward target was met.
#[derive(Debug, Clone)]
pub struct StageReport {
    pub artifacts: Vec<PathBuf>,
    pub summary: String,
    /// Set when a reward threshold was missed; maps to exit code 4.
    pub below_threshold: bool,
}

fn require(path: PathBuf, hint: &str) -> Result<PathBuf> {
    if path.exists() {
        Ok(path)
    } else {
        Err(Error::MissingArtifact {
            path,
            hint: hint.into(),
        })
    }
}

fn log_timing(cfg: &RunConfig, stage: &str, seconds: f64) {
    use std::io::Write;
    let path = cfg.out.join(TIMING_FILE);
    if let Ok(mut f) = std::fs::OpenOptions::new().create(true).append(true).open(path) {
        let _ = writeln!(f, "{stage} {seconds:.3}s");
    }
}

pub fn load_teacher(cfg: &RunConfig) -> Result<Checkpoint> {
    let ck = Checkpoint::load(&cfg.out.join(TEACHER_FILE))?;
    if ck.env != cfg.env {
        return Err(Error::Config(format!("teacher was trained on {}, config env is {}", ck.env, cfg.env)));
    }
    Ok(ck)
}

pub fn load_forest(cfg: &RunConfig, file: &str) -> Result<Forest> {
    let hint = if file == FINETUNED_FILE { "run finetune first" } else { "run distill first" };
    let (env, forest) = Forest::load_json(&require(cfg.out.join(file), hint)?)?;
    if env != cfg.env {
        return Err(Error::Config(format!("{file} belongs to {env}, config env is {}", cfg.env)));
    }
    Ok(forest)
}

pub fn stage_train_teacher(cfg: &RunConfig) -> Result<StageReport> {
    let started = std::time::Instant::now();
    let run = train_teacher(&cfg.env, &cfg.ppo, &cfg.extractor, cfg.seed)?;
    let mut ck = Checkpoint::new(&cfg.env, run.policy, Some(run.optimizer));
    ck.below_threshold = !run.reached_threshold;
    let ck_path = cfg.out.join(TEACHER_FILE);
    ck.save(&ck_path)?;
    let curve_path = cfg.out.join(CURVE_FILE);
    write_curve_csv(&curve_path, &run.curve)?;
    log_timing(cfg, "train-teacher", started.elapsed().as_secs_f64());
    Ok(StageReport {
        artifacts: vec![ck_path, curve_path],
        summary: format!(
            "teacher on {}: best eval {:.2} after {} updates (threshold {:?})",
            cfg.env,
            run.best_eval,
            run.curve.len(),
            teacher_threshold(&cfg.env)
        ),
        below_threshold: !run.reached_threshold,
    })
}

pub fn stage_distill(cfg: &RunConfig) -> Result<StageReport> {
    let teacher = load_teacher(cfg)?.policy;
    let started = std::time::Instant::now();
    let data = collect_distill_dataset(&teacher, &cfg.env, &cfg.extractor, cfg.distill_samples, rng::derive(cfg.seed, &[0xD1]))?;
    let data_path = cfg.out.join(DATASET_FILE);
    write_dataset_csv(&data_path, &data.x, &data.y)?;
    let (forest, results) = distill_forest(&data.x, &data.y, &cfg.stage_gp(2), teacher.action_mode)?;
    let forest_path = cfg.out.join(DISTILLED_FILE);
    forest.save_json(&cfg.env, &forest_path)?;

    let mut artifacts = vec![data_path, forest_path];
    let mut combined = format!("action,{GENERATION_CSV_HEADER}\n");
    for (i, r) in results.iter().enumerate() {
        let per = cfg.out.join(format!("stage2_gen_a{i}.csv"));
        write_generation_csv(&per, &r.history)?;
        for line in std::fs::read_to_string(&per).map_err(|e| Error::io(&per, e))?.lines().skip(1) {
            combined.push_str(&format!("{i},{line}\n"));
        }
        let best = cfg.out.join(format!("stage2_best_a{i}.txt"));
        write_best_log(&best, &r.best_exprs)?;
        artifacts.extend([per, best]);
    }
    let stage2 = cfg.out.join(STAGE2_FILE);
    std::fs::write(&stage2, combined).map_err(|e| Error::io(&stage2, e))?;
    artifacts.push(stage2);
    log_timing(cfg, "distill", started.elapsed().as_secs_f64());

    let mses: Vec<String> = results.iter().map(|r| format!("{:.3e}", r.mse)).collect();
    Ok(StageReport {
        artifacts,
        summary: format!("distilled {} trees, MSE per action [{}]", results.len(), mses.join(", ")),
        below_threshold: false,
    })
}

pub fn stage_finetune(cfg: &RunConfig) -> Result<(StageReport, FinetuneResult)> {
    let teacher = load_teacher(cfg)?.policy;
    let init = load_forest(cfg, DISTILLED_FILE)?;
    let started = std::time::Instant::now();
    let result = neural_guided_finetune(
        &teacher,
        &init,
        &cfg.env,
        &cfg.extractor,
        &cfg.stage_gp(3),
        &cfg.ppo,
        &cfg.finetune,
        rng::derive(cfg.seed, &[0xF7]),
    )?;
    let forest_path = cfg.out.join(FINETUNED_FILE);
    result.forest.save_json(&cfg.env, &forest_path)?;
    let csv = cfg.out.join(STAGE3_FILE);
    write_stage3_csv(&csv, &result.history)?;
    log_timing(cfg, "finetune", started.elapsed().as_secs_f64());

    let eval = evaluate_policy(&result.forest, &cfg.env, &cfg.extractor, cfg.eval_episodes, cfg.seed, true)?;
    let below = teacher_threshold(&cfg.env).is_some_and(|t| eval.mean < t);
    let report = StageReport {
        artifacts: vec![forest_path, csv],
        summary: format!(
            "fine-tuned forest: fitness {:.2} (warm start {:.2}), eval {:.2} ± {:.2} over {} episodes",
            result.forest_reward, result.warm_start_reward, eval.mean, eval.std, cfg.eval_episodes
        ),
        below_threshold: below,
    };
    Ok((report, result))
}

/// Which stored policies `eval` should score.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EvalTarget {
    Teacher,
    Distilled,
    Finetuned,
    /// Every artifact present in the output directory.
    All,
}

pub fn evaluate_artifacts(cfg: &RunConfig, target: EvalTarget) -> Result<Vec<(&'static str, EvalResult)>> {
    let mut rows = Vec::new();
    let want = |t: EvalTarget| target == t || target == EvalTarget::All;
    let score = |p: &dyn Policy, ex: &ExtractorConfig| evaluate_policy(p, &cfg.env, ex, cfg.eval_episodes, cfg.seed, true);
    let present = |f: &str| target != EvalTarget::All || cfg.out.join(f).exists();
    if want(EvalTarget::Teacher) && present(TEACHER_FILE) {
        rows.push(("teacher", score(&load_teacher(cfg)?.policy, &cfg.extractor)?));
    }
    if want(EvalTarget::Distilled) && present(DISTILLED_FILE) {
        rows.push(("distilled", score(&load_forest(cfg, DISTILLED_FILE)?, &cfg.extractor)?));
    }
    if want(EvalTarget::Finetuned) && present(FINETUNED_FILE) {
        rows.push(("finetuned", score(&load_forest(cfg, FINETUNED_FILE)?, &cfg.extractor)?));
    }
    if rows.is_empty() {
        return Err(Error::MissingArtifact {
            path: cfg.out.join(TEACHER_FILE),
            hint: "no teacher or forest found; run train-teacher first".into(),
        });
    }
    Ok(rows)
}

pub fn stage_eval(cfg: &RunConfig, target: EvalTarget) -> Result<StageReport> {
    let rows = evaluate_artifacts(cfg, target)?;
    let mut csv = String::from("policy,mean,std,min,max,episodes\n");
    let mut summary = String::new();
    let threshold = teacher_threshold(&cfg.env);
    let mut below = false;
    for (name, e) in &rows {
        let min = e.rewards.iter().copied().fold(f64::INFINITY, f64::min);
        let max = e.rewards.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        csv.push_str(&format!("{name},{},{},{min},{max},{}\n", e.mean, e.std, e.rewards.len()));
        summary.push_str(&format!("{name:>10}: {:>9.2} ± {:<8.2} [{min:.2}, {max:.2}]\n", e.mean, e.std));
        below |= threshold.is_some_and(|t| e.mean < t);
    }
    let path = cfg.out.join(EVAL_FILE);
    std::fs::write(&path, csv).map_err(|e| Error::io(&path, e))?;
    Ok(StageReport {
        artifacts: vec![path],
        summary: summary.trim_end().to_string(),
        below_threshold: below,
    })
}

fn feature_names(cfg: &RunConfig, nf: usize) -> Vec<String> {
    let classic: &[&str] = match cfg.env.as_str() {
        "cartpole-cont" => &["x", "x_dot", "theta", "theta_dot"],
        "mountaincar-cont" => &["position", "velocity"],
        "pendulum" => &["cos_theta", "sin_theta", "theta_dot"],
        _ => &[],
    };
    if classic.len() == nf {
        return classic.iter().map(|s| s.to_string()).collect();
    }
    const FIELDS: [&str; 4] = ["x", "y", "dx", "dy"];
    (0..nf).map(|k| format!("o{}_{}", k / 4, FIELDS[k % 4])).collect()
}

/// Writes one DOT file per tree plus a text file of infix and s-expression forms.
pub fn stage_export(cfg: &RunConfig, forest_file: Option<&Path>) -> Result<StageReport> {
    let (stem, forest) = match forest_file {
        Some(p) => {
            let (_, f) = Forest::load_json(&require(p.to_path_buf(), "pass an existing forest JSON")?)?;
            (p.file_stem().and_then(|s| s.to_str()).unwrap_or("forest").to_string(), f)
        }
        None if cfg.out.join(FINETUNED_FILE).exists() => ("forest_finetuned".into(), load_forest(cfg, FINETUNED_FILE)?),
        None => ("forest_distilled".into(), load_forest(cfg, DISTILLED_FILE)?),
    };
    let names = feature_names(cfg, forest.num_features());
    let mut artifacts = Vec::new();
    let mut text = String::new();
    for (i, tree) in forest.trees.iter().enumerate() {
        let dot = cfg.out.join(format!("{stem}_a{i}.dot"));
        std::fs::write(&dot, to_dot(tree, &format!("action_{i}"))).map_err(|e| Error::io(&dot, e))?;
        artifacts.push(dot);
        let simple = simplify(tree);
        text.push_str(&format!(
            "action {i}: {}\n  simplified: {}\n  sexpr: {}\n",
            render_infix(tree, Some(&names)),
            render_infix(&simple, Some(&names)),
            render(tree)
        ));
    }
    let txt = cfg.out.join(format!("{stem}_infix.txt"));
    std::fs::write(&txt, &text).map_err(|e| Error::io(&txt, e))?;
    artifacts.push(txt);
    Ok(StageReport {
        artifacts,
        summary: text.trim_end().to_string(),
        below_threshold: false,
    })
}

/// Reads back the distillation dataset written by [`stage_distill`].
pub fn load_dataset(cfg: &RunConfig) -> Result<(Vec<Vec<f64>>, Vec<Vec<f64>>)> {
    read_dataset_csv(&cfg.out.join(DATASET_FILE))
}
