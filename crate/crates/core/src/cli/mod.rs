//! Command-line surface: run configuration, stage orchestration, ablation
//! presets and exports.

pub mod ablate;
mod config;
pub mod stages;

use std::io::Write;
use std::path::PathBuf;

use clap::{CommandFactory, FromArgMatches, Parser, Subcommand, ValueEnum};

pub use config::{config_keys, keys_help, RunConfig, MANIFEST_FILE};
pub use stages::{EvalTarget, StageReport};

use crate::error::Error;

pub const EXIT_OK: i32 = 0;
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_MISSING_ARTIFACT: i32 = 3;
pub const EXIT_BELOW_THRESHOLD: i32 = 4;

#[derive(Debug, Parser)]
#[command(name = "symforest", version, about = "Train, distill and fine-tune symbolic policies")]
pub struct Cli {
    /// TOML run configuration; flags override its values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    #[arg(long, global = true)]
    pub env: Option<String>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// Output directory for artifacts.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Parallel fitness workers; results are identical for any value.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Override any config key, e.g. `--set gp.generations=100`.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum EvalWhich {
    Teacher,
    Distilled,
    Finetuned,
    All,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Stage I: train the PPO teacher.
    TrainTeacher,
    /// Stage II: sample teacher outputs and regress one tree per action.
    Distill,
    /// Stage III: fine-tune the distilled forest against episode reward.
    Finetune {
        /// Evolve all trees together instead of one at a time.
        #[arg(long)]
        no_ng: bool,
    },
    /// Score stored policies on deterministic episodes.
    Eval {
        #[arg(long, value_enum, default_value = "all")]
        policy: EvalWhich,
    },
    /// Run a named comparison and write ablate_<preset>.csv.
    Ablate {
        /// One of: ng-on-off, sgd-on-off, drop-robustness, od-underfit, transfer-skin.
        preset: String,
        /// Independent seeds for the seeded presets.
        #[arg(long)]
        seeds: Option<usize>,
    },
    /// Write DOT graphs and infix strings of a forest.
    Export {
        /// Forest JSON; defaults to the newest forest in --out.
        #[arg(long)]
        forest: Option<PathBuf>,
    },
}

fn sections(name: &str) -> &'static [&'static str] {
    const RUN: [&str; 4] = ["env", "seed", "out", "workers"];
    match name {
        "train-teacher" => &["env", "seed", "out", "workers", "ppo", "extractor"],
        "distill" => &["env", "seed", "out", "workers", "distill_samples", "gp", "extractor"],
        "finetune" => &["env", "seed", "out", "workers", "eval_episodes", "gp", "ppo", "extractor", "finetune"],
        "eval" => &["env", "seed", "out", "eval_episodes", "extractor"],
        "export" => &RUN,
        _ => &[
            "env",
            "seed",
            "out",
            "workers",
            "distill_samples",
            "eval_episodes",
            "gp",
            "ppo",
            "extractor",
            "finetune",
        ],
    }
}

/// The clap command with each subcommand's help listing the keys it reads.
pub fn command() -> clap::Command {
    let mut cmd = Cli::command();
    for name in ["train-teacher", "distill", "finetune", "eval", "ablate", "export"] {
        cmd = cmd.mut_subcommand(name, |c| c.after_long_help(keys_help(sections(name))).after_help(keys_help(sections(name))));
    }
    cmd
}

/// Builds the run configuration from the file (if any) and the flags.
pub fn resolve_config(cli: &Cli) -> crate::Result<RunConfig> {
    let mut cfg = match &cli.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    for o in &cli.overrides {
        cfg.set(o)?;
    }
    if let Some(e) = &cli.env {
        cfg.env = e.clone();
    }
    if let Some(s) = cli.seed {
        cfg.seed = s;
    }
    if let Some(o) = &cli.out {
        cfg.out = o.clone();
    }
    if let Some(w) = cli.workers {
        cfg.workers = w;
    }
    if let Command::Finetune { no_ng: true } = cli.command {
        cfg.finetune.neural_guidance = false;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn execute(cli: &Cli) -> crate::Result<StageReport> {
    let cfg = resolve_config(cli)?;
    cfg.write_manifest()?;
    match &cli.command {
        Command::TrainTeacher => stages::stage_train_teacher(&cfg),
        Command::Distill => stages::stage_distill(&cfg),
        Command::Finetune { .. } => Ok(stages::stage_finetune(&cfg)?.0),
        Command::Eval { policy } => {
            let target = match policy {
                EvalWhich::Teacher => EvalTarget::Teacher,
                EvalWhich::Distilled => EvalTarget::Distilled,
                EvalWhich::Finetuned => EvalTarget::Finetuned,
                EvalWhich::All => EvalTarget::All,
            };
            stages::stage_eval(&cfg, target)
        }
        Command::Ablate { preset, seeds } => {
            let default_seeds = if preset == "sgd-on-off" { 10 } else { 5 };
            let table = ablate::run_preset(&cfg, preset, seeds.unwrap_or(default_seeds))?;
            let path = cfg.out.join(format!("ablate_{preset}.csv"));
            let csv = table.to_csv();
            std::fs::write(&path, &csv).map_err(|e| Error::io(&path, e))?;
            Ok(StageReport {
                artifacts: vec![path],
                summary: csv.trim_end().to_string(),
                below_threshold: false,
            })
        }
        Command::Export { forest } => stages::stage_export(&cfg, forest.as_deref()),
    }
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) | Error::UnknownEnv(_) => EXIT_CONFIG,
        Error::MissingArtifact { .. } => EXIT_MISSING_ARTIFACT,
        _ => EXIT_FAILURE,
    }
}

/// Parses `args` (program name first), runs the subcommand and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let matches = match command().try_get_matches_from(args) {
        Ok(m) => m,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_CONFIG } else { EXIT_OK };
        }
    };
    let cli = match Cli::from_arg_matches(&matches) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return EXIT_CONFIG;
        }
    };
    match execute(&cli) {
        Ok(report) => {
            let mut out = std::io::stdout().lock();
            let _ = writeln!(out, "{}", report.summary);
            for a in &report.artifacts {
                let _ = writeln!(out, "wrote {}", a.display());
            }
            if report.below_threshold {
                eprintln!("warning: reward threshold not reached");
                EXIT_BELOW_THRESHOLD
            } else {
                EXIT_OK
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn help_lists_keys() {
        let mut cmd = command();
        let help = cmd.find_subcommand_mut("train-teacher").unwrap().render_help().to_string();
        assert!(help.contains("ppo.gamma"));
        assert!(help.contains("extractor.m_bar"));
        let help = command().find_subcommand_mut("distill").unwrap().render_help().to_string();
        assert!(help.contains("gp.sgd_lr") && help.contains("distill_samples"));
    }

    #[test]
    fn exit_codes() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().to_str().unwrap();
        assert_eq!(run(["symforest", "distill", "--out", out]), EXIT_MISSING_ARTIFACT);
        assert_eq!(run(["symforest", "eval", "--env", "atari", "--out", out]), EXIT_CONFIG);
        assert_eq!(run(["symforest", "ablate", "bogus", "--out", out]), EXIT_CONFIG);
        assert_eq!(run(["symforest", "export", "--out", out, "--set", "gp.nope=1"]), EXIT_CONFIG);
        assert_eq!(run(["symforest", "frobnicate"]), EXIT_CONFIG);
        assert!(dir.path().join(MANIFEST_FILE).exists());
    }
}
