//! Teacher training, distillation, fine-tuning and evaluation on one env,
//! writing every artifact under the output directory.
//!
//! `cargo run --release --example full_pipeline -- cartpole-cont runs/cartpole 0`

use symforest::cli::{stages, EvalTarget, RunConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args: Vec<String> = std::env::args().skip(1).collect();
    let cfg = RunConfig {
        env: args.first().cloned().unwrap_or_else(|| "cartpole-cont".into()),
        out: args.get(1).map_or_else(|| "runs/example".into(), Into::into),
        seed: args.get(2).map_or(Ok(0), |s| s.parse())?,
        ..Default::default()
    };
    cfg.validate()?;
    cfg.write_manifest()?;

    println!("{}", stages::stage_train_teacher(&cfg)?.summary);
    println!("{}", stages::stage_distill(&cfg)?.summary);
    println!("{}", stages::stage_finetune(&cfg)?.0.summary);
    println!("{}", stages::stage_eval(&cfg, EvalTarget::All)?.summary);
    println!("{}", stages::stage_export(&cfg, None)?.summary);
    Ok(())
}
