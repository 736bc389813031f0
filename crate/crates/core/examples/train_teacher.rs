//! Trains a PPO teacher and prints its learning curve.
//!
//! `cargo run --release --example train_teacher -- pendulum 100000 0 [gamma]`

use symforest::objects::ExtractorConfig;
use symforest::pipeline::{train_teacher, PpoConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    let args: Vec<String> = std::env::args().skip(1).collect();
    let env_id = args.first().map_or("pendulum", String::as_str);
    let mut cfg = PpoConfig::default();
    if let Some(steps) = args.get(1) {
        cfg.total_steps = steps.parse()?;
    }
    if let Some(g) = args.get(3) {
        cfg.gamma = g.parse()?;
    }
    let seed = args.get(2).map_or(Ok(0), |s| s.parse())?;

    let run = train_teacher(env_id, &cfg, &ExtractorConfig::default(), seed)?;
    for p in &run.curve {
        if let Some(e) = p.eval_reward {
            println!("steps {:>7}  eval {:>9.2}", p.steps, e);
        }
    }
    println!("best {:.2} (threshold reached: {})", run.best_eval, run.reached_threshold);
    Ok(())
}
