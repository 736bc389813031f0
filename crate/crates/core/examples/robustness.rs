//! Scores a trained ObjectPong forest under detector failures and a reskinned
//! game. Needs a forest from `full_pipeline objectpong <dir>`.
//!
//! `cargo run --release --example robustness -- runs/pong`

use symforest::cli::{ablate, RunConfig};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let out = std::env::args().nth(1).unwrap_or_else(|| "runs/pong".into());
    let cfg = RunConfig {
        env: "objectpong".into(),
        out: out.into(),
        ..Default::default()
    };
    for preset in ["drop-robustness", "od-underfit", "transfer-skin"] {
        println!("# {preset}\n{}", ablate::run_preset(&cfg, preset, 1)?.to_csv());
    }
    Ok(())
}
