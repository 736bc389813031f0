//! Built-in environments: three classic-control tasks and ObjectPong.

mod classic;
mod pong;
mod scene;

use std::path::Path;

use serde::Serialize;

pub use classic::{CartPoleContinuous, MountainCarContinuous, Pendulum};
pub use pong::{actions, ObjectPong, Skin, BALL_CLASS, DECORATION_CLASS, FRAME_SIZE, PADDLE_CLASS};
pub use scene::{Frame, ObjectSet, SceneObject};

use crate::error::{Error, Result};
use crate::expr::{Action, ActionMode};

pub const ENV_IDS: [&str; 5] = ["cartpole-cont", "mountaincar-cont", "pendulum", "objectpong", "objectpong-skin2"];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EnvSpec {
    pub id: String,
    pub state_dim: usize,
    pub action_mode: ActionMode,
    pub num_actions: usize,
    pub horizon: usize,
    pub reward_range: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub next_state: Vec<f64>,
    pub reward: f64,
    /// Episode over, either by termination or by reaching the horizon.
    pub done: bool,
    /// `done` was caused by the horizon rather than a terminal state.
    pub truncated: bool,
}

pub trait Env: Send {
    fn spec(&self) -> &EnvSpec;

    /// Starts a new episode; identical seeds give identical episodes.
    fn reset(&mut self, seed: u64) -> Vec<f64>;

    /// Errors with [`Error::EpisodeDone`] once the episode has ended.
    fn step(&mut self, action: &Action) -> Result<StepResult>;

    fn observation(&self) -> Vec<f64>;

    fn render_frame(&self) -> Option<Frame> {
        None
    }

    fn oracle_objects(&self) -> Option<ObjectSet> {
        None
    }
}

pub fn make(id: &str) -> Result<Box<dyn Env>> {
    Ok(match id {
        "cartpole-cont" => Box::new(CartPoleContinuous::new()),
        "mountaincar-cont" => Box::new(MountainCarContinuous::new()),
        "pendulum" => Box::new(Pendulum::new()),
        "objectpong" => Box::new(ObjectPong::new(Skin::Base)),
        "objectpong-skin2" => Box::new(ObjectPong::new(Skin::Alt)),
        other => return Err(Error::UnknownEnv(other.to_string())),
    })
}

/// One row of a trajectory dump.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryRow {
    pub t: usize,
    pub state: Vec<f64>,
    pub action: Vec<f64>,
    pub reward: f64,
    pub done: bool,
}

/// Writes `t,s0..,a0..,reward,done`.
pub fn write_trajectory_csv(path: &Path, rows: &[TrajectoryRow]) -> Result<()> {
    let (ns, na) = rows.first().map_or((0, 0), |r| (r.state.len(), r.action.len()));
    let mut cols = vec!["t".to_string()];
    cols.extend((0..ns).map(|i| format!("s{i}")));
    cols.extend((0..na).map(|i| format!("a{i}")));
    cols.push("reward".into());
    cols.push("done".into());
    let mut out = cols.join(",");
    out.push('\n');
    for r in rows {
        let mut fields = vec![r.t.to_string()];
        fields.extend(r.state.iter().chain(&r.action).map(|v| v.to_string()));
        fields.push(r.reward.to_string());
        fields.push((r.done as u8).to_string());
        out.push_str(&fields.join(","));
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}
