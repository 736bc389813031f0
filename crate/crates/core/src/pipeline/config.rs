use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PpoConfig {
    pub gamma: f64,
    pub clip_eps: f64,
    pub rollout_len: usize,
    pub minibatch_size: usize,
    pub epochs: usize,
    pub total_steps: usize,
    pub lr: f64,
    pub value_coeff: f64,
    pub entropy_coeff: f64,
    pub max_grad_norm: f64,
    pub normalize_advantages: bool,
    pub normalize_obs: bool,
    pub hidden: Vec<usize>,
    /// Updates between evaluations of the deterministic policy.
    pub eval_interval: usize,
    pub eval_episodes: usize,
    /// Stop as soon as an evaluation reaches the env's reward threshold.
    pub stop_at_threshold: bool,
}

impl Default for PpoConfig {
    fn default() -> Self {
        PpoConfig {
            gamma: 0.9,
            clip_eps: 0.2,
            rollout_len: 2048,
            minibatch_size: 64,
            epochs: 10,
            total_steps: 200_000,
            lr: 0.0005,
            value_coeff: 0.5,
            entropy_coeff: 0.01,
            max_grad_norm: 0.5,
            normalize_advantages: true,
            normalize_obs: true,
            hidden: vec![64, 64],
            eval_interval: 5,
            eval_episodes: 20,
            stop_at_threshold: true,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return Err(Error::Config(format!("gamma {} must be in (0, 1]", self.gamma)));
        }
        if !(self.clip_eps > 0.0 && self.clip_eps < 1.0) {
            return Err(Error::Config(format!("clip_eps {} must be in (0, 1)", self.clip_eps)));
        }
        if self.rollout_len == 0 || self.minibatch_size == 0 || self.epochs == 0 || self.total_steps == 0 {
            return Err(Error::Config("rollout_len, minibatch_size, epochs and total_steps must be positive".into()));
        }
        if self.eval_interval == 0 || self.eval_episodes == 0 {
            return Err(Error::Config("eval_interval and eval_episodes must be positive".into()));
        }
        if self.lr.is_nan() || self.lr < 0.0 || self.hidden.contains(&0) {
            return Err(Error::Config("lr must be >= 0 and hidden widths positive".into()));
        }
        Ok(())
    }
}

/// Stage III settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FinetuneConfig {
    /// Outer loops; each runs one GP generation per action.
    pub iterations: usize,
    /// Fixed-seed episodes averaged into a candidate's fitness.
    pub eval_episodes: usize,
    /// Draw a fresh episode seed set every generation instead of reusing one.
    /// The best forest is still judged on the fixed set.
    pub resample_episodes: bool,
    /// Evolve one tree at a time with the teacher filling later slots.
    /// When off, all trees evolve together as one genome.
    pub neural_guidance: bool,
    /// Transitions collected for the SGD strategy's surrogate loss.
    pub buffer_len: usize,
    /// Stop once the all-symbolic forest reaches this reward.
    pub target_reward: Option<f64>,
}

impl Default for FinetuneConfig {
    fn default() -> Self {
        FinetuneConfig {
            iterations: 50,
            eval_episodes: 5,
            resample_episodes: false,
            neural_guidance: true,
            buffer_len: 1000,
            target_reward: None,
        }
    }
}

impl FinetuneConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations == 0 || self.eval_episodes == 0 || self.buffer_len == 0 {
            return Err(Error::Config("iterations, eval_episodes and buffer_len must be positive".into()));
        }
        Ok(())
    }
}

/// Mean deterministic reward a teacher must reach on each built-in env.
pub fn teacher_threshold(env_id: &str) -> Option<f64> {
    match env_id {
        "mountaincar-cont" => Some(90.0),
        "pendulum" => Some(-200.0),
        "cartpole-cont" => Some(1000.0),
        "objectpong" | "objectpong-skin2" => Some(10.0),
        _ => None,
    }
}
