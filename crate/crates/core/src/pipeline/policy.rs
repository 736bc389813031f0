use crate::envs::{self, Env, EnvSpec};
use crate::error::{Error, Result};
use crate::expr::{Action, ActionMode, ExprTree, Forest};
use crate::objects::{ExtractorConfig, FeaturePipeline};
use crate::rng;
use crate::tinynn::{sample_action, MlpPolicy};

/// Turns the env's state into the vector a policy consumes: the raw state for
/// classic control, object features for envs that expose objects.
#[derive(Debug, Clone)]
pub enum Observer {
    Raw,
    Objects(FeaturePipeline),
}

impl Observer {
    pub fn for_env(spec: &EnvSpec, extractor: &ExtractorConfig) -> Self {
        if spec.id.starts_with("objectpong") {
            Observer::Objects(FeaturePipeline::new(extractor.clone()))
        } else {
            Observer::Raw
        }
    }

    pub fn num_features(&self, spec: &EnvSpec) -> usize {
        match self {
            Observer::Raw => spec.state_dim,
            Observer::Objects(p) => p.cfg.num_features(),
        }
    }

    pub fn reset(&mut self, seed: u64) {
        if let Observer::Objects(p) = self {
            p.reset(seed);
        }
    }

    pub fn observe(&mut self, env: &dyn Env, state: &[f64]) -> Result<Vec<f64>> {
        match self {
            Observer::Raw => Ok(state.to_vec()),
            Observer::Objects(p) => Ok(p.observe(env)?.values),
        }
    }
}

/// Anything that maps an observation to per-action outputs.
pub trait Policy: Sync {
    fn action_mode(&self) -> ActionMode;
    fn num_actions(&self) -> usize;
    fn num_features(&self) -> usize;
    /// Logits (discrete) or action means (continuous).
    fn outputs(&self, obs: &[f64]) -> Result<Vec<f64>>;

    fn log_std(&self) -> &[f64] {
        &[]
    }

    fn act(&self, obs: &[f64], deterministic: bool, rng: &mut rng::Rng) -> Result<Action> {
        sample_action(&self.outputs(obs)?, self.log_std(), self.action_mode(), deterministic, rng)
    }
}

impl Policy for MlpPolicy {
    fn action_mode(&self) -> ActionMode {
        self.action_mode
    }

    fn num_actions(&self) -> usize {
        MlpPolicy::num_actions(self)
    }

    fn num_features(&self) -> usize {
        self.state_dim()
    }

    fn outputs(&self, obs: &[f64]) -> Result<Vec<f64>> {
        self.logits(obs)
    }

    fn log_std(&self) -> &[f64] {
        &self.log_std
    }
}

impl Policy for Forest {
    fn action_mode(&self) -> ActionMode {
        self.action_mode
    }

    fn num_actions(&self) -> usize {
        Forest::num_actions(self)
    }

    fn num_features(&self) -> usize {
        Forest::num_features(self)
    }

    fn outputs(&self, obs: &[f64]) -> Result<Vec<f64>> {
        self.eval(obs)
    }
}

/// Teacher outputs with some slots overridden by symbolic trees.
#[derive(Debug, Clone)]
pub struct MixedPolicy {
    pub teacher: MlpPolicy,
    pub slots: Vec<Option<ExprTree>>,
}

impl MixedPolicy {
    pub fn new(teacher: MlpPolicy) -> Self {
        let n = teacher.num_actions();
        MixedPolicy {
            teacher,
            slots: vec![None; n],
        }
    }

    pub fn set_slot(&mut self, i: usize, tree: Option<ExprTree>) -> Result<()> {
        if i >= self.slots.len() {
            return Err(Error::InvalidInput(format!("slot {i} out of range")));
        }
        if let Some(t) = &tree {
            if t.num_features != self.teacher.state_dim() {
                return Err(Error::DimensionMismatch {
                    expected: self.teacher.state_dim(),
                    got: t.num_features,
                });
            }
        }
        self.slots[i] = tree;
        Ok(())
    }

    pub fn symbolic_slots(&self) -> usize {
        self.slots.iter().filter(|s| s.is_some()).count()
    }
}

impl Policy for MixedPolicy {
    fn action_mode(&self) -> ActionMode {
        self.teacher.action_mode
    }

    fn num_actions(&self) -> usize {
        self.slots.len()
    }

    fn num_features(&self) -> usize {
        self.teacher.state_dim()
    }

    fn outputs(&self, obs: &[f64]) -> Result<Vec<f64>> {
        let mut out = if self.slots.iter().all(Option::is_some) {
            vec![0.0; self.slots.len()]
        } else {
            self.teacher.logits(obs)?
        };
        for (o, slot) in out.iter_mut().zip(&self.slots) {
            if let Some(t) = slot {
                *o = t.eval(obs)?;
            }
        }
        Ok(out)
    }

    fn log_std(&self) -> &[f64] {
        &self.teacher.log_std
    }
}

/// One action from the mixed policy; with no symbolic slots this is exactly
/// the teacher's action for the same random stream.
pub fn mixed_act(mp: &MixedPolicy, obs: &[f64], rng: &mut rng::Rng) -> Result<Action> {
    mp.act(obs, false, rng)
}

fn check_compatible(policy: &dyn Policy, spec: &EnvSpec, observer: &Observer) -> Result<()> {
    if policy.num_actions() != spec.num_actions || policy.action_mode() != spec.action_mode {
        return Err(Error::InvalidInput(format!(
            "policy with {} {:?} outputs does not fit env {} ({} {:?} actions)",
            policy.num_actions(),
            policy.action_mode(),
            spec.id,
            spec.num_actions,
            spec.action_mode
        )));
    }
    let nf = observer.num_features(spec);
    if policy.num_features() != nf {
        return Err(Error::DimensionMismatch {
            expected: nf,
            got: policy.num_features(),
        });
    }
    Ok(())
}

/// Plays one episode and returns its undiscounted reward.
pub fn run_episode(
    env: &mut dyn Env,
    observer: &mut Observer,
    policy: &dyn Policy,
    seed: u64,
    deterministic: bool,
) -> Result<f64> {
    let mut rng = rng::stream(seed, &[0xAC7]);
    let state = env.reset(seed);
    observer.reset(seed);
    let mut obs = observer.observe(env, &state)?;
    let mut total = 0.0;
    loop {
        let a = policy.act(&obs, deterministic, &mut rng)?;
        let r = env.step(&a)?;
        total += r.reward;
        if r.done {
            return Ok(total);
        }
        obs = observer.observe(env, &r.next_state)?;
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalResult {
    pub mean: f64,
    pub std: f64,
    pub rewards: Vec<f64>,
}

impl EvalResult {
    pub fn from_rewards(rewards: Vec<f64>) -> Self {
        let n = rewards.len().max(1) as f64;
        let mean = rewards.iter().sum::<f64>() / n;
        let std = (rewards.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n).sqrt();
        EvalResult { mean, std, rewards }
    }
}

/// Seed of the `k`-th evaluation episode under `seed`.
pub fn episode_seed(seed: u64, k: usize) -> u64 {
    rng::derive(seed, &[0xE7A1, k as u64])
}

pub fn evaluate_policy(
    policy: &dyn Policy,
    env_id: &str,
    extractor: &ExtractorConfig,
    episodes: usize,
    seed: u64,
    deterministic: bool,
) -> Result<EvalResult> {
    if episodes == 0 {
        return Err(Error::InvalidInput("episodes must be at least 1".into()));
    }
    let mut env = envs::make(env_id)?;
    let mut observer = Observer::for_env(env.spec(), extractor);
    check_compatible(policy, env.spec(), &observer)?;
    let rewards = (0..episodes)
        .map(|k| run_episode(env.as_mut(), &mut observer, policy, episode_seed(seed, k), deterministic))
        .collect::<Result<Vec<_>>>()?;
    Ok(EvalResult::from_rewards(rewards))
}

/// Records the actions `policy` takes over one episode, for comparisons.
pub fn action_trace(policy: &dyn Policy, env_id: &str, extractor: &ExtractorConfig, seed: u64) -> Result<Vec<Action>> {
    let mut env = envs::make(env_id)?;
    let mut observer = Observer::for_env(env.spec(), extractor);
    check_compatible(policy, env.spec(), &observer)?;
    let mut rng = rng::stream(seed, &[0xAC7]);
    let state = env.reset(seed);
    observer.reset(seed);
    let mut obs = observer.observe(env.as_ref(), &state)?;
    let mut out = Vec::new();
    loop {
        let a = policy.act(&obs, false, &mut rng)?;
        let r = env.step(&a)?;
        out.push(a);
        if r.done {
            return Ok(out);
        }
        obs = observer.observe(env.as_ref(), &r.next_state)?;
    }
}
