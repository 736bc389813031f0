use std::path::Path;

use rand::seq::SliceRandom;

use super::config::{teacher_threshold, PpoConfig};
use super::policy::{evaluate_policy, Observer};
use super::rollout::{ppo_gradient, RolloutBuffer, Transition};
use crate::envs;
use crate::error::{Error, Result};
use crate::objects::ExtractorConfig;
use crate::rng;
use crate::tinynn::{clip_grad_norm, log_prob, sample_action, Adam, MlpPolicy};

#[derive(Debug, Clone, PartialEq)]
pub struct CurvePoint {
    pub update: usize,
    pub steps: usize,
    /// Mean reward of training episodes finished during this rollout.
    pub train_reward: Option<f64>,
    pub eval_reward: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct TeacherRun {
    /// Best evaluated parameters.
    pub policy: MlpPolicy,
    pub optimizer: Adam,
    pub curve: Vec<CurvePoint>,
    pub best_eval: f64,
    pub reached_threshold: bool,
}

/// Seed of the evaluation episodes used to pick the best checkpoint.
pub fn teacher_eval_seed(seed: u64) -> u64 {
    rng::derive(seed, &[0xE4A1])
}

/// PPO with the clipped surrogate and n-step advantages.
pub fn train_teacher(env_id: &str, cfg: &PpoConfig, extractor: &ExtractorConfig, seed: u64) -> Result<TeacherRun> {
    cfg.validate()?;
    let mut env = envs::make(env_id)?;
    let spec = env.spec().clone();
    let mut observer = Observer::for_env(&spec, extractor);
    let nf = observer.num_features(&spec);
    let mut policy = MlpPolicy::new(
        nf,
        spec.num_actions,
        &cfg.hidden,
        spec.action_mode,
        cfg.normalize_obs,
        &mut rng::stream(seed, &[0x7EAC]),
    );
    let mut opt = Adam::new(policy.param_count(), cfg.lr);
    let mut act_rng = rng::stream(seed, &[0xAC71]);
    let mut shuffle_rng = rng::stream(seed, &[0x5AFF]);
    let threshold = teacher_threshold(env_id);

    let mut episode = 0u64;
    let mut ep_seed = rng::derive(seed, &[0xEE, episode]);
    let state = env.reset(ep_seed);
    observer.reset(ep_seed);
    let mut obs = observer.observe(env.as_ref(), &state)?;
    let mut ep_reward = 0.0;

    let mut curve = Vec::new();
    let mut best: Option<(f64, MlpPolicy)> = None;
    let mut steps = 0;
    let mut update = 0;
    while steps < cfg.total_steps {
        let mut buffer = RolloutBuffer::new();
        let mut finished = Vec::new();
        let mut seen = Vec::with_capacity(cfg.rollout_len);
        for i in 0..cfg.rollout_len {
            let (logits, value) = policy.forward(&obs)?;
            let action = sample_action(&logits, &policy.log_std, spec.action_mode, false, &mut act_rng)?;
            let logprob = log_prob(&logits, &policy.log_std, &action);
            let r = env.step(&action)?;
            let next_obs = observer.observe(env.as_ref(), &r.next_state)?;
            let terminal = r.done && !r.truncated;
            let next_value = if !terminal && (r.done || i + 1 == cfg.rollout_len) {
                policy.value(&next_obs)?
            } else {
                0.0
            };
            ep_reward += r.reward;
            seen.push(obs.clone());
            buffer.push(Transition {
                state: std::mem::replace(&mut obs, next_obs),
                action,
                reward: r.reward,
                next_state: Vec::new(),
                done: r.done,
                terminal,
                logprob_old: logprob,
                value,
                next_value,
                advantage: 0.0,
                return_target: 0.0,
            });
            if r.done {
                finished.push(ep_reward);
                ep_reward = 0.0;
                episode += 1;
                ep_seed = rng::derive(seed, &[0xEE, episode]);
                let s = env.reset(ep_seed);
                observer.reset(ep_seed);
                obs = observer.observe(env.as_ref(), &s)?;
            }
        }
        buffer.compute_advantages(cfg.gamma)?;

        let mut idx: Vec<usize> = (0..buffer.len()).collect();
        for _ in 0..cfg.epochs {
            idx.shuffle(&mut shuffle_rng);
            for chunk in idx.chunks(cfg.minibatch_size) {
                let batch: Vec<&Transition> = chunk.iter().map(|&k| &buffer.transitions[k]).collect();
                let (_, mut grad) = ppo_gradient(&batch, &policy, cfg)?;
                if grad.iter().any(|g| !g.is_finite()) {
                    return Err(Error::NonFinite("PPO gradient".into()));
                }
                clip_grad_norm(&mut grad, cfg.max_grad_norm);
                let mut params = policy.params();
                opt.step(&mut params, &grad)?;
                policy.set_params(&params)?;
            }
        }
        if let Some(norm) = policy.obs_norm.as_mut() {
            for o in &seen {
                norm.update(o);
            }
        }
        steps += cfg.rollout_len;
        update += 1;

        let train_reward = (!finished.is_empty()).then(|| finished.iter().sum::<f64>() / finished.len() as f64);
        let mut eval_reward = None;
        if update % cfg.eval_interval == 0 || steps >= cfg.total_steps {
            let e = evaluate_policy(&policy, env_id, extractor, cfg.eval_episodes, teacher_eval_seed(seed), true)?;
            eval_reward = Some(e.mean);
            log::info!("{env_id} update {update} steps {steps} eval {:.2}", e.mean);
            if best.as_ref().is_none_or(|(b, _)| e.mean > *b) {
                best = Some((e.mean, policy.clone()));
            }
        }
        curve.push(CurvePoint {
            update,
            steps,
            train_reward,
            eval_reward,
        });
        if cfg.stop_at_threshold {
            if let (Some(t), Some(e)) = (threshold, eval_reward) {
                if e >= t {
                    break;
                }
            }
        }
    }
    let (best_eval, best_policy) = best.expect("at least one evaluation");
    let reached = threshold.is_none_or(|t| best_eval >= t);
    if !reached {
        log::warn!("{env_id}: teacher best eval {best_eval:.2} below threshold {:?}", threshold);
    }
    Ok(TeacherRun {
        policy: best_policy,
        optimizer: opt,
        curve,
        best_eval,
        reached_threshold: reached,
    })
}

pub const CURVE_CSV_HEADER: &str = "update,steps,train_reward,eval_reward";

pub fn write_curve_csv(path: &Path, curve: &[CurvePoint]) -> Result<()> {
    let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
    let mut out = format!("{CURVE_CSV_HEADER}\n");
    for p in curve {
        out.push_str(&format!(
            "{},{},{},{}\n",
            p.update,
            p.steps,
            opt(p.train_reward),
            opt(p.eval_reward)
        ));
    }
    std::fs::write(path, out).map_err(|e| Error::io(path, e))
}
