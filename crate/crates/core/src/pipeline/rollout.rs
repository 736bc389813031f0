use std::sync::atomic::{AtomicU64, Ordering};

use crate::error::{Error, Result};
use crate::expr::Action;
use crate::tinynn::{entropy, entropy_grad, log_prob, log_prob_grad, MlpPolicy, SampleGrad};

use super::config::PpoConfig;

/// Log-ratios beyond this magnitude are clamped before exponentiation.
pub const MAX_LOG_RATIO: f64 = 20.0;

#[derive(Debug, Clone, PartialEq)]
pub struct Transition {
    pub state: Vec<f64>,
    pub action: Action,
    pub reward: f64,
    pub next_state: Vec<f64>,
    /// Last step of an episode (terminal or truncated).
    pub done: bool,
    /// Episode ended in a terminal state, so nothing is bootstrapped.
    pub terminal: bool,
    pub logprob_old: f64,
    pub value: f64,
    /// Critic value of `next_state`, used to bootstrap segment ends.
    pub next_value: f64,
    pub advantage: f64,
    pub return_target: f64,
}

#[derive(Debug, Clone, Default)]
pub struct RolloutBuffer {
    pub transitions: Vec<Transition>,
    advantages_ready: bool,
}

impl RolloutBuffer {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn push(&mut self, t: Transition) {
        self.advantages_ready = false;
        self.transitions.push(t);
    }

    pub fn len(&self) -> usize {
        self.transitions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.transitions.is_empty()
    }

    pub fn advantages_ready(&self) -> bool {
        self.advantages_ready
    }

    /// Half-open index ranges of the episode pieces in the buffer.
    pub fn segments(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        let mut start = 0;
        for (i, t) in self.transitions.iter().enumerate() {
            if t.done {
                out.push((start, i + 1));
                start = i + 1;
            }
        }
        if start < self.transitions.len() {
            out.push((start, self.transitions.len()));
        }
        out
    }

    /// Fills `advantage` and `return_target` for every transition.
    ///
    /// For a segment ending at `T`,
    /// `A_t = -V(s_t) + r_t + γ r_{t+1} + ... + γ^{T-t-1} r_{T-1} + γ^{T-t} V(s_T)`,
    /// summed left to right, with `V(s_T) = 0` after a terminal state.
    pub fn compute_advantages(&mut self, gamma: f64) -> Result<()> {
        if self.transitions.is_empty() {
            return Err(Error::InvalidInput("cannot compute advantages of an empty buffer".into()));
        }
        for (start, end) in self.segments() {
            let last = &self.transitions[end - 1];
            let v_end = if last.terminal { 0.0 } else { last.next_value };
            for t in start..end {
                let mut a = -self.transitions[t].value;
                for k in t..end {
                    a += gamma.powi((k - t) as i32) * self.transitions[k].reward;
                }
                a += gamma.powi((end - t) as i32) * v_end;
                let tr = &mut self.transitions[t];
                tr.advantage = a;
                tr.return_target = a + tr.value;
            }
        }
        self.advantages_ready = true;
        Ok(())
    }
}

/// `min(r A, clip(r, 1-ε, 1+ε) A)`.
pub fn clipped_surrogate(ratio: f64, advantage: f64, clip_eps: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - clip_eps, 1.0 + clip_eps);
    (ratio * advantage).min(clipped * advantage)
}

/// Derivative of [`clipped_surrogate`] with respect to the new log-probability.
pub fn clipped_surrogate_grad(ratio: f64, advantage: f64, clip_eps: f64) -> f64 {
    let clipped = ratio.clamp(1.0 - clip_eps, 1.0 + clip_eps);
    if ratio * advantage <= clipped * advantage {
        ratio * advantage
    } else {
        0.0
    }
}

static CLAMPED: AtomicU64 = AtomicU64::new(0);

/// `exp(clamp(logp_new - logp_old))`, warning when the clamp engages
/// (on the 1st, 2nd, 4th, 8th... occurrence).
pub fn ratio(logp_new: f64, logp_old: f64) -> f64 {
    let lr = logp_new - logp_old;
    if !lr.is_finite() || lr.abs() > MAX_LOG_RATIO {
        let n = CLAMPED.fetch_add(1, Ordering::Relaxed) + 1;
        if n.is_power_of_two() {
            log::warn!("log-ratio {lr} clamped to ±{MAX_LOG_RATIO} ({n} clamps so far)");
        }
        let c = if lr.is_nan() { 0.0 } else { lr.clamp(-MAX_LOG_RATIO, MAX_LOG_RATIO) };
        return c.exp();
    }
    lr.exp()
}

/// Parts of the maximized PPO objective, each a batch mean.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PpoObjective {
    pub surrogate: f64,
    pub value_loss: f64,
    pub entropy: f64,
    /// `surrogate - value_coeff * value_loss + entropy_coeff * entropy`.
    pub total: f64,
}

fn batch_advantages(batch: &[&Transition], normalize: bool) -> Vec<f64> {
    let adv: Vec<f64> = batch.iter().map(|t| t.advantage).collect();
    if !normalize || adv.len() < 2 {
        return adv;
    }
    let n = adv.len() as f64;
    let mean = adv.iter().sum::<f64>() / n;
    let std = (adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n).sqrt();
    adv.iter().map(|a| (a - mean) / (std + 1e-8)).collect()
}

/// Evaluates the clipped PPO objective of `policy` on `batch`.
pub fn ppo_objective(batch: &[&Transition], policy: &MlpPolicy, cfg: &PpoConfig) -> Result<PpoObjective> {
    if batch.is_empty() {
        return Err(Error::InvalidInput("empty batch".into()));
    }
    let adv = batch_advantages(batch, cfg.normalize_advantages);
    let (mut s, mut v, mut h) = (0.0, 0.0, 0.0);
    for (t, a) in batch.iter().zip(&adv) {
        let (logits, value) = policy.forward(&t.state)?;
        let r = ratio(log_prob(&logits, &policy.log_std, &t.action), t.logprob_old);
        s += clipped_surrogate(r, *a, cfg.clip_eps);
        v += (value - t.return_target).powi(2);
        h += entropy(&logits, &policy.log_std, policy.action_mode);
    }
    let n = batch.len() as f64;
    let (s, v, h) = (s / n, v / n, h / n);
    Ok(PpoObjective {
        surrogate: s,
        value_loss: v,
        entropy: h,
        total: s - cfg.value_coeff * v + cfg.entropy_coeff * h,
    })
}

/// The maximized PPO objective: clipped surrogate minus the weighted value
/// loss plus the weighted entropy bonus.
pub fn ppo_loss(batch: &[&Transition], policy: &MlpPolicy, cfg: &PpoConfig) -> Result<f64> {
    Ok(ppo_objective(batch, policy, cfg)?.total)
}

/// Loss (negated objective) and its parameter gradient.
pub fn ppo_gradient(batch: &[&Transition], policy: &MlpPolicy, cfg: &PpoConfig) -> Result<(f64, Vec<f64>)> {
    if batch.is_empty() {
        return Err(Error::InvalidInput("empty batch".into()));
    }
    let adv = batch_advantages(batch, cfg.normalize_advantages);
    let n = batch.len() as f64;
    let states: Vec<Vec<f64>> = batch.iter().map(|t| t.state.clone()).collect();
    let mode = policy.action_mode;
    policy.backward(&states, |i, logits, value, log_std| {
        let t = batch[i];
        let lp = log_prob(logits, log_std, &t.action);
        let r = ratio(lp, t.logprob_old);
        let surr = clipped_surrogate(r, adv[i], cfg.clip_eps);
        let d_lp = clipped_surrogate_grad(r, adv[i], cfg.clip_eps);
        let (gl, gs) = log_prob_grad(logits, log_std, &t.action);
        let h = entropy(logits, log_std, mode);
        let (hl, hs) = entropy_grad(logits, log_std, mode);
        let verr = value - t.return_target;
        let ec = cfg.entropy_coeff;
        SampleGrad {
            loss: (-surr + cfg.value_coeff * verr * verr - ec * h) / n,
            d_logits: gl.iter().zip(&hl).map(|(g, e)| (-d_lp * g - ec * e) / n).collect(),
            d_value: 2.0 * cfg.value_coeff * verr / n,
            d_log_std: gs.iter().zip(&hs).map(|(g, e)| (-d_lp * g - ec * e) / n).collect(),
        }
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::ActionMode;
    use crate::rng;

    fn tr(reward: f64, value: f64, done: bool, terminal: bool, next_value: f64) -> Transition {
        Transition {
            state: vec![0.0],
            action: Action::Discrete(0),
            reward,
            next_state: vec![0.0],
            done,
            terminal,
            logprob_old: 0.0,
            value,
            next_value,
            advantage: 0.0,
            return_target: 0.0,
        }
    }

    #[test]
    fn two_step_example() {
        let mut b = RolloutBuffer::new();
        b.push(tr(1.0, 0.5, false, false, 0.0));
        b.push(tr(2.0, 0.0, false, false, 1.0));
        b.compute_advantages(0.9).unwrap();
        let a0 = b.transitions[0].advantage;
        assert!((a0 - 3.11).abs() < 1e-12, "{a0}");
        assert_eq!(b.transitions[0].return_target, a0 + 0.5);
    }

    #[test]
    fn zeros_and_terminal_single_step() {
        let mut b = RolloutBuffer::new();
        for _ in 0..5 {
            b.push(tr(0.0, 0.0, false, false, 0.0));
        }
        b.compute_advantages(0.9).unwrap();
        assert!(b.transitions.iter().all(|t| t.advantage == 0.0));

        let mut b = RolloutBuffer::new();
        b.push(tr(1.0, 0.0, true, true, 123.0));
        b.compute_advantages(0.9).unwrap();
        assert_eq!(b.transitions[0].advantage, 1.0);
        assert!(RolloutBuffer::new().compute_advantages(0.9).is_err());
    }

    #[test]
    fn segments_split_at_episode_ends() {
        let mut b = RolloutBuffer::new();
        b.push(tr(1.0, 0.0, false, false, 0.0));
        b.push(tr(1.0, 0.0, true, false, 5.0));
        b.push(tr(1.0, 0.0, false, false, 7.0));
        assert_eq!(b.segments(), vec![(0, 2), (2, 3)]);
        b.compute_advantages(0.5).unwrap();
        // truncated end bootstraps from the critic
        assert_eq!(b.transitions[1].advantage, 1.0 + 0.5 * 5.0);
        assert_eq!(b.transitions[2].advantage, 1.0 + 0.5 * 7.0);
    }

    #[test]
    fn clip_cases() {
        assert_eq!(clipped_surrogate(1.3, 1.0, 0.2), 1.2);
        assert_eq!(clipped_surrogate(0.5, -1.0, 0.2), -0.8);
        assert_eq!(clipped_surrogate(1.0, 0.7, 0.2), 0.7);
    }

    #[test]
    fn ratio_is_clamped() {
        assert_eq!(ratio(100.0, 0.0), MAX_LOG_RATIO.exp());
        assert_eq!(ratio(0.3, 0.3), 1.0);
    }

    fn sample_batch(policy: &MlpPolicy) -> Vec<Transition> {
        let mut r = rng::stream(4, &[]);
        use rand::Rng;
        (0..12)
            .map(|i| {
                let s: Vec<f64> = (0..3).map(|_| r.random_range(-1.0..1.0)).collect();
                let (logits, v) = policy.forward(&s).unwrap();
                let a = Action::Discrete(i % 2);
                let mut t = tr(0.0, v, false, false, 0.0);
                t.logprob_old = log_prob(&logits, &[], &a) + r.random_range(-0.3..0.3);
                t.state = s;
                t.action = a;
                t.advantage = r.random_range(-2.0..2.0);
                t.return_target = r.random_range(-1.0..1.0);
                t
            })
            .collect()
    }

    #[test]
    fn gradient_matches_objective() {
        let mut r = rng::stream(2, &[]);
        let mut policy = MlpPolicy::new(3, 2, &[5], ActionMode::Discrete, false, &mut r);
        let p: Vec<f64> = policy.params().iter().map(|v| v * 4.0).collect();
        policy.set_params(&p).unwrap();
        let batch = sample_batch(&policy);
        let refs: Vec<&Transition> = batch.iter().collect();
        let cfg = PpoConfig::default();
        let (loss, g) = ppo_gradient(&refs, &policy, &cfg).unwrap();
        let obj = ppo_objective(&refs, &policy, &cfg).unwrap();
        assert!((loss + obj.total).abs() < 1e-12);
        let base = policy.params();
        for k in (0..base.len()).step_by(3) {
            let f = |d: f64| {
                let mut q = policy.clone();
                let mut v = base.clone();
                v[k] += d;
                q.set_params(&v).unwrap();
                -ppo_objective(&refs, &q, &cfg).unwrap().total
            };
            let fd = (f(1e-6) - f(-1e-6)) / 2e-6;
            assert!((fd - g[k]).abs() < 1e-5 * fd.abs().max(1e-2), "{k}: {fd} vs {}", g[k]);
        }
    }

    #[test]
    fn infinite_clip_is_plain_ratio_objective() {
        let mut r = rng::stream(3, &[]);
        let policy = MlpPolicy::new(3, 2, &[5], ActionMode::Discrete, false, &mut r);
        let batch = sample_batch(&policy);
        let refs: Vec<&Transition> = batch.iter().collect();
        let cfg = PpoConfig {
            normalize_advantages: false,
            ..Default::default()
        };
        let mut expect = 0.0;
        for t in &refs {
            let (logits, _) = policy.forward(&t.state).unwrap();
            expect += ratio(log_prob(&logits, &[], &t.action), t.logprob_old) * t.advantage;
        }
        expect /= refs.len() as f64;
        let wide = refs
            .iter()
            .map(|t| {
                let (logits, _) = policy.forward(&t.state).unwrap();
                clipped_surrogate(ratio(log_prob(&logits, &[], &t.action), t.logprob_old), t.advantage, 1e9)
            })
            .sum::<f64>()
            / refs.len() as f64;
        assert!((wide - expect).abs() < 1e-12);
        let zero: Vec<Transition> = batch.iter().cloned().map(|mut t| {
            t.advantage = 0.0;
            t
        }).collect();
        let zrefs: Vec<&Transition> = zero.iter().collect();
        assert_eq!(ppo_objective(&zrefs, &policy, &cfg).unwrap().surrogate, 0.0);
    }
}
