use rand::Rng;
use serde::{Deserialize, Serialize};

use super::mlp::Mlp;
use crate::error::{Error, Result};
use crate::expr::ActionMode;

pub const INITIAL_LOG_STD: f64 = -0.5;
const NORM_CLIP: f64 = 10.0;

/// Running mean/variance of observations (Welford), applied before both towers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunningNorm {
    pub count: f64,
    pub mean: Vec<f64>,
    pub m2: Vec<f64>,
}

impl RunningNorm {
    pub fn new(dim: usize) -> Self {
        RunningNorm {
            count: 0.0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
        }
    }

    pub fn update(&mut self, x: &[f64]) {
        self.count += 1.0;
        for ((m, s), v) in self.mean.iter_mut().zip(&mut self.m2).zip(x) {
            let d = v - *m;
            *m += d / self.count;
            *s += d * (v - *m);
        }
    }

    pub fn apply(&self, x: &[f64]) -> Vec<f64> {
        if self.count < 2.0 {
            return x.to_vec();
        }
        x.iter()
            .zip(&self.mean)
            .zip(&self.m2)
            .map(|((v, m), s)| {
                let std = (s / self.count).sqrt().max(1e-8);
                ((v - m) / std).clamp(-NORM_CLIP, NORM_CLIP)
            })
            .collect()
    }
}

/// Actor-critic teacher. The actor and critic are separate towers sharing
/// only the optional observation normalizer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MlpPolicy {
    pub action_mode: ActionMode,
    pub actor: Mlp,
    pub critic: Mlp,
    /// Per-dimension log standard deviation; empty in discrete mode.
    pub log_std: Vec<f64>,
    pub obs_norm: Option<RunningNorm>,
}

/// Per-sample loss contribution and its gradients with respect to the
/// policy outputs, as returned by the closure passed to [`MlpPolicy::backward`].
#[derive(Debug, Clone, Default)]
pub struct SampleGrad {
    pub loss: f64,
    pub d_logits: Vec<f64>,
    pub d_value: f64,
    pub d_log_std: Vec<f64>,
}

impl MlpPolicy {
    /// `hidden` lists the hidden widths of each tower, e.g. `[64, 64]`.
    pub fn new<R: Rng + ?Sized>(
        state_dim: usize,
        num_actions: usize,
        hidden: &[usize],
        action_mode: ActionMode,
        normalize_obs: bool,
        rng: &mut R,
    ) -> Self {
        let mut actor_w = vec![state_dim];
        actor_w.extend_from_slice(hidden);
        let mut critic_w = actor_w.clone();
        actor_w.push(num_actions);
        critic_w.push(1);
        let actor = Mlp::new(&actor_w, 1.0, 0.01, rng);
        let critic = Mlp::new(&critic_w, 1.0, 1.0, rng);
        let log_std = match action_mode {
            ActionMode::Continuous => vec![INITIAL_LOG_STD; num_actions],
            ActionMode::Discrete => Vec::new(),
        };
        MlpPolicy {
            action_mode,
            actor,
            critic,
            log_std,
            obs_norm: normalize_obs.then(|| RunningNorm::new(state_dim)),
        }
    }

    pub fn state_dim(&self) -> usize {
        self.actor.input_dim()
    }

    pub fn num_actions(&self) -> usize {
        self.actor.output_dim()
    }

    pub fn param_count(&self) -> usize {
        self.actor.param_count() + self.critic.param_count() + self.log_std.len()
    }

    fn check(&self, state: &[f64]) -> Result<()> {
        if state.len() != self.state_dim() {
            return Err(Error::DimensionMismatch {
                expected: self.state_dim(),
                got: state.len(),
            });
        }
        Ok(())
    }

    fn prepare(&self, state: &[f64]) -> Vec<f64> {
        match &self.obs_norm {
            Some(n) => n.apply(state),
            None => state.to_vec(),
        }
    }

    /// Returns `(logits or means, value)`.
    pub fn forward(&self, state: &[f64]) -> Result<(Vec<f64>, f64)> {
        self.check(state)?;
        let x = self.prepare(state);
        Ok((self.actor.forward(&x), self.critic.forward(&x)[0]))
    }

    /// Actor output only.
    pub fn logits(&self, state: &[f64]) -> Result<Vec<f64>> {
        self.check(state)?;
        Ok(self.actor.forward(&self.prepare(state)))
    }

    pub fn value(&self, state: &[f64]) -> Result<f64> {
        self.check(state)?;
        Ok(self.critic.forward(&self.prepare(state))[0])
    }

    /// Sums the per-sample losses produced by `loss(i, logits, value, log_std)`
    /// over `states` and returns the total with its parameter gradient,
    /// laid out as in [`MlpPolicy::params`].
    pub fn backward<F>(&self, states: &[Vec<f64>], mut loss: F) -> Result<(f64, Vec<f64>)>
    where
        F: FnMut(usize, &[f64], f64, &[f64]) -> SampleGrad,
    {
        if states.is_empty() {
            return Err(Error::InvalidInput("backward needs a non-empty batch".into()));
        }
        let na = self.actor.param_count();
        let nc = self.critic.param_count();
        let mut grads = vec![0.0; self.param_count()];
        let mut total = 0.0;
        let mut a_acts = Vec::new();
        let mut c_acts = Vec::new();
        for (i, s) in states.iter().enumerate() {
            self.check(s)?;
            let x = self.prepare(s);
            self.actor.forward_cached(&x, &mut a_acts);
            self.critic.forward_cached(&x, &mut c_acts);
            let logits = a_acts.last().expect("output");
            let value = c_acts.last().expect("output")[0];
            let g = loss(i, logits, value, &self.log_std);
            if !g.loss.is_finite() {
                return Err(Error::NonFinite(format!("loss at sample {i}")));
            }
            total += g.loss;
            self.actor.backward(&a_acts, &g.d_logits, &mut grads[..na]);
            if g.d_value != 0.0 {
                self.critic.backward(&c_acts, &[g.d_value], &mut grads[na..na + nc]);
            }
            for (dst, d) in grads[na + nc..].iter_mut().zip(&g.d_log_std) {
                *dst += d;
            }
        }
        Ok((total, grads))
    }

    pub fn params(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.param_count());
        self.actor.write_params(&mut out);
        self.critic.write_params(&mut out);
        out.extend_from_slice(&self.log_std);
        out
    }

    pub fn set_params(&mut self, params: &[f64]) -> Result<()> {
        if params.len() != self.param_count() {
            return Err(Error::DimensionMismatch {
                expected: self.param_count(),
                got: params.len(),
            });
        }
        let mut off = self.actor.read_params(params);
        off += self.critic.read_params(&params[off..]);
        let n = self.log_std.len();
        self.log_std.copy_from_slice(&params[off..off + n]);
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;

    fn small_policy(mode: ActionMode) -> MlpPolicy {
        let mut r = rng::stream(5, &[]);
        let mut p = MlpPolicy::new(3, 2, &[4], mode, false, &mut r);
        // larger head weights so gradients are not dominated by the 0.01 gain
        let params: Vec<f64> = p.params().iter().map(|v| v * 3.0 + 0.05).collect();
        p.set_params(&params).unwrap();
        p
    }

    fn quadratic_loss(_: usize, logits: &[f64], value: f64, log_std: &[f64]) -> SampleGrad {
        let loss = logits.iter().map(|l| l * l).sum::<f64>() + (value - 0.3).powi(2)
            + log_std.iter().map(|s| s * s * s).sum::<f64>();
        SampleGrad {
            loss,
            d_logits: logits.iter().map(|l| 2.0 * l).collect(),
            d_value: 2.0 * (value - 0.3),
            d_log_std: log_std.iter().map(|s| 3.0 * s * s).collect(),
        }
    }

    #[test]
    fn gradients_match_finite_differences() {
        let p = small_policy(ActionMode::Continuous);
        let states = vec![vec![0.5, -1.0, 0.2], vec![-0.3, 0.8, 1.5]];
        let (_, g) = p.backward(&states, quadratic_loss).unwrap();
        let base = p.params();
        let h = 1e-5;
        for k in 0..base.len() {
            let eval = |delta: f64| {
                let mut q = p.clone();
                let mut v = base.clone();
                v[k] += delta;
                q.set_params(&v).unwrap();
                q.backward(&states, quadratic_loss).unwrap().0
            };
            let fd = (eval(h) - eval(-h)) / (2.0 * h);
            let rel = (fd - g[k]).abs() / fd.abs().max(g[k].abs()).max(1e-6);
            assert!(rel < 1e-4, "param {k}: fd {fd} analytic {}", g[k]);
        }
    }

    #[test]
    fn zero_loss_zero_gradient() {
        let p = small_policy(ActionMode::Discrete);
        let (l, g) = p
            .backward(&[vec![1.0, 2.0, 3.0]], |_, logits, _, _| SampleGrad {
                d_logits: vec![0.0; logits.len()],
                ..Default::default()
            })
            .unwrap();
        assert_eq!(l, 0.0);
        assert!(g.iter().all(|v| *v == 0.0));
    }

    #[test]
    fn sum_of_logits_gives_unit_bias_gradient() {
        let mut r = rng::stream(1, &[]);
        let p = MlpPolicy::new(2, 3, &[], ActionMode::Discrete, false, &mut r);
        let (_, g) = p
            .backward(&[vec![0.4, -0.7]], |_, logits, _, _| SampleGrad {
                loss: logits.iter().sum(),
                d_logits: vec![1.0; logits.len()],
                ..Default::default()
            })
            .unwrap();
        // actor layout: 3x2 weights then 3 biases
        assert_eq!(&g[6..9], &[1.0, 1.0, 1.0]);
    }

    #[test]
    fn non_finite_loss_is_an_error() {
        let p = small_policy(ActionMode::Discrete);
        let r = p.backward(&[vec![0.0; 3]], |_, _, _, _| SampleGrad {
            loss: f64::NAN,
            ..Default::default()
        });
        assert!(matches!(r, Err(Error::NonFinite(_))));
    }

    #[test]
    fn forward_checks_dimension() {
        let p = small_policy(ActionMode::Discrete);
        assert!(p.forward(&[1.0]).is_err());
        let (logits, v) = p.forward(&[1.0, 0.0, -1.0]).unwrap();
        assert_eq!(logits.len(), 2);
        assert!(v.is_finite());
    }

    #[test]
    fn running_norm_standardizes() {
        let mut n = RunningNorm::new(1);
        for v in [1.0, 2.0, 3.0, 4.0] {
            n.update(&[v]);
        }
        let z = n.apply(&[2.5]);
        assert!(z[0].abs() < 1e-12);
    }

    #[test]
    fn initial_log_std() {
        let p = small_policy(ActionMode::Continuous);
        let mut r = rng::stream(0, &[]);
        let q = MlpPolicy::new(3, 2, &[8], ActionMode::Continuous, false, &mut r);
        assert_eq!(q.log_std, vec![INITIAL_LOG_STD; 2]);
        assert_eq!(p.param_count(), p.params().len());
    }
}
