//! Action distributions over network (or tree) outputs: a categorical over
//! logits for discrete actions and a diagonal Gaussian for continuous ones.

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::Result;
use crate::expr::{log_softmax, select_action, softmax, Action, ActionMode};

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// Draws an action. Continuous actions add Gaussian noise with `exp(log_std)`
/// unless `deterministic`, in which case the mean is returned. Dimensions
/// without a `log_std` entry are left noise-free.
pub fn sample_action<R: Rng + ?Sized>(
    values: &[f64],
    log_std: &[f64],
    mode: ActionMode,
    deterministic: bool,
    rng: &mut R,
) -> Result<Action> {
    match mode {
        ActionMode::Discrete => select_action(values, mode, deterministic, rng),
        ActionMode::Continuous if deterministic => select_action(values, mode, true, rng),
        ActionMode::Continuous => {
            let mean = match select_action(values, mode, true, rng)? {
                Action::Continuous(m) => m,
                Action::Discrete(_) => unreachable!(),
            };
            Ok(Action::Continuous(
                mean.iter()
                    .enumerate()
                    .map(|(i, m)| match log_std.get(i) {
                        Some(s) => m + s.exp() * rng.sample::<f64, _>(StandardNormal),
                        None => *m,
                    })
                    .collect(),
            ))
        }
    }
}

pub fn log_prob(values: &[f64], log_std: &[f64], action: &Action) -> f64 {
    match action {
        Action::Discrete(i) => log_softmax(values)[*i],
        Action::Continuous(a) => values
            .iter()
            .zip(log_std)
            .zip(a)
            .map(|((m, s), a)| {
                let z = (a - m) / s.exp();
                -0.5 * z * z - s - HALF_LN_2PI
            })
            .sum(),
    }
}

/// Gradient of [`log_prob`] with respect to `values` and `log_std`.
pub fn log_prob_grad(values: &[f64], log_std: &[f64], action: &Action) -> (Vec<f64>, Vec<f64>) {
    match action {
        Action::Discrete(i) => {
            let p = softmax(values);
            let dv = p
                .iter()
                .enumerate()
                .map(|(j, pj)| if j == *i { 1.0 - pj } else { -pj })
                .collect();
            (dv, vec![0.0; log_std.len()])
        }
        Action::Continuous(a) => {
            let mut dv = Vec::with_capacity(values.len());
            let mut ds = Vec::with_capacity(values.len());
            for ((m, s), a) in values.iter().zip(log_std).zip(a) {
                let var = (2.0 * s).exp();
                let d = a - m;
                dv.push(d / var);
                ds.push(d * d / var - 1.0);
            }
            (dv, ds)
        }
    }
}

pub fn entropy(values: &[f64], log_std: &[f64], mode: ActionMode) -> f64 {
    match mode {
        ActionMode::Discrete => {
            let p = softmax(values);
            let lp = log_softmax(values);
            -p.iter().zip(&lp).map(|(p, l)| p * l).sum::<f64>()
        }
        ActionMode::Continuous => log_std.iter().map(|s| 0.5 + HALF_LN_2PI + s).sum(),
    }
}

/// Gradient of [`entropy`] with respect to `values` and `log_std`.
pub fn entropy_grad(values: &[f64], log_std: &[f64], mode: ActionMode) -> (Vec<f64>, Vec<f64>) {
    match mode {
        ActionMode::Discrete => {
            // H = -sum p log p ; dH/dz_j = -p_j (log p_j + H)
            let p = softmax(values);
            let lp = log_softmax(values);
            let h = -p.iter().zip(&lp).map(|(p, l)| p * l).sum::<f64>();
            let dv = p.iter().zip(&lp).map(|(p, l)| -p * (l + h)).collect();
            (dv, vec![0.0; log_std.len()])
        }
        ActionMode::Continuous => (vec![0.0; values.len()], vec![1.0; log_std.len()]),
    }
}
