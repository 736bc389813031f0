use std::f64::consts::PI;

use rand::Rng;

use super::{Env, EnvSpec, StepResult};
use crate::error::{Error, Result};
use crate::expr::{Action, ActionMode};
use crate::rng::{self, Rng as StreamRng};

fn continuous(action: &Action, dim: usize) -> Result<Vec<f64>> {
    match action {
        Action::Continuous(a) if a.len() == dim => Ok(a.clone()),
        Action::Continuous(a) => Err(Error::DimensionMismatch {
            expected: dim,
            got: a.len(),
        }),
        Action::Discrete(_) => Err(Error::InvalidInput("continuous action expected".into())),
    }
}

fn finish(state: Vec<f64>, reward: f64, terminal: bool, t: usize, horizon: usize) -> StepResult {
    let truncated = !terminal && t >= horizon;
    StepResult {
        next_state: state,
        reward,
        done: terminal || truncated,
        truncated,
    }
}

/// Cart-pole with a continuous force `10 * clip(a, -1, 1)`.
pub struct CartPoleContinuous {
    spec: EnvSpec,
    s: [f64; 4],
    t: usize,
    done: bool,
}

impl CartPoleContinuous {
    pub const GRAVITY: f64 = 9.8;
    pub const MASS_CART: f64 = 1.0;
    pub const MASS_POLE: f64 = 0.1;
    pub const HALF_LENGTH: f64 = 0.5;
    pub const FORCE_MAG: f64 = 10.0;
    pub const DT: f64 = 0.02;
    pub const THETA_LIMIT: f64 = 12.0 * 2.0 * PI / 360.0;
    pub const X_LIMIT: f64 = 2.4;

    pub fn new() -> Self {
        CartPoleContinuous {
            spec: EnvSpec {
                id: "cartpole-cont".into(),
                state_dim: 4,
                action_mode: ActionMode::Continuous,
                num_actions: 1,
                horizon: 1000,
                reward_range: (0.0, 1000.0),
            },
            s: [0.0; 4],
            t: 0,
            done: true,
        }
    }

    /// Places the system in an arbitrary state, e.g. for tests.
    pub fn set_state(&mut self, s: [f64; 4]) {
        self.s = s;
        self.t = 0;
        self.done = false;
    }
}

impl Default for CartPoleContinuous {
    fn default() -> Self {
        Self::new()
    }
}

impl Env for CartPoleContinuous {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        let mut r: StreamRng = rng::stream(seed, &[0xCA27]);
        for v in &mut self.s {
            *v = r.random_range(-0.05..0.05);
        }
        self.t = 0;
        self.done = false;
        self.s.to_vec()
    }

    fn step(&mut self, action: &Action) -> Result<StepResult> {
        if self.done {
            return Err(Error::EpisodeDone);
        }
        let a = continuous(action, 1)?[0];
        let force = Self::FORCE_MAG * a.clamp(-1.0, 1.0);
        let [x, x_dot, th, th_dot] = self.s;
        let total_mass = Self::MASS_CART + Self::MASS_POLE;
        let pml = Self::MASS_POLE * Self::HALF_LENGTH;
        let (sin, cos) = th.sin_cos();
        let temp = (force + pml * th_dot * th_dot * sin) / total_mass;
        let th_acc = (Self::GRAVITY * sin - cos * temp)
            / (Self::HALF_LENGTH * (4.0 / 3.0 - Self::MASS_POLE * cos * cos / total_mass));
        let x_acc = temp - pml * th_acc * cos / total_mass;
        self.s = [
            x + Self::DT * x_dot,
            x_dot + Self::DT * x_acc,
            th + Self::DT * th_dot,
            th_dot + Self::DT * th_acc,
        ];
        self.t += 1;
        let fallen = self.s[0].abs() > Self::X_LIMIT || self.s[2].abs() > Self::THETA_LIMIT;
        let r = finish(self.s.to_vec(), 1.0, fallen, self.t, self.spec.horizon);
        self.done = r.done;
        Ok(r)
    }

    fn observation(&self) -> Vec<f64> {
        self.s.to_vec()
    }
}

/// Continuous mountain car: reach position 0.45 for +100, pay `0.1 a^2` per step.
pub struct MountainCarContinuous {
    spec: EnvSpec,
    pos: f64,
    vel: f64,
    t: usize,
    done: bool,
}

impl MountainCarContinuous {
    pub const MIN_POS: f64 = -1.2;
    pub const MAX_POS: f64 = 0.6;
    pub const MAX_SPEED: f64 = 0.07;
    pub const GOAL_POS: f64 = 0.45;
    pub const POWER: f64 = 0.0015;

    pub fn new() -> Self {
        MountainCarContinuous {
            spec: EnvSpec {
                id: "mountaincar-cont".into(),
                state_dim: 2,
                action_mode: ActionMode::Continuous,
                num_actions: 1,
                horizon: 999,
                reward_range: (-99.9, 100.0),
            },
            pos: 0.0,
            vel: 0.0,
            t: 0,
            done: true,
        }
    }

    pub fn set_state(&mut self, pos: f64, vel: f64) {
        self.pos = pos;
        self.vel = vel;
        self.t = 0;
        self.done = false;
    }
}

impl Default for MountainCarContinuous {
    fn default() -> Self {
        Self::new()
    }
}

impl Env for MountainCarContinuous {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        let mut r: StreamRng = rng::stream(seed, &[0x3C42]);
        self.pos = r.random_range(-0.6..-0.4);
        self.vel = 0.0;
        self.t = 0;
        self.done = false;
        self.observation()
    }

    fn step(&mut self, action: &Action) -> Result<StepResult> {
        if self.done {
            return Err(Error::EpisodeDone);
        }
        let force = continuous(action, 1)?[0].clamp(-1.0, 1.0);
        self.vel += force * Self::POWER - 0.0025 * (3.0 * self.pos).cos();
        self.vel = self.vel.clamp(-Self::MAX_SPEED, Self::MAX_SPEED);
        self.pos += self.vel;
        self.pos = self.pos.clamp(Self::MIN_POS, Self::MAX_POS);
        if self.pos == Self::MIN_POS && self.vel < 0.0 {
            self.vel = 0.0;
        }
        self.t += 1;
        let goal = self.pos >= Self::GOAL_POS && self.vel >= 0.0;
        let mut reward = -0.1 * force * force;
        if goal {
            reward += 100.0;
        }
        let r = finish(self.observation(), reward, goal, self.t, self.spec.horizon);
        self.done = r.done;
        Ok(r)
    }

    fn observation(&self) -> Vec<f64> {
        vec![self.pos, self.vel]
    }
}

/// Torque-limited pendulum swing-up; observation `[cos θ, sin θ, θ̇]`.
pub struct Pendulum {
    spec: EnvSpec,
    th: f64,
    th_dot: f64,
    t: usize,
    done: bool,
}

impl Pendulum {
    pub const G: f64 = 10.0;
    pub const M: f64 = 1.0;
    pub const L: f64 = 1.0;
    pub const DT: f64 = 0.05;
    pub const MAX_SPEED: f64 = 8.0;
    pub const MAX_TORQUE: f64 = 2.0;

    pub fn new() -> Self {
        Pendulum {
            spec: EnvSpec {
                id: "pendulum".into(),
                state_dim: 3,
                action_mode: ActionMode::Continuous,
                num_actions: 1,
                horizon: 200,
                reward_range: (-16.2736044 * 200.0, 0.0),
            },
            th: 0.0,
            th_dot: 0.0,
            t: 0,
            done: true,
        }
    }

    pub fn set_state(&mut self, th: f64, th_dot: f64) {
        self.th = th;
        self.th_dot = th_dot;
        self.t = 0;
        self.done = false;
    }
}

impl Default for Pendulum {
    fn default() -> Self {
        Self::new()
    }
}

fn angle_normalize(x: f64) -> f64 {
    (x + PI).rem_euclid(2.0 * PI) - PI
}

impl Env for Pendulum {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        let mut r: StreamRng = rng::stream(seed, &[0x9E4D]);
        self.th = r.random_range(-PI..PI);
        self.th_dot = r.random_range(-1.0..1.0);
        self.t = 0;
        self.done = false;
        self.observation()
    }

    fn step(&mut self, action: &Action) -> Result<StepResult> {
        if self.done {
            return Err(Error::EpisodeDone);
        }
        let u = continuous(action, 1)?[0].clamp(-Self::MAX_TORQUE, Self::MAX_TORQUE);
        let an = angle_normalize(self.th);
        let cost = an * an + 0.1 * self.th_dot * self.th_dot + 0.001 * u * u;
        let acc = 3.0 * Self::G / (2.0 * Self::L) * self.th.sin() + 3.0 / (Self::M * Self::L * Self::L) * u;
        self.th_dot = (self.th_dot + acc * Self::DT).clamp(-Self::MAX_SPEED, Self::MAX_SPEED);
        self.th += self.th_dot * Self::DT;
        self.t += 1;
        let r = finish(self.observation(), -cost, false, self.t, self.spec.horizon);
        self.done = r.done;
        Ok(r)
    }

    fn observation(&self) -> Vec<f64> {
        vec![self.th.cos(), self.th.sin(), self.th_dot]
    }
}
