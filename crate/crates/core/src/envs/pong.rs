use rand::Rng;

use super::scene::{Frame, ObjectSet, SceneObject};
use super::{Env, EnvSpec, StepResult};
use crate::error::{Error, Result};
use crate::expr::{Action, ActionMode};
use crate::rng::{self, Rng as StreamRng};

pub const FRAME_SIZE: usize = 64;
pub const PADDLE_CLASS: u32 = 0;
pub const BALL_CLASS: u32 = 1;
pub const DECORATION_CLASS: u32 = 2;

const PADDLE_X: f64 = 58.0;
const PADDLE_W: usize = 2;
const PADDLE_H: usize = 10;
const PADDLE_SPEED: f64 = 3.0;
const BALL_SIZE: usize = 3;
const BALL_SPEED: f64 = 2.0;
/// Right edge of the ball bounces here, leaving a gap before the paddle.
const HIT_PLANE: f64 = PADDLE_X - 2.0;
const HIDDEN_STEPS: usize = 12;
const SERVE_X: f64 = 6.0;
const MAX_SERVE_ANGLE: f64 = 40.0 * std::f64::consts::PI / 180.0;
const NET_X: i64 = 30;
const NET_PERIOD: usize = 6;

/// Visual style. Geometry and dynamics are identical across skins.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Skin {
    Base,
    /// Shifted intensities plus a dashed net of small static decorations.
    Alt,
}

impl Skin {
    pub fn paddle_intensity(self) -> f64 {
        match self {
            Skin::Base => 0.6,
            Skin::Alt => 0.75,
        }
    }

    pub fn ball_intensity(self) -> f64 {
        match self {
            Skin::Base => 1.0,
            Skin::Alt => 0.9,
        }
    }

    pub fn decoration_intensity(self) -> f64 {
        0.35
    }
}

pub mod actions {
    pub const UP: usize = 0;
    pub const NOOP: usize = 1;
    pub const DOWN: usize = 2;
}

/// Single-player pong: the ball bounces off the top, bottom and left walls and
/// the agent moves a paddle on the right edge. +1 per return, -1 per miss.
pub struct ObjectPong {
    spec: EnvSpec,
    skin: Skin,
    rng: StreamRng,
    ball: [f64; 2],
    vel: [f64; 2],
    paddle_y: f64,
    hidden: usize,
    t: usize,
    done: bool,
    hits: usize,
    misses: usize,
}

impl ObjectPong {
    pub fn new(skin: Skin) -> Self {
        let id = match skin {
            Skin::Base => "objectpong",
            Skin::Alt => "objectpong-skin2",
        };
        ObjectPong {
            spec: EnvSpec {
                id: id.into(),
                state_dim: 6,
                action_mode: ActionMode::Discrete,
                num_actions: 3,
                horizon: 1000,
                reward_range: (-1000.0, 1000.0),
            },
            skin,
            rng: rng::stream(0, &[]),
            ball: [0.0; 2],
            vel: [0.0; 2],
            paddle_y: 0.0,
            hidden: 0,
            t: 0,
            done: true,
            hits: 0,
            misses: 0,
        }
    }

    pub fn skin(&self) -> Skin {
        self.skin
    }

    pub fn hits(&self) -> usize {
        self.hits
    }

    pub fn misses(&self) -> usize {
        self.misses
    }

    pub fn ball_visible(&self) -> bool {
        self.hidden == 0
    }

    /// Hides the ball for `steps` steps, as between points.
    pub fn hide_ball(&mut self, steps: usize) {
        self.hidden = steps;
    }

    fn serve(&mut self) {
        let angle = self.rng.random_range(-MAX_SERVE_ANGLE..MAX_SERVE_ANGLE);
        let y = self.rng.random_range(8.0..(FRAME_SIZE - BALL_SIZE) as f64 - 8.0);
        self.ball = [SERVE_X, y];
        self.vel = [BALL_SPEED * angle.cos(), BALL_SPEED * angle.sin()];
    }

    fn ball_px(&self) -> (i64, i64) {
        (self.ball[0].round() as i64, self.ball[1].round() as i64)
    }

    fn paddle_px(&self) -> (i64, i64) {
        (PADDLE_X as i64, self.paddle_y.round() as i64)
    }

    /// Greedy controller that keeps the paddle centre on the ball centre.
    pub fn tracker_action(&self) -> usize {
        if !self.ball_visible() {
            return actions::NOOP;
        }
        let ball_c = self.ball[1] + BALL_SIZE as f64 / 2.0;
        let paddle_c = self.paddle_y + PADDLE_H as f64 / 2.0;
        if paddle_c < ball_c - 1.0 {
            actions::DOWN
        } else if paddle_c > ball_c + 1.0 {
            actions::UP
        } else {
            actions::NOOP
        }
    }

    pub fn render_frame(&self) -> Frame {
        let mut f = Frame::new(FRAME_SIZE, FRAME_SIZE);
        if self.skin == Skin::Alt {
            for y in (1..FRAME_SIZE).step_by(NET_PERIOD) {
                f.fill_rect(NET_X, y as i64, 1, 2, self.skin.decoration_intensity());
            }
        }
        let (px, py) = self.paddle_px();
        f.fill_rect(px, py, PADDLE_W, PADDLE_H, self.skin.paddle_intensity());
        if self.ball_visible() {
            let (bx, by) = self.ball_px();
            f.fill_rect(bx, by, BALL_SIZE, BALL_SIZE, self.skin.ball_intensity());
        }
        f
    }

    /// Ground-truth paddle and (when in play) ball, matching the rendered boxes.
    pub fn oracle_objects(&self) -> ObjectSet {
        let (px, py) = self.paddle_px();
        let mut objects = vec![SceneObject::new(
            PADDLE_CLASS,
            px as f64 + PADDLE_W as f64 / 2.0,
            py as f64 + PADDLE_H as f64 / 2.0,
            PADDLE_W as f64,
            PADDLE_H as f64,
            1.0,
        )];
        if self.ball_visible() {
            let (bx, by) = self.ball_px();
            let half = BALL_SIZE as f64 / 2.0;
            objects.push(SceneObject::new(
                BALL_CLASS,
                bx as f64 + half,
                by as f64 + half,
                BALL_SIZE as f64,
                BALL_SIZE as f64,
                1.0,
            ));
        }
        ObjectSet::new(FRAME_SIZE, FRAME_SIZE, objects)
    }

    fn advance_ball(&mut self) -> f64 {
        if self.hidden > 0 {
            self.hidden -= 1;
            if self.hidden == 0 {
                self.serve();
            }
            return 0.0;
        }
        let max_y = (FRAME_SIZE - BALL_SIZE) as f64;
        self.ball[0] += self.vel[0];
        self.ball[1] += self.vel[1];
        if self.ball[1] < 0.0 {
            self.ball[1] = -self.ball[1];
            self.vel[1] = -self.vel[1];
        } else if self.ball[1] > max_y {
            self.ball[1] = 2.0 * max_y - self.ball[1];
            self.vel[1] = -self.vel[1];
        }
        if self.ball[0] < 0.0 {
            self.ball[0] = -self.ball[0];
            self.vel[0] = -self.vel[0];
        }
        let right = self.ball[0] + BALL_SIZE as f64;
        if right >= HIT_PLANE && self.vel[0] > 0.0 {
            let top = self.ball[1];
            let overlaps = top + BALL_SIZE as f64 > self.paddle_y && top < self.paddle_y + PADDLE_H as f64;
            if overlaps {
                self.ball[0] -= 2.0 * (right - HIT_PLANE);
                self.vel[0] = -self.vel[0];
                self.hits += 1;
                return 1.0;
            }
            self.misses += 1;
            self.hidden = HIDDEN_STEPS;
            return -1.0;
        }
        0.0
    }
}

impl Env for ObjectPong {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, seed: u64) -> Vec<f64> {
        self.rng = rng::stream(seed, &[0x9046]);
        self.paddle_y = self.rng.random_range(0.0..(FRAME_SIZE - PADDLE_H) as f64);
        self.serve();
        self.hidden = 0;
        self.t = 0;
        self.done = false;
        self.hits = 0;
        self.misses = 0;
        self.observation()
    }

    fn step(&mut self, action: &Action) -> Result<StepResult> {
        if self.done {
            return Err(Error::EpisodeDone);
        }
        let a = match action {
            Action::Discrete(i) if *i < 3 => *i,
            Action::Discrete(i) => return Err(Error::InvalidInput(format!("action {i} out of range 0..3"))),
            Action::Continuous(_) => return Err(Error::InvalidInput("discrete action expected".into())),
        };
        let dy = match a {
            actions::UP => -PADDLE_SPEED,
            actions::DOWN => PADDLE_SPEED,
            _ => 0.0,
        };
        self.paddle_y = (self.paddle_y + dy).clamp(0.0, (FRAME_SIZE - PADDLE_H) as f64);
        let reward = self.advance_ball();
        self.t += 1;
        let truncated = self.t >= self.spec.horizon;
        self.done = truncated;
        Ok(StepResult {
            next_state: self.observation(),
            reward,
            done: truncated,
            truncated,
        })
    }

    fn observation(&self) -> Vec<f64> {
        let s = FRAME_SIZE as f64;
        let visible = if self.ball_visible() { 1.0 } else { 0.0 };
        vec![
            self.ball[0] / s,
            self.ball[1] / s,
            self.vel[0] / s,
            self.vel[1] / s,
            self.paddle_y / s,
            visible,
        ]
    }

    fn render_frame(&self) -> Option<Frame> {
        Some(ObjectPong::render_frame(self))
    }

    fn oracle_objects(&self) -> Option<ObjectSet> {
        Some(ObjectPong::oracle_objects(self))
    }
}
