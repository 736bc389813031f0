//! Symbolic policy distillation for reinforcement learning.
//!
//! A small neural actor-critic teacher is trained with PPO, its outputs are
//! distilled into a forest of expression trees (one per action dimension) by
//! genetic programming, and the forest is then fine-tuned against episodic
//! reward with a search that mixes structural variation, gradient steps on
//! tree constants, and per-action guidance from the teacher.
//!
//! Module map:
//!
//! - [`expr`]: expression trees, evaluation, constant gradients, text formats
//! - [`gp`]: genetic-programming engine and symbolic regression
//! - [`tinynn`]: dense actor-critic with manual backprop and Adam
//! - [`envs`]: classic-control tasks and the ObjectPong arcade
//! - [`objects`]: frame-to-object extraction and object feature vectors
//! - [`pipeline`]: teacher training, distillation, fine-tuning, evaluation
//! - [`cli`]: run configuration, stage orchestration, ablation presets

#![allow(clippy::needless_range_loop, clippy::type_complexity, clippy::large_enum_variant)]

pub mod cli;
pub mod envs;
pub mod error;
pub mod expr;
pub mod gp;
pub mod objects;
pub mod pipeline;
pub mod rng;
pub mod tinynn;

pub use error::{Error, Result};
