//! Small dense actor-critic networks with hand-written backpropagation.

mod adam;
mod checkpoint;
mod dist;
mod mlp;
mod policy;

pub use adam::{clip_grad_norm, Adam, DEFAULT_LR};
pub use checkpoint::{Checkpoint, CHECKPOINT_VERSION};
pub use dist::{entropy, entropy_grad, log_prob, log_prob_grad, sample_action};
pub use mlp::{Dense, Mlp};
pub use policy::{MlpPolicy, RunningNorm, SampleGrad, INITIAL_LOG_STD};
