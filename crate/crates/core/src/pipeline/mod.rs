//! Teacher training, symbolic distillation and neural-guided fine-tuning.

mod config;
mod distill;
mod finetune;
mod policy;
mod rollout;
mod teacher;

pub use config::{teacher_threshold, FinetuneConfig, PpoConfig};
pub use policy::{action_trace, episode_seed, evaluate_policy, mixed_act, run_episode, EvalResult, MixedPolicy, Observer, Policy};
pub use rollout::{
    clipped_surrogate, clipped_surrogate_grad, ppo_gradient, ppo_loss, ppo_objective, ratio, PpoObjective, RolloutBuffer,
    Transition, MAX_LOG_RATIO,
};
pub use teacher::{teacher_eval_seed, train_teacher, write_curve_csv, CurvePoint, TeacherRun, CURVE_CSV_HEADER};
pub use distill::{collect_distill_dataset, distill_forest, DistillDataset};
pub use finetune::{
    fitness_seeds, neural_guided_finetune, write_stage3_csv, FinetuneRecord, FinetuneResult, STAGE3_CSV_HEADER,
};
