//! Proximal policy optimization with a diagonal Gaussian policy.

pub mod buffer;
pub mod checkpoint;
pub mod config;
pub mod mlp;
pub mod policy;
pub mod train;
pub mod update;

pub use buffer::{compute_gae, RolloutBuffer, Segment};
pub use checkpoint::Checkpoint;
pub use config::PpoConfig;
pub use mlp::Mlp;
pub use policy::{entropy, log_prob, policy_forward, sample_action, PolicyOutput, PolicyParams, StdHead};
pub use train::{
    rollout_deterministic, train, train_with_progress, BestPolicy, CurvePoint, Environment, LearningCurve, TrainOutcome,
    Transition,
};
pub use update::{clip_grad_norm, loss_and_grad, ppo_update, Adam, Batch, LossTerms, UpdateDiagnostics};
