//! Training one agent for one lifetime.

mod agent;
mod config;
mod lifetime;
mod lpg_step;
mod ppo;
mod rollout;

pub use agent::{sample_index, Agent};
pub use config::{apply_lr_schedule, LrSchedule, TrainConfig};
pub use lifetime::{evaluate_agent, train_lifetime, InnerObjective, LifetimeResult, Task, TraceRow};
pub use lpg_step::{lpg_train_step, rollout_targets};
pub use ppo::{
    minibatch_indices, normalize_in_place, ppo_batch, ppo_minibatch_direction, ppo_train_step, ppo_update,
    rollout_entropy, PpoBatch, StepMetrics,
};
pub use rollout::{collect_rollout, gae_advantages, rollout_advantages, truncated_length, EnvPool, Rollout};
