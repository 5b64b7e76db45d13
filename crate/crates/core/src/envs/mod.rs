//! Parametric Grid-World tasks, a sampler over the task family and an exact
//! dynamic-programming oracle used to normalise returns.

mod grid;
mod oracle;
pub mod presets;
mod sample;
mod text;

pub use grid::{env_step, Action, EnvState, GridObject, GridWorldSpec, StepOutcome, MAX_OBJECTS, NUM_ACTIONS};
pub use oracle::{
    evaluate_policy, normalize_return, optimal_return_oracle, optimal_return_with_cap, EpisodeStats,
    DEFAULT_STATE_CAP,
};
pub use sample::{sample_gridworld, GridDistribution};
pub use text::{spec_from_text, spec_to_text};

/// Uniform distribution over the five actions.
pub const UNIFORM_POLICY: [f64; NUM_ACTIONS] = [0.2; NUM_ACTIONS];
