use crate::clock::LifetimeClock;
use crate::error::{Error, Result};
use crate::nn::OptimizerKind;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum LrSchedule {
    #[default]
    Constant,
    LinearDecay,
}

impl LrSchedule {
    pub fn as_str(self) -> &'static str {
        match self {
            LrSchedule::Constant => "constant",
            LrSchedule::LinearDecay => "linear-decay",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "constant" => Some(LrSchedule::Constant),
            "linear-decay" => Some(LrSchedule::LinearDecay),
            _ => None,
        }
    }
}

/// Settings for one agent lifetime.
#[derive(Debug, Clone, PartialEq)]
pub struct TrainConfig {
    pub horizon: u64,
    pub rollout_length: usize,
    pub num_envs: usize,
    pub lr: f64,
    pub lr_schedule: LrSchedule,
    pub optimizer: OptimizerKind,
    pub momentum: f64,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub ppo_epochs: usize,
    pub ppo_minibatches: usize,
    pub entropy_coef: f64,
    pub vf_coef: f64,
    /// Clipping is disabled when this is not positive.
    pub max_grad_norm: f64,
    pub normalize_advantages: bool,
    pub hidden: usize,
    pub eval_episodes: usize,
    pub fitness_floor: f64,
}

impl TrainConfig {
    /// Defaults for drift-style (PPO-like) agents.
    pub fn drift_defaults() -> Self {
        Self {
            horizon: 50_000,
            rollout_length: 16,
            num_envs: 8,
            lr: 5e-3,
            lr_schedule: LrSchedule::Constant,
            optimizer: OptimizerKind::Adam,
            momentum: 0.0,
            gamma: 0.99,
            gae_lambda: 0.95,
            ppo_epochs: 4,
            ppo_minibatches: 8,
            entropy_coef: 0.01,
            vf_coef: 0.5,
            max_grad_norm: 8.0,
            normalize_advantages: true,
            hidden: 32,
            eval_episodes: 32,
            fitness_floor: -1.0,
        }
    }

    /// Defaults for agents trained by a learned policy gradient.
    pub fn lpg_defaults() -> Self {
        Self {
            rollout_length: 20,
            ..Self::drift_defaults()
        }
    }

    pub fn batch_size(&self) -> usize {
        self.rollout_length * self.num_envs
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if self.horizon == 0 {
            return bad("horizon must be positive".into());
        }
        if self.rollout_length == 0 || self.num_envs == 0 {
            return bad("rollout_length and num_envs must be positive".into());
        }
        if !(self.lr >= 0.0) || !self.lr.is_finite() {
            return bad(format!("learning rate must be finite and non-negative, got {}", self.lr));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("momentum must lie in [0, 1), got {}", self.momentum));
        }
        if !(self.gamma > 0.0 && self.gamma <= 1.0) {
            return bad(format!("gamma must lie in (0, 1], got {}", self.gamma));
        }
        if !(0.0..=1.0).contains(&self.gae_lambda) {
            return bad(format!("gae_lambda must lie in [0, 1], got {}", self.gae_lambda));
        }
        if self.ppo_epochs == 0 || self.ppo_minibatches == 0 {
            return bad("ppo_epochs and ppo_minibatches must be positive".into());
        }
        if self.ppo_minibatches > self.batch_size() {
            return bad(format!(
                "{} minibatches cannot be cut from a batch of {}",
                self.ppo_minibatches,
                self.batch_size()
            ));
        }
        for (name, v) in [
            ("entropy_coef", self.entropy_coef),
            ("vf_coef", self.vf_coef),
            ("max_grad_norm", self.max_grad_norm),
            ("fitness_floor", self.fitness_floor),
        ] {
            if !v.is_finite() {
                return bad(format!("{name} must be finite"));
            }
        }
        if self.hidden == 0 {
            return bad("agent hidden width must be positive".into());
        }
        if self.eval_episodes == 0 {
            return bad("eval_episodes must be positive".into());
        }
        Ok(())
    }
}

/// Effective learning rate at the clock's position.
pub fn apply_lr_schedule(config: &TrainConfig, clock: &LifetimeClock) -> f64 {
    match config.lr_schedule {
        LrSchedule::Constant => config.lr,
        LrSchedule::LinearDecay => config.lr * (1.0 - clock.lifetime_frac()),
    }
}
