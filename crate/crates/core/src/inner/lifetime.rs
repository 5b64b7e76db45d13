use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::agent::{sample_index, Agent};
use super::config::{apply_lr_schedule, TrainConfig};
use super::lpg_step::lpg_train_step;
use super::ppo::ppo_train_step;
use super::rollout::{collect_rollout, EnvPool};
use crate::clock::LifetimeClock;
use crate::envs::{env_step, normalize_return, optimal_return_oracle, Action, GridWorldSpec, NUM_ACTIONS};
use crate::error::{Error, Result};
use crate::lpg::LpgNet;
use crate::lpo::DriftObjective;

/// What drives the agent's updates during a lifetime.
#[derive(Clone, Copy)]
pub enum InnerObjective<'a> {
    Drift(&'a dyn DriftObjective),
    Lpg(&'a LpgNet),
}

impl InnerObjective<'_> {
    fn critic_outputs(&self) -> usize {
        match self {
            InnerObjective::Drift(_) => 1,
            InnerObjective::Lpg(net) => net.config.bootstrap_dim,
        }
    }
}

/// An environment together with its optimal expected return.
#[derive(Debug, Clone, PartialEq)]
pub struct Task {
    pub spec: GridWorldSpec,
    pub optimum: f64,
}

impl Task {
    pub fn new(spec: GridWorldSpec) -> Result<Self> {
        let optimum = optimal_return_oracle(&spec)?;
        Ok(Self { spec, optimum })
    }
}

/// One row per agent update.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceRow {
    pub n: u64,
    pub horizon: u64,
    pub entropy: f64,
    pub update_norm: f64,
    /// Normalised discounted return of the episodes that ended during the
    /// update's rollout; carried forward when none ended.
    pub eval_return_normalized: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LifetimeResult {
    /// Normalised final return, or the floor for a diverged lifetime.
    pub fitness: f64,
    /// Mean discounted return of the evaluation episodes.
    pub final_return: f64,
    pub diverged: bool,
    pub updates: usize,
    pub trace: Vec<TraceRow>,
}

const INIT_STREAM: u64 = 0;
const TRAIN_STREAM: u64 = 1;
const EVAL_STREAM: u64 = 2;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// Mean discounted return over `episodes` runs of the agent's stochastic policy.
pub fn evaluate_agent(spec: &GridWorldSpec, agent: &Agent, episodes: usize, rng: &mut ChaCha8Rng) -> Result<f64> {
    let mut cache = agent.actor().cache();
    let mut obs = vec![0.0; spec.obs_width()];
    let mut probs = [0.0; NUM_ACTIONS];
    let mut total = 0.0;
    for _ in 0..episodes {
        let mut state = spec.reset(rng);
        let mut discount = 1.0;
        loop {
            spec.observe(&state, &mut obs);
            agent.policy_into(&obs, &mut cache, &mut probs);
            let step = env_step(spec, &state, Action::ALL[sample_index(&probs, rng)], rng)?;
            total += discount * step.reward;
            discount *= spec.discount;
            if step.done {
                break;
            }
            state = step.next;
        }
    }
    Ok(total / episodes as f64)
}

/// Trains a fresh agent for `config.horizon` environment steps and scores
/// the final policy. Deterministic in all of its arguments.
pub fn train_lifetime(
    objective: InnerObjective<'_>,
    task: &Task,
    config: &TrainConfig,
    seed: u64,
) -> Result<LifetimeResult> {
    config.validate()?;
    task.spec.validate()?;
    match run_lifetime(objective, task, config, seed) {
        Ok(result) => Ok(result),
        Err(Error::Numeric(msg)) => {
            log::debug!("lifetime {seed} diverged: {msg}");
            Ok(LifetimeResult {
                fitness: config.fitness_floor,
                final_return: f64::NAN,
                diverged: true,
                updates: 0,
                trace: Vec::new(),
            })
        }
        Err(e) => Err(e),
    }
}

fn run_lifetime(objective: InnerObjective<'_>, task: &Task, config: &TrainConfig, seed: u64) -> Result<LifetimeResult> {
    let spec = &task.spec;
    let mut init_rng = stream(seed, INIT_STREAM);
    let mut rng = stream(seed, TRAIN_STREAM);
    let mut agent = Agent::new(spec.obs_width(), config.hidden, objective.critic_outputs(), &mut init_rng)?;
    let mut optimizer = config.optimizer.build(agent.params().len(), config.momentum);
    let mut pool = EnvPool::new(spec, config.num_envs, &mut rng);
    let mut clock = LifetimeClock::new(config.horizon)?;
    let mut trace = Vec::new();
    let mut last_return = 0.0;
    while !clock.is_finished() {
        let lr = apply_lr_schedule(config, &clock);
        let rollout = collect_rollout(spec, &agent, &mut pool, &mut clock, config.rollout_length, &mut rng)?;
        let metrics = match objective {
            InnerObjective::Drift(drift) => {
                ppo_train_step(&mut agent, &rollout, drift, config, &mut optimizer, lr, config.horizon, &mut rng)?
            }
            InnerObjective::Lpg(net) => {
                lpg_train_step(&mut agent, &rollout, net, config, &mut optimizer, lr, config.horizon)?
            }
        };
        if !rollout.completed_returns.is_empty() {
            let mean = rollout.completed_returns.iter().sum::<f64>() / rollout.completed_returns.len() as f64;
            last_return = normalize_return(mean, task.optimum)?;
        }
        trace.push(TraceRow {
            n: clock.steps(),
            horizon: config.horizon,
            entropy: metrics.entropy,
            update_norm: metrics.update_norm,
            eval_return_normalized: last_return,
        });
    }
    let mut eval_rng = stream(seed, EVAL_STREAM);
    let final_return = evaluate_agent(spec, &agent, config.eval_episodes, &mut eval_rng)?;
    let normalized = normalize_return(final_return, task.optimum)?;
    Ok(LifetimeResult {
        fitness: normalized.max(config.fitness_floor),
        final_return,
        diverged: false,
        updates: trace.len(),
        trace,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::presets;
    use crate::lpg::LpgConfig;
    use crate::lpo::{DriftNet, PpoClipDrift};

    fn small_config() -> TrainConfig {
        TrainConfig {
            horizon: 480,
            rollout_length: 6,
            num_envs: 4,
            hidden: 8,
            ..TrainConfig::drift_defaults()
        }
    }

    #[test]
    fn one_rollout_horizon_means_one_update() {
        let task = Task::new(presets::benchmark_3x3()).unwrap();
        let mut config = small_config();
        config.horizon = 24;
        let drift = PpoClipDrift::new(0.2).unwrap();
        let r = train_lifetime(InnerObjective::Drift(&drift), &task, &config, 1).unwrap();
        assert_eq!(r.updates, 1);
        assert_eq!(r.trace[0].n, 24);
    }

    #[test]
    fn lifetimes_are_deterministic() {
        let task = Task::new(presets::benchmark_3x3()).unwrap();
        let config = small_config();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let net = DriftNet::random(true, 16, &mut rng).unwrap();
        let a = train_lifetime(InnerObjective::Drift(&net), &task, &config, 3).unwrap();
        let b = train_lifetime(InnerObjective::Drift(&net), &task, &config, 3).unwrap();
        assert_eq!(a, b);
        let c = train_lifetime(InnerObjective::Drift(&net), &task, &config, 4).unwrap();
        assert_ne!(a.trace, c.trace);
    }

    #[test]
    fn trace_stamps_are_monotone_and_end_at_horizon() {
        let task = Task::new(presets::benchmark_3x3()).unwrap();
        let mut config = TrainConfig { horizon: 500, ..small_config() };
        config.rollout_length = 20;
        let lpg = LpgConfig { bootstrap_dim: 4, hidden: 8, temporal: true, ..LpgConfig::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let net = LpgNet::random(lpg, &mut rng).unwrap();
        let r = train_lifetime(InnerObjective::Lpg(&net), &task, &config, 0).unwrap();
        assert!(!r.diverged);
        assert!(r.trace.windows(2).all(|w| w[0].n <= w[1].n));
        assert_eq!(r.trace.last().unwrap().n, 500);
        assert!(r.trace.iter().all(|row| row.entropy <= (5f64).ln() + 1e-12));
    }

    #[test]
    fn learning_improves_on_the_small_benchmark() {
        let task = Task::new(presets::benchmark_3x3()).unwrap();
        let config = TrainConfig { horizon: 6000, ..small_config() };
        let drift = PpoClipDrift::new(0.2).unwrap();
        let r = train_lifetime(InnerObjective::Drift(&drift), &task, &config, 2).unwrap();
        assert!(r.fitness > 0.8, "{}", r.fitness);
    }
}
