use rand::Rng;

use super::agent::{sample_index, Agent};
use crate::clock::LifetimeClock;
use crate::envs::{env_step, Action, EnvState, GridWorldSpec, NUM_ACTIONS};
use crate::error::{Error, Result};

/// Parallel copies of one environment, persisting across rollouts.
#[derive(Debug, Clone)]
pub struct EnvPool {
    states: Vec<EnvState>,
    returns: Vec<f64>,
    discounts: Vec<f64>,
}

impl EnvPool {
    pub fn new<R: Rng + ?Sized>(spec: &GridWorldSpec, count: usize, rng: &mut R) -> Self {
        Self {
            states: (0..count).map(|_| spec.reset(rng)).collect(),
            returns: vec![0.0; count],
            discounts: vec![1.0; count],
        }
    }

    pub fn len(&self) -> usize {
        self.states.len()
    }

    pub fn is_empty(&self) -> bool {
        self.states.is_empty()
    }

    pub fn states(&self) -> &[EnvState] {
        &self.states
    }
}

/// Transitions stored time-major: entry `t * num_envs + e` is step `t` of
/// environment `e`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rollout {
    pub num_envs: usize,
    pub length: usize,
    pub obs_width: usize,
    pub obs: Vec<f64>,
    pub next_obs: Vec<f64>,
    pub actions: Vec<usize>,
    pub rewards: Vec<f64>,
    pub dones: Vec<bool>,
    /// Behaviour policy, `NUM_ACTIONS` entries per transition.
    pub probs: Vec<f64>,
    /// Clock reading when step `t` was taken, shared by all environments.
    pub stamps: Vec<u64>,
    /// Discounted returns of episodes that finished during this rollout.
    pub completed_returns: Vec<f64>,
}

impl Rollout {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn obs_at(&self, i: usize) -> &[f64] {
        &self.obs[i * self.obs_width..(i + 1) * self.obs_width]
    }

    pub fn next_obs_at(&self, i: usize) -> &[f64] {
        &self.next_obs[i * self.obs_width..(i + 1) * self.obs_width]
    }

    pub fn probs_at(&self, i: usize) -> &[f64] {
        &self.probs[i * NUM_ACTIONS..(i + 1) * NUM_ACTIONS]
    }

    pub fn action_prob(&self, i: usize) -> f64 {
        self.probs_at(i)[self.actions[i]]
    }

    pub fn stamp(&self, i: usize) -> u64 {
        self.stamps[i / self.num_envs]
    }

    /// Transition indices of environment `e`, in time order.
    pub fn env_indices(&self, e: usize) -> impl Iterator<Item = usize> + '_ {
        (0..self.length).map(move |t| t * self.num_envs + e)
    }
}

/// Number of steps the next rollout may take without overrunning the horizon.
pub fn truncated_length(clock: &LifetimeClock, length: usize, num_envs: usize) -> usize {
    let steps_left = clock.remaining().div_ceil(num_envs as u64);
    length.min(steps_left as usize)
}

/// Runs every environment in the pool for up to `length` steps under the
/// agent's stochastic policy. The clock advances by the number of
/// environments per step and never passes the horizon.
pub fn collect_rollout<R: Rng + ?Sized>(
    spec: &GridWorldSpec,
    agent: &Agent,
    pool: &mut EnvPool,
    clock: &mut LifetimeClock,
    length: usize,
    rng: &mut R,
) -> Result<Rollout> {
    if agent.obs_width() != spec.obs_width() {
        return Err(Error::Config(format!(
            "agent observes {} values, environment produces {}",
            agent.obs_width(),
            spec.obs_width()
        )));
    }
    let num_envs = pool.len();
    let length = if num_envs == 0 { 0 } else { truncated_length(clock, length, num_envs) };
    let w = spec.obs_width();
    let total = length * num_envs;
    let mut out = Rollout {
        num_envs,
        length,
        obs_width: w,
        obs: vec![0.0; total * w],
        next_obs: vec![0.0; total * w],
        actions: Vec::with_capacity(total),
        rewards: Vec::with_capacity(total),
        dones: Vec::with_capacity(total),
        probs: vec![0.0; total * NUM_ACTIONS],
        stamps: Vec::with_capacity(length),
        completed_returns: Vec::new(),
    };
    let mut cache = agent.actor().cache();
    for t in 0..length {
        out.stamps.push(clock.steps());
        for e in 0..num_envs {
            let i = t * num_envs + e;
            let state = pool.states[e];
            spec.observe(&state, &mut out.obs[i * w..(i + 1) * w]);
            let probs = &mut out.probs[i * NUM_ACTIONS..(i + 1) * NUM_ACTIONS];
            agent.policy_into(&out.obs[i * w..(i + 1) * w], &mut cache, probs);
            let action = sample_index(probs, rng);
            let step = env_step(spec, &state, Action::ALL[action], rng)?;
            spec.observe(&step.next, &mut out.next_obs[i * w..(i + 1) * w]);
            out.actions.push(action);
            out.rewards.push(step.reward);
            out.dones.push(step.done);
            pool.returns[e] += pool.discounts[e] * step.reward;
            pool.discounts[e] *= spec.discount;
            if step.done {
                out.completed_returns.push(pool.returns[e]);
                pool.returns[e] = 0.0;
                pool.discounts[e] = 1.0;
                pool.states[e] = spec.reset(rng);
            } else {
                pool.states[e] = step.next;
            }
        }
        clock.advance(num_envs as u64);
    }
    Ok(out)
}

/// Generalised advantage estimates for one environment's sequence.
/// `values[t]` estimates the state at step `t`; `last_value` estimates the
/// state after the final step. A done flag cuts the bootstrap.
pub fn gae_advantages(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    last_value: f64,
    gamma: f64,
    lambda: f64,
) -> Result<Vec<f64>> {
    if values.len() != rewards.len() || dones.len() != rewards.len() {
        return Err(Error::Usage(format!(
            "advantage inputs disagree in length: {} rewards, {} values, {} done flags",
            rewards.len(),
            values.len(),
            dones.len()
        )));
    }
    let n = rewards.len();
    let mut adv = vec![0.0; n];
    let mut running = 0.0;
    for t in (0..n).rev() {
        let next_value = if t + 1 < n { values[t + 1] } else { last_value };
        let live = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * next_value * live - values[t];
        running = delta + gamma * lambda * live * running;
        adv[t] = running;
    }
    Ok(adv)
}

/// Advantages and value targets for a whole rollout, given per-transition
/// state values and the value of each transition's successor.
pub fn rollout_advantages(
    rollout: &Rollout,
    values: &[f64],
    next_values: &[f64],
    gamma: f64,
    lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let n = rollout.len();
    if values.len() != n || next_values.len() != n {
        return Err(Error::Usage("value estimates do not match the rollout".into()));
    }
    let mut advantages = vec![0.0; n];
    for e in 0..rollout.num_envs {
        let idx: Vec<usize> = rollout.env_indices(e).collect();
        let Some(&last) = idx.last() else { continue };
        let r: Vec<f64> = idx.iter().map(|&i| rollout.rewards[i]).collect();
        let v: Vec<f64> = idx.iter().map(|&i| values[i]).collect();
        let d: Vec<bool> = idx.iter().map(|&i| rollout.dones[i]).collect();
        let a = gae_advantages(&r, &v, &d, next_values[last], gamma, lambda)?;
        for (k, &i) in idx.iter().enumerate() {
            advantages[i] = a[k];
        }
    }
    let returns = advantages.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((advantages, returns))
}
