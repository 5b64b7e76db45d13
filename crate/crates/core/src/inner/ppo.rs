use rand::seq::SliceRandom;
use rand::Rng;

use super::agent::Agent;
use super::config::TrainConfig;
use super::rollout::{rollout_advantages, Rollout};
use crate::error::{Error, Result};
use crate::lpo::{accumulate_policy_grad, DriftObjective, PolicySample};
use crate::nn::dist::entropy;
use crate::nn::{clip_grad_norm, Optimizer};

/// Flattened training data for the drift-style update.
#[derive(Debug, Clone, PartialEq)]
pub struct PpoBatch {
    pub obs_width: usize,
    pub obs: Vec<f64>,
    pub actions: Vec<usize>,
    pub old_probs: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
    pub lifetime_fracs: Vec<f64>,
}

impl PpoBatch {
    pub fn len(&self) -> usize {
        self.actions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.actions.is_empty()
    }

    pub fn obs_at(&self, i: usize) -> &[f64] {
        &self.obs[i * self.obs_width..(i + 1) * self.obs_width]
    }

    fn validate(&self) -> Result<()> {
        let n = self.len();
        if self.obs.len() != n * self.obs_width
            || self.old_probs.len() != n
            || self.advantages.len() != n
            || self.returns.len() != n
            || self.lifetime_fracs.len() != n
        {
            return Err(Error::Usage("PPO batch columns disagree in length".into()));
        }
        Ok(())
    }
}

/// Evaluates the critic on every state and successor of the rollout, then
/// builds advantages, value targets and lifetime stamps.
pub fn ppo_batch(agent: &Agent, rollout: &Rollout, config: &TrainConfig, horizon: u64) -> Result<PpoBatch> {
    let n = rollout.len();
    let mut cache = agent.critic().cache();
    let mut values = Vec::with_capacity(n);
    let mut next_values = Vec::with_capacity(n);
    for i in 0..n {
        values.push(agent.critic_into(rollout.obs_at(i), &mut cache)[0]);
        next_values.push(agent.critic_into(rollout.next_obs_at(i), &mut cache)[0]);
    }
    let (advantages, returns) = rollout_advantages(rollout, &values, &next_values, config.gamma, config.gae_lambda)?;
    Ok(PpoBatch {
        obs_width: rollout.obs_width,
        obs: rollout.obs.clone(),
        actions: rollout.actions.clone(),
        old_probs: (0..n).map(|i| rollout.action_prob(i)).collect(),
        advantages,
        returns,
        lifetime_fracs: (0..n).map(|i| rollout.stamp(i) as f64 / horizon as f64).collect(),
    })
}

/// Splits `0..len` into `parts` minibatches after a shuffle.
pub fn minibatch_indices<R: Rng + ?Sized>(len: usize, parts: usize, rng: &mut R) -> Vec<Vec<usize>> {
    let mut order: Vec<usize> = (0..len).collect();
    order.shuffle(rng);
    let parts = parts.clamp(1, len.max(1));
    let base = len / parts;
    let extra = len % parts;
    let mut out = Vec::with_capacity(parts);
    let mut start = 0;
    for k in 0..parts {
        let size = base + usize::from(k < extra);
        out.push(order[start..start + size].to_vec());
        start += size;
    }
    out
}

pub fn normalize_in_place(values: &mut [f64]) {
    if values.len() < 2 {
        return;
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let std = var.sqrt();
    for v in values.iter_mut() {
        *v = (*v - mean) / (std + 1e-8);
    }
}

/// Ascent direction for one minibatch: policy objective plus entropy bonus
/// for the actor, negative squared value error for the critic.
pub fn ppo_minibatch_direction(
    agent: &Agent,
    batch: &PpoBatch,
    indices: &[usize],
    drift: &dyn DriftObjective,
    config: &TrainConfig,
) -> Result<Vec<f64>> {
    let mut advantages: Vec<f64> = indices.iter().map(|&i| batch.advantages[i]).collect();
    if config.normalize_advantages {
        normalize_in_place(&mut advantages);
    }
    let samples: Vec<PolicySample> = indices
        .iter()
        .zip(&advantages)
        .map(|(&i, &a)| PolicySample {
            obs: batch.obs_at(i),
            action: batch.actions[i],
            advantage: a,
            old_prob: batch.old_probs[i],
            lifetime_frac: batch.lifetime_fracs[i],
        })
        .collect();
    let np = agent.actor().param_count();
    let mut direction = vec![0.0; agent.params().len()];
    let (d_actor, d_critic) = direction.split_at_mut(np);
    accumulate_policy_grad(
        drift,
        agent.actor(),
        agent.actor_params(),
        &samples,
        config.entropy_coef,
        false,
        d_actor,
    )?;
    let critic = agent.critic();
    let mut cache = critic.cache();
    let scale = -2.0 * config.vf_coef / indices.len() as f64;
    for &i in indices {
        let v = critic.forward_cached(agent.critic_params(), batch.obs_at(i), &mut cache)[0];
        let cot = [scale * (v - batch.returns[i])];
        critic.backward(agent.critic_params(), &mut cache, &cot, Some(d_critic), None);
    }
    if direction.iter().any(|d| !d.is_finite()) {
        return Err(Error::Numeric("non-finite PPO update direction".into()));
    }
    Ok(direction)
}

/// Multi-epoch minibatch update on a fixed batch. Returns the L2 norm of
/// the total parameter change.
pub fn ppo_update<R: Rng + ?Sized>(
    agent: &mut Agent,
    batch: &PpoBatch,
    drift: &dyn DriftObjective,
    config: &TrainConfig,
    optimizer: &mut Optimizer,
    lr: f64,
    rng: &mut R,
) -> Result<f64> {
    batch.validate()?;
    if batch.is_empty() {
        return Ok(0.0);
    }
    let before = agent.params().to_vec();
    for _ in 0..config.ppo_epochs {
        for indices in minibatch_indices(batch.len(), config.ppo_minibatches, rng) {
            let mut direction = ppo_minibatch_direction(agent, batch, &indices, drift, config)?;
            clip_grad_norm(&mut direction, config.max_grad_norm);
            optimizer.step(agent.params_mut(), &direction, lr);
        }
    }
    if agent.params().iter().any(|p| !p.is_finite()) {
        return Err(Error::Numeric("agent parameters diverged".into()));
    }
    Ok(before
        .iter()
        .zip(agent.params())
        .map(|(a, b)| (b - a).powi(2))
        .sum::<f64>()
        .sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepMetrics {
    /// Mean policy entropy over the rollout's states, at collection time.
    pub entropy: f64,
    pub update_norm: f64,
}

pub fn rollout_entropy(rollout: &Rollout) -> f64 {
    if rollout.is_empty() {
        return 0.0;
    }
    (0..rollout.len()).map(|i| entropy(rollout.probs_at(i))).sum::<f64>() / rollout.len() as f64
}

/// One drift-style agent update on a freshly collected rollout. Every
/// transition keeps the lifetime stamp of its collection step.
#[allow(clippy::too_many_arguments)]
pub fn ppo_train_step<R: Rng + ?Sized>(
    agent: &mut Agent,
    rollout: &Rollout,
    drift: &dyn DriftObjective,
    config: &TrainConfig,
    optimizer: &mut Optimizer,
    lr: f64,
    horizon: u64,
    rng: &mut R,
) -> Result<StepMetrics> {
    let batch = ppo_batch(agent, rollout, config, horizon)?;
    let update_norm = ppo_update(agent, &batch, drift, config, optimizer, lr, rng)?;
    Ok(StepMetrics {
        entropy: rollout_entropy(rollout),
        update_norm,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clock::LifetimeClock;
    use crate::envs::presets;
    use crate::inner::rollout::{collect_rollout, EnvPool};
    use crate::lpo::{PpoClipDrift, ZeroDrift};
    use crate::nn::dist::softmax;
    use crate::nn::OptimizerKind;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup(seed: u64) -> (Agent, Rollout, TrainConfig) {
        let spec = presets::benchmark_3x3();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let agent = Agent::new(spec.obs_width(), 8, 1, &mut rng).unwrap();
        let mut pool = EnvPool::new(&spec, 4, &mut rng);
        let mut clock = LifetimeClock::new(1000).unwrap();
        let rollout = collect_rollout(&spec, &agent, &mut pool, &mut clock, 6, &mut rng).unwrap();
        let mut config = TrainConfig::drift_defaults();
        config.rollout_length = 6;
        config.num_envs = 4;
        (agent, rollout, config)
    }

    #[test]
    fn zero_learning_rate_keeps_agent() {
        let (mut agent, rollout, config) = setup(0);
        let before = agent.params().to_vec();
        let mut opt = OptimizerKind::Adam.build(before.len(), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let drift = PpoClipDrift::new(0.2).unwrap();
        let m = ppo_train_step(&mut agent, &rollout, &drift, &config, &mut opt, 0.0, 1000, &mut rng).unwrap();
        assert_eq!(agent.params(), &before[..]);
        assert_eq!(m.update_norm, 0.0);
        assert!(m.entropy > 0.0 && m.entropy <= (5f64).ln() + 1e-12);
    }

    #[test]
    fn single_pass_without_drift_is_an_actor_critic_step() {
        let (mut agent, rollout, mut config) = setup(2);
        config.ppo_epochs = 1;
        config.ppo_minibatches = 1;
        config.entropy_coef = 0.0;
        config.normalize_advantages = false;
        config.max_grad_norm = 0.0;
        let batch = ppo_batch(&agent, &rollout, &config, 1000).unwrap();
        let before = agent.params().to_vec();
        let lr = 0.05;
        let mut opt = OptimizerKind::Sgd.build(before.len(), 0.0);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        ppo_update(&mut agent, &batch, &ZeroDrift, &config, &mut opt, lr, &mut rng).unwrap();

        let reference = Agent::from_params(agent.obs_width(), 8, 1, before.clone()).unwrap();
        let n = batch.len() as f64;
        let mut expected = vec![0.0; before.len()];
        let np = reference.actor().param_count();
        for i in 0..batch.len() {
            let logits = reference.actor().forward(reference.actor_params(), batch.obs_at(i)).unwrap();
            let mut pi = [0.0; 5];
            softmax(&logits, &mut pi);
            let a = batch.actions[i];
            let cot: Vec<f64> = (0..5)
                .map(|k| batch.advantages[i] * (f64::from(u8::from(k == a)) - pi[k]) / n)
                .collect();
            let g = reference.actor().grad(reference.actor_params(), batch.obs_at(i), &cot).unwrap();
            for (e, v) in expected[..np].iter_mut().zip(g.wrt_params) {
                *e += v;
            }
            let v = reference.critic().forward(reference.critic_params(), batch.obs_at(i)).unwrap()[0];
            let cot = [-2.0 * config.vf_coef * (v - batch.returns[i]) / n];
            let g = reference.critic().grad(reference.critic_params(), batch.obs_at(i), &cot).unwrap();
            for (e, v) in expected[np..].iter_mut().zip(g.wrt_params) {
                *e += v;
            }
        }
        for k in 0..before.len() {
            let delta = agent.params()[k] - before[k];
            assert!((delta - lr * expected[k]).abs() < 1e-12);
        }
    }

    #[test]
    fn minibatches_partition_the_batch() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let parts = minibatch_indices(21, 4, &mut rng);
        assert_eq!(parts.iter().map(Vec::len).collect::<Vec<_>>(), vec![6, 5, 5, 5]);
        let mut all: Vec<usize> = parts.concat();
        all.sort_unstable();
        assert_eq!(all, (0..21).collect::<Vec<_>>());
    }

    #[test]
    fn normalisation_centres_and_scales() {
        let mut v = vec![1.0, 2.0, 3.0, 6.0];
        normalize_in_place(&mut v);
        assert!(v.iter().sum::<f64>().abs() < 1e-12);
        let var = v.iter().map(|x| x * x).sum::<f64>() / 4.0;
        assert!((var - 1.0).abs() < 1e-6);
    }
}
