use super::agent::Agent;
use super::config::TrainConfig;
use super::ppo::{rollout_entropy, StepMetrics};
use super::rollout::Rollout;
use crate::error::{Error, Result};
use crate::lpg::{build_lpg_inputs, lpg_update, sigmoid, LpgNet, LpgStep, LpgTargets, LpgUpdateSample};
use crate::nn::{clip_grad_norm, Optimizer};

fn bootstraps(agent: &Agent, obs: &[f64], width: usize) -> Vec<f64> {
    let critic = agent.critic();
    let mut cache = critic.cache();
    obs.chunks(width)
        .flat_map(|o| {
            critic
                .forward_cached(agent.critic_params(), o, &mut cache)
                .iter()
                .map(|&z| sigmoid(z))
                .collect::<Vec<_>>()
        })
        .collect()
}

/// Targets for every transition of the rollout, one backward scan per
/// environment, returned in rollout order.
pub fn rollout_targets(agent: &Agent, rollout: &Rollout, net: &LpgNet, gamma: f64, horizon: u64) -> Result<Vec<LpgTargets>> {
    let m = net.config.bootstrap_dim;
    if agent.critic().output_width() != m {
        return Err(Error::Config(format!(
            "agent bootstrap head has {} outputs, LPG network expects {m}",
            agent.critic().output_width()
        )));
    }
    let y = bootstraps(agent, &rollout.obs, rollout.obs_width);
    let y_next = bootstraps(agent, &rollout.next_obs, rollout.obs_width);
    let mut targets: Vec<Option<LpgTargets>> = vec![None; rollout.len()];
    for e in 0..rollout.num_envs {
        let idx: Vec<usize> = rollout.env_indices(e).collect();
        if idx.is_empty() {
            continue;
        }
        let steps: Vec<LpgStep> = idx
            .iter()
            .map(|&i| LpgStep {
                reward: rollout.rewards[i],
                done: rollout.dones[i],
                action_prob: rollout.action_prob(i),
                bootstrap: &y[i * m..(i + 1) * m],
                next_bootstrap: &y_next[i * m..(i + 1) * m],
                stamp: rollout.stamp(i),
            })
            .collect();
        let inputs = build_lpg_inputs(&steps, &net.config, gamma, horizon)?;
        for (k, t) in net.targets(&inputs)?.into_iter().enumerate() {
            targets[idx[k]] = Some(t);
        }
    }
    Ok(targets.into_iter().map(|t| t.expect("every transition has a target")).collect())
}

/// One agent update driven by the learned policy gradient.
pub fn lpg_train_step(
    agent: &mut Agent,
    rollout: &Rollout,
    net: &LpgNet,
    config: &TrainConfig,
    optimizer: &mut Optimizer,
    lr: f64,
    horizon: u64,
) -> Result<StepMetrics> {
    if rollout.is_empty() {
        return Ok(StepMetrics { entropy: 0.0, update_norm: 0.0 });
    }
    let targets = rollout_targets(agent, rollout, net, config.gamma, horizon)?;
    let samples: Vec<LpgUpdateSample> = (0..rollout.len())
        .map(|i| LpgUpdateSample {
            obs: rollout.obs_at(i),
            action: rollout.actions[i],
            targets: &targets[i],
        })
        .collect();
    let mut delta = lpg_update(agent.actor(), agent.critic(), agent.params(), &samples, &net.config)?.delta;
    clip_grad_norm(&mut delta, config.max_grad_norm);
    let before = agent.params().to_vec();
    optimizer.step(agent.params_mut(), &delta, lr);
    if agent.params().iter().any(|p| !p.is_finite()) {
        return Err(Error::Numeric("agent parameters diverged".into()));
    }
    let update_norm = before
        .iter()
        .zip(agent.params())
        .map(|(a, b)| (b - a).powi(2))
        .sum::<f64>()
        .sqrt();
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
    use crate::lpg::LpgConfig;
    use crate::nn::{OptimizerKind, ParamVector};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn setup(m: usize) -> (Agent, Rollout) {
        let spec = presets::benchmark_3x3();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let agent = Agent::new(spec.obs_width(), 6, m, &mut rng).unwrap();
        let mut pool = EnvPool::new(&spec, 3, &mut rng);
        let mut clock = LifetimeClock::new(500).unwrap();
        let rollout = collect_rollout(&spec, &agent, &mut pool, &mut clock, 5, &mut rng).unwrap();
        (agent, rollout)
    }

    fn zero_net(config: LpgConfig) -> LpgNet {
        let n = LpgNet::param_count(&config).unwrap();
        LpgNet::new(config, ParamVector::zeros(n)).unwrap()
    }

    #[test]
    fn zero_learning_rate_keeps_agent() {
        let config = LpgConfig { bootstrap_dim: 4, hidden: 8, temporal: true, ..LpgConfig::default() };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let net = LpgNet::random(config, &mut rng).unwrap();
        let (mut agent, rollout) = setup(4);
        let before = agent.params().to_vec();
        let mut opt = OptimizerKind::Adam.build(before.len(), 0.0);
        let m = lpg_train_step(&mut agent, &rollout, &net, &TrainConfig::lpg_defaults(), &mut opt, 0.0, 500).unwrap();
        assert_eq!(agent.params(), &before[..]);
        assert_eq!(m.update_norm, 0.0);
    }

    #[test]
    fn zero_network_only_pulls_bootstraps_to_one_half() {
        let config = LpgConfig {
            bootstrap_dim: 3,
            hidden: 4,
            beta0: 0.0,
            beta1: 0.0,
            ..LpgConfig::default()
        };
        let net = zero_net(config.clone());
        let (mut agent, rollout) = setup(3);
        let before = agent.clone();
        let mut train = TrainConfig::lpg_defaults();
        train.max_grad_norm = 0.0;
        let mut opt = OptimizerKind::Sgd.build(before.params().len(), 0.0);
        let lr = 0.1;
        lpg_train_step(&mut agent, &rollout, &net, &train, &mut opt, lr, 500).unwrap();
        let np = before.actor().param_count();
        assert_eq!(agent.actor_params(), before.actor_params());
        // Hand evaluation: gradient of -alpha_y * mean KL(y || 1/2) through the bootstrap head.
        let mut expected = vec![0.0; before.critic_params().len()];
        let n = rollout.len() as f64;
        for i in 0..rollout.len() {
            let z = before.critic().forward(before.critic_params(), rollout.obs_at(i)).unwrap();
            let cot: Vec<f64> = z
                .iter()
                .map(|&zk| {
                    let y = sigmoid(zk);
                    -config.alpha_y * y * (1.0 - y) * zk / n
                })
                .collect();
            let g = before.critic().grad(before.critic_params(), rollout.obs_at(i), &cot).unwrap();
            for (e, v) in expected.iter_mut().zip(g.wrt_params) {
                *e += v;
            }
        }
        for (k, e) in expected.iter().enumerate() {
            let delta = agent.params()[np + k] - before.params()[np + k];
            assert!((delta - lr * e).abs() < 1e-12);
        }
    }

    #[test]
    fn bootstrap_width_mismatch_is_reported() {
        let net = zero_net(LpgConfig { bootstrap_dim: 5, hidden: 4, ..LpgConfig::default() });
        let (agent, rollout) = setup(3);
        assert!(rollout_targets(&agent, &rollout, &net, 0.99, 500).is_err());
    }
}
