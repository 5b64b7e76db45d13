use rand::Rng;

use crate::envs::NUM_ACTIONS;
use crate::error::{Error, Result};
use crate::nn::dist::softmax;
use crate::nn::{Activation, Mlp, MlpCache, MlpSpec};

/// Actor and critic networks with one flat parameter vector
/// `[actor params, critic params]`. The critic emits a scalar value for
/// drift-style training or bootstrap logits for learned policy gradients.
#[derive(Debug, Clone)]
pub struct Agent {
    actor: Mlp,
    critic: Mlp,
    params: Vec<f64>,
}

impl Agent {
    pub fn networks(obs_width: usize, hidden: usize, critic_outputs: usize) -> Result<(Mlp, Mlp)> {
        let actor = Mlp::new(MlpSpec::new(vec![obs_width, hidden, NUM_ACTIONS], Activation::Tanh, true)?)?;
        let critic = Mlp::new(MlpSpec::new(vec![obs_width, hidden, critic_outputs], Activation::Tanh, true)?)?;
        Ok((actor, critic))
    }

    pub fn new<R: Rng + ?Sized>(obs_width: usize, hidden: usize, critic_outputs: usize, rng: &mut R) -> Result<Self> {
        let (actor, critic) = Self::networks(obs_width, hidden, critic_outputs)?;
        let mut params = actor.init_params(rng).into_inner();
        params.extend(critic.init_params(rng).into_inner());
        Ok(Self { actor, critic, params })
    }

    pub fn from_params(obs_width: usize, hidden: usize, critic_outputs: usize, params: Vec<f64>) -> Result<Self> {
        let (actor, critic) = Self::networks(obs_width, hidden, critic_outputs)?;
        if params.len() != actor.param_count() + critic.param_count() {
            return Err(Error::Config(format!(
                "agent needs {} parameters, got {}",
                actor.param_count() + critic.param_count(),
                params.len()
            )));
        }
        Ok(Self { actor, critic, params })
    }

    pub fn actor(&self) -> &Mlp {
        &self.actor
    }

    pub fn critic(&self) -> &Mlp {
        &self.critic
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    pub fn actor_params(&self) -> &[f64] {
        &self.params[..self.actor.param_count()]
    }

    pub fn critic_params(&self) -> &[f64] {
        &self.params[self.actor.param_count()..]
    }

    pub fn obs_width(&self) -> usize {
        self.actor.input_width()
    }

    pub fn policy_into(&self, obs: &[f64], cache: &mut MlpCache, probs: &mut [f64]) {
        let logits = self.actor.forward_cached(self.actor_params(), obs, cache);
        softmax(logits, probs);
    }

    pub fn critic_into<'c>(&self, obs: &[f64], cache: &'c mut MlpCache) -> &'c [f64] {
        self.critic.forward_cached(self.critic_params(), obs, cache)
    }
}

/// Draws an index from a probability vector with one uniform draw.
pub fn sample_index<R: Rng + ?Sized>(probs: &[f64], rng: &mut R) -> usize {
    let u: f64 = rng.random();
    let mut acc = 0.0;
    for (i, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            return i;
        }
    }
    probs.iter().rposition(|p| *p > 0.0).unwrap_or(probs.len() - 1)
}
