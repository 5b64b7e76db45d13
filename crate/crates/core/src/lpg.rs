//! Learned policy gradient (LPG and its lifetime-conditioned variant).
//!
//! A backward LSTM reads a trajectory and proposes, for every transition,
//! a policy target `pi_hat` and a bootstrap target `y_hat`. The agent then
//! follows `grad log pi * pi_hat - alpha_y * grad KL(y || y_hat)`.

use rand::Rng;

use crate::error::{Error, Result};
use crate::nn::dist::{entropy, entropy_logit_grad, softmax};
use crate::nn::{Lstm, LstmSpec, Mlp, ParamVector};

pub const BOOTSTRAP_CLAMP: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct LpgConfig {
    pub bootstrap_dim: usize,
    pub hidden: usize,
    pub alpha_y: f64,
    /// Policy entropy weight.
    pub beta0: f64,
    /// Bootstrap entropy weight.
    pub beta1: f64,
    /// L2 weight on `pi_hat`.
    pub beta2: f64,
    /// L2 weight on `y_hat`.
    pub beta3: f64,
    pub temporal: bool,
}

impl Default for LpgConfig {
    fn default() -> Self {
        Self {
            bootstrap_dim: 16,
            hidden: 32,
            alpha_y: 0.5,
            beta0: 0.05,
            beta1: 0.001,
            beta2: 0.005,
            beta3: 0.001,
            temporal: false,
        }
    }
}

impl LpgConfig {
    pub fn validate(&self) -> Result<()> {
        if self.bootstrap_dim == 0 {
            return Err(Error::Config("bootstrap_dim must be at least 1".into()));
        }
        if self.hidden == 0 {
            return Err(Error::Config("LPG hidden width must be positive".into()));
        }
        for (name, v) in [
            ("alpha_y", self.alpha_y),
            ("beta0", self.beta0),
            ("beta1", self.beta1),
            ("beta2", self.beta2),
            ("beta3", self.beta3),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::Config(format!("{name} must be finite and non-negative, got {v}")));
            }
        }
        Ok(())
    }

    pub fn input_width(&self) -> usize {
        4 + 2 * self.bootstrap_dim + if self.temporal { 2 } else { 0 }
    }

    pub fn lstm_spec(&self) -> Result<LstmSpec> {
        LstmSpec::new(self.input_width(), self.hidden, self.bootstrap_dim + 1)
    }
}

/// Per-transition network input.
#[derive(Debug, Clone, PartialEq)]
pub struct LpgInput {
    pub reward: f64,
    pub done: bool,
    pub discount: f64,
    pub action_prob: f64,
    pub bootstrap: Vec<f64>,
    pub next_bootstrap: Vec<f64>,
    /// `(n/N, log N)` when the objective is lifetime-conditioned.
    pub lifetime: Option<(f64, f64)>,
}

impl LpgInput {
    pub fn write_to(&self, out: &mut Vec<f64>) {
        out.push(self.reward);
        out.push(if self.done { 1.0 } else { 0.0 });
        out.push(self.discount);
        out.push(self.action_prob);
        out.extend_from_slice(&self.bootstrap);
        out.extend_from_slice(&self.next_bootstrap);
        if let Some((frac, log_n)) = self.lifetime {
            out.push(frac);
            out.push(log_n);
        }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = Vec::new();
        self.write_to(&mut v);
        v
    }
}

/// What the input builder needs to know about one transition.
#[derive(Debug, Clone, Copy)]
pub struct LpgStep<'a> {
    pub reward: f64,
    pub done: bool,
    pub action_prob: f64,
    pub bootstrap: &'a [f64],
    pub next_bootstrap: &'a [f64],
    /// Environment steps consumed when the transition was collected.
    pub stamp: u64,
}

/// One input per step, in order. `horizon` is the lifetime length `N`.
pub fn build_lpg_inputs(
    steps: &[LpgStep<'_>],
    config: &LpgConfig,
    discount: f64,
    horizon: u64,
) -> Result<Vec<LpgInput>> {
    if steps.is_empty() {
        return Err(Error::Usage("cannot build LPG inputs from an empty rollout".into()));
    }
    if horizon == 0 {
        return Err(Error::Config("horizon must be positive".into()));
    }
    let log_n = (horizon as f64).ln();
    steps
        .iter()
        .enumerate()
        .map(|(i, s)| {
            if !(s.action_prob > 0.0) {
                return Err(Error::Numeric(format!("step {i}: action probability {} is not positive", s.action_prob)));
            }
            if s.bootstrap.len() != config.bootstrap_dim || s.next_bootstrap.len() != config.bootstrap_dim {
                return Err(Error::Config(format!(
                    "step {i}: bootstrap vectors must have {} entries",
                    config.bootstrap_dim
                )));
            }
            Ok(LpgInput {
                reward: s.reward,
                done: s.done,
                discount,
                action_prob: s.action_prob,
                bootstrap: s.bootstrap.to_vec(),
                next_bootstrap: s.next_bootstrap.to_vec(),
                lifetime: config
                    .temporal
                    .then(|| ((s.stamp.min(horizon)) as f64 / horizon as f64, log_n)),
            })
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct LpgTargets {
    pub y_hat: Vec<f64>,
    pub pi_hat: f64,
}

pub(crate) fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

fn logit(y: f64) -> f64 {
    (y / (1.0 - y)).ln()
}

fn clamp_bootstrap(y: f64) -> f64 {
    y.clamp(BOOTSTRAP_CLAMP, 1.0 - BOOTSTRAP_CLAMP)
}

/// `KL(y || y_hat)` summed over independent Bernoulli coordinates. Both
/// arguments are clamped away from 0 and 1 first.
pub fn bernoulli_kl(y: &[f64], y_hat: &[f64]) -> f64 {
    y.iter()
        .zip(y_hat)
        .map(|(&a, &b)| {
            let (a, b) = (clamp_bootstrap(a), clamp_bootstrap(b));
            a * (a / b).ln() + (1.0 - a) * ((1.0 - a) / (1.0 - b)).ln()
        })
        .sum()
}

pub fn bernoulli_entropy(y: &[f64]) -> f64 {
    y.iter()
        .map(|&a| {
            let a = clamp_bootstrap(a);
            -a * a.ln() - (1.0 - a) * (1.0 - a).ln()
        })
        .sum()
}

/// The meta-learned target network.
#[derive(Debug, Clone)]
pub struct LpgNet {
    pub config: LpgConfig,
    lstm: Lstm,
    params: ParamVector,
}

impl PartialEq for LpgNet {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config && self.params == other.params
    }
}

impl LpgNet {
    pub fn param_count(config: &LpgConfig) -> Result<usize> {
        Ok(config.lstm_spec()?.param_count())
    }

    pub fn new(config: LpgConfig, params: ParamVector) -> Result<Self> {
        config.validate()?;
        let lstm = Lstm::new(config.lstm_spec()?)?;
        if params.len() != lstm.param_count() {
            return Err(Error::Config(format!(
                "LPG network needs {} parameters, got {}",
                lstm.param_count(),
                params.len()
            )));
        }
        Ok(Self { config, lstm, params })
    }

    pub fn random<R: Rng + ?Sized>(config: LpgConfig, rng: &mut R) -> Result<Self> {
        config.validate()?;
        let lstm = Lstm::new(config.lstm_spec()?)?;
        let params = lstm.init_params(rng);
        Self::new(config, params)
    }

    pub fn params(&self) -> &ParamVector {
        &self.params
    }

    pub fn lstm_spec(&self) -> &LstmSpec {
        self.lstm.spec()
    }

    /// Targets for one trajectory; the target at `t` depends on inputs `t..`.
    pub fn targets(&self, inputs: &[LpgInput]) -> Result<Vec<LpgTargets>> {
        lpg_targets(self, inputs)
    }
}

pub fn lpg_targets(net: &LpgNet, inputs: &[LpgInput]) -> Result<Vec<LpgTargets>> {
    if inputs.is_empty() {
        return Ok(Vec::new());
    }
    let width = net.config.input_width();
    let mut flat = Vec::with_capacity(inputs.len() * width);
    for (t, x) in inputs.iter().enumerate() {
        let before = flat.len();
        x.write_to(&mut flat);
        if flat.len() - before != width {
            return Err(Error::Config(format!(
                "step {t}: LPG input has {} fields, network expects {width}",
                flat.len() - before
            )));
        }
    }
    if flat.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite LPG input".into()));
    }
    let m = net.config.bootstrap_dim;
    let mut out = vec![0.0; inputs.len() * (m + 1)];
    net.lstm.scan_reversed_flat(&net.params, &flat, &mut out);
    Ok(out
        .chunks(m + 1)
        .map(|o| LpgTargets {
            y_hat: o[..m].iter().map(|&z| sigmoid(z)).collect(),
            pi_hat: o[m],
        })
        .collect())
}

/// One transition for the agent update.
#[derive(Debug, Clone, Copy)]
pub struct LpgUpdateSample<'a> {
    pub obs: &'a [f64],
    pub action: usize,
    pub targets: &'a LpgTargets,
}

#[derive(Debug, Clone)]
pub struct LpgUpdate {
    /// Batch value of the surrogate whose gradient is `delta`.
    pub surrogate: f64,
    /// Ascent direction over `[policy params, bootstrap params]`.
    pub delta: Vec<f64>,
}

/// Agent update direction. `policy` maps observations to logits,
/// `bootstrap` maps observations to the logits of `y`. Targets are held
/// fixed. The L2 penalties on the targets do not depend on the agent's
/// parameters and so contribute nothing here.
pub fn lpg_update(
    policy: &Mlp,
    bootstrap: &Mlp,
    params: &[f64],
    samples: &[LpgUpdateSample<'_>],
    config: &LpgConfig,
) -> Result<LpgUpdate> {
    let np = policy.param_count();
    if params.len() != np + bootstrap.param_count() {
        return Err(Error::Config(format!(
            "agent has {} parameters, expected {}",
            params.len(),
            np + bootstrap.param_count()
        )));
    }
    if bootstrap.output_width() != config.bootstrap_dim {
        return Err(Error::Config("bootstrap head width does not match bootstrap_dim".into()));
    }
    let mut delta = vec![0.0; params.len()];
    if samples.is_empty() {
        return Ok(LpgUpdate { surrogate: 0.0, delta });
    }
    let (theta_pi, theta_y) = params.split_at(np);
    let (d_pi, d_y) = delta.split_at_mut(np);
    let actions = policy.output_width();
    let m = config.bootstrap_dim;
    let mut pc = policy.cache();
    let mut bc = bootstrap.cache();
    let mut probs = vec![0.0; actions];
    let mut ent_grad = vec![0.0; actions];
    let mut cot_pi = vec![0.0; actions];
    let mut cot_y = vec![0.0; m];
    let inv = 1.0 / samples.len() as f64;
    let mut surrogate = 0.0;
    for (i, s) in samples.iter().enumerate() {
        if s.targets.y_hat.len() != m || !s.targets.pi_hat.is_finite() {
            return Err(Error::Config(format!("sample {i}: malformed LPG targets")));
        }
        let logits = policy.forward_cached(theta_pi, s.obs, &mut pc);
        softmax(logits, &mut probs);
        let h = entropy(&probs);
        entropy_logit_grad(&probs, &mut ent_grad);
        for k in 0..actions {
            let indicator = if k == s.action { 1.0 } else { 0.0 };
            cot_pi[k] = inv * (s.targets.pi_hat * (indicator - probs[k]) + config.beta0 * ent_grad[k]);
        }
        policy.backward(theta_pi, &mut pc, &cot_pi, Some(d_pi), None);

        let z = bootstrap.forward_cached(theta_y, s.obs, &mut bc);
        let y: Vec<f64> = z.iter().map(|&v| clamp_bootstrap(sigmoid(v))).collect();
        let kl = bernoulli_kl(&y, &s.targets.y_hat);
        if !kl.is_finite() {
            return Err(Error::Numeric(format!("sample {i}: bootstrap divergence is not finite")));
        }
        for k in 0..m {
            let yk = y[k];
            let zk = logit(yk);
            let target_logit = logit(clamp_bootstrap(s.targets.y_hat[k]));
            let slope = yk * (1.0 - yk);
            cot_y[k] = inv * slope * (-config.alpha_y * (zk - target_logit) - config.beta1 * zk);
        }
        bootstrap.backward(theta_y, &mut bc, &cot_y, Some(d_y), None);

        surrogate += probs[s.action].ln() * s.targets.pi_hat - config.alpha_y * kl
            + config.beta0 * h
            + config.beta1 * bernoulli_entropy(&y);
    }
    if delta.iter().any(|v| !v.is_finite()) {
        return Err(Error::Numeric("non-finite LPG update".into()));
    }
    Ok(LpgUpdate {
        surrogate: surrogate * inv,
        delta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::nn::{finite_diff_grad, relative_error, Activation, MlpSpec};
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn small_config(temporal: bool) -> LpgConfig {
        LpgConfig {
            bootstrap_dim: 3,
            hidden: 5,
            temporal,
            ..LpgConfig::default()
        }
    }

    fn step<'a>(reward: f64, done: bool, prob: f64, y: &'a [f64], y2: &'a [f64], stamp: u64) -> LpgStep<'a> {
        LpgStep { reward, done, action_prob: prob, bootstrap: y, next_bootstrap: y2, stamp }
    }

    #[test]
    fn input_width_depends_on_mode() {
        let y = [0.2, 0.5, 0.7];
        let steps = [step(1.0, false, 0.4, &y, &y, 0)];
        let plain = build_lpg_inputs(&steps, &small_config(false), 0.99, 100).unwrap();
        assert_eq!(plain[0].to_vec().len(), 4 + 6);
        let ta = build_lpg_inputs(&steps, &small_config(true), 0.99, 100).unwrap();
        assert_eq!(ta[0].to_vec().len(), 4 + 6 + 2);
        assert_eq!(ta[0].to_vec()[..10], plain[0].to_vec()[..]);
    }

    #[test]
    fn lifetime_fields_come_from_stamps() {
        let y = [0.5; 3];
        let steps = [step(0.0, false, 0.5, &y, &y, 40), step(0.0, false, 0.5, &y, &y, 48)];
        let inputs = build_lpg_inputs(&steps, &small_config(true), 0.99, 2048).unwrap();
        assert_eq!(inputs[0].lifetime, Some((40.0 / 2048.0, 2048f64.ln())));
        assert_eq!(inputs[1].lifetime.unwrap().0, 48.0 / 2048.0);
    }

    #[test]
    fn explicit_three_step_inputs() {
        let ya = [0.1, 0.2, 0.3];
        let yb = [0.4, 0.5, 0.6];
        let yc = [0.7, 0.8, 0.9];
        let steps = [
            step(0.0, false, 0.25, &ya, &yb, 0),
            step(1.0, true, 0.5, &yb, &yc, 1),
            step(-0.5, false, 0.125, &ya, &yb, 2),
        ];
        let v: Vec<Vec<f64>> = build_lpg_inputs(&steps, &small_config(true), 0.9, 4)
            .unwrap()
            .iter()
            .map(LpgInput::to_vec)
            .collect();
        let l4 = 4f64.ln();
        assert_eq!(v[0], vec![0.0, 0.0, 0.9, 0.25, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.0, l4]);
        assert_eq!(v[1], vec![1.0, 1.0, 0.9, 0.5, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 0.25, l4]);
        assert_eq!(v[2], vec![-0.5, 0.0, 0.9, 0.125, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.5, l4]);
    }

    #[test]
    fn zero_probability_is_rejected() {
        let y = [0.5; 3];
        let steps = [step(0.0, false, 0.0, &y, &y, 0)];
        assert!(matches!(
            build_lpg_inputs(&steps, &small_config(false), 0.99, 10),
            Err(Error::Numeric(_))
        ));
    }

    fn random_inputs(rng: &mut ChaCha8Rng, config: &LpgConfig, len: usize) -> Vec<LpgInput> {
        let m = config.bootstrap_dim;
        (0..len)
            .map(|t| LpgInput {
                reward: rng.random_range(-1.0..1.0),
                done: rng.random_bool(0.2),
                discount: 0.99,
                action_prob: rng.random_range(0.05..1.0),
                bootstrap: (0..m).map(|_| rng.random_range(0.01..0.99)).collect(),
                next_bootstrap: (0..m).map(|_| rng.random_range(0.01..0.99)).collect(),
                lifetime: config.temporal.then_some((t as f64 / len as f64, 7.0)),
            })
            .collect()
    }

    #[test]
    fn zero_network_gives_neutral_targets() {
        let config = small_config(true);
        let net = LpgNet::new(config.clone(), ParamVector::zeros(LpgNet::param_count(&config).unwrap())).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for t in net.targets(&random_inputs(&mut rng, &config, 6)).unwrap() {
            assert_eq!(t.pi_hat, 0.0);
            assert!(t.y_hat.iter().all(|&y| y == 0.5));
        }
    }

    #[test]
    fn targets_ignore_earlier_inputs() {
        let config = small_config(true);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let net = LpgNet::random(config.clone(), &mut rng).unwrap();
        let inputs = random_inputs(&mut rng, &config, 8);
        let base = net.targets(&inputs).unwrap();
        let mut changed = inputs.clone();
        changed[4].reward += 3.0;
        let after = net.targets(&changed).unwrap();
        for t in 0..8 {
            if t > 4 {
                assert_eq!(base[t], after[t]);
            } else {
                assert_ne!(base[t], after[t]);
            }
        }
    }

    #[test]
    fn single_step_matches_manual_gated_update() {
        let config = small_config(false);
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let net = LpgNet::random(config.clone(), &mut rng).unwrap();
        let inputs = random_inputs(&mut rng, &config, 1);
        let x = inputs[0].to_vec();
        let w = crate::nn::LstmWeights::unflatten(net.lstm_spec(), net.params()).unwrap();
        let (ni, nh) = (config.input_width(), config.hidden);
        let gate = |r: usize| -> f64 {
            w.gate_bias[r] + (0..ni).map(|j| w.input_weights[r * ni + j] * x[j]).sum::<f64>()
        };
        let mut h = vec![0.0; nh];
        for k in 0..nh {
            let i = sigmoid(gate(k));
            let g = gate(2 * nh + k).tanh();
            let o = sigmoid(gate(3 * nh + k));
            h[k] = o * (i * g).tanh();
        }
        let m = config.bootstrap_dim;
        let out: Vec<f64> = (0..=m)
            .map(|r| w.readout_bias[r] + (0..nh).map(|k| w.readout_weights[r * nh + k] * h[k]).sum::<f64>())
            .collect();
        let t = &net.targets(&inputs).unwrap()[0];
        assert!((t.pi_hat - out[m]).abs() < 1e-14);
        for k in 0..m {
            assert!((t.y_hat[k] - sigmoid(out[k])).abs() < 1e-14);
        }
    }

    #[test]
    fn kl_is_nonnegative_and_zero_only_at_equality() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..1000 {
            let a: Vec<f64> = (0..4).map(|_| rng.random_range(0.001..0.999)).collect();
            let b: Vec<f64> = (0..4).map(|_| rng.random_range(0.001..0.999)).collect();
            assert!(bernoulli_kl(&a, &b) > 0.0);
            assert!(bernoulli_kl(&a, &a).abs() < 1e-15);
        }
    }

    fn heads(obs: usize, m: usize) -> (Mlp, Mlp) {
        (
            Mlp::new(MlpSpec::new(vec![obs, 2], Activation::Tanh, true).unwrap()).unwrap(),
            Mlp::new(MlpSpec::new(vec![obs, m], Activation::Tanh, true).unwrap()).unwrap(),
        )
    }

    #[test]
    fn identity_targets_give_only_regulariser_motion() {
        let config = LpgConfig { bootstrap_dim: 2, beta0: 0.0, beta1: 0.0, ..LpgConfig::default() };
        let (pi, by) = heads(2, 2);
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let params: Vec<f64> = (0..pi.param_count() + by.param_count())
            .map(|_| rng.random_range(-1.0..1.0))
            .collect();
        let obs = [[1.0, 0.0], [0.0, 1.0]];
        let targets: Vec<LpgTargets> = obs
            .iter()
            .map(|o| LpgTargets {
                y_hat: by
                    .forward(&params[pi.param_count()..], o)
                    .unwrap()
                    .iter()
                    .map(|&z| sigmoid(z))
                    .collect(),
                pi_hat: 0.0,
            })
            .collect();
        let samples: Vec<LpgUpdateSample> = (0..2)
            .map(|i| LpgUpdateSample { obs: &obs[i], action: i, targets: &targets[i] })
            .collect();
        let u = lpg_update(&pi, &by, &params, &samples, &config).unwrap();
        assert!(u.delta.iter().all(|d| d.abs() < 1e-12), "{:?}", u.delta);
    }

    #[test]
    fn advantage_targets_reduce_to_policy_gradient() {
        let config = LpgConfig {
            bootstrap_dim: 2,
            alpha_y: 0.0,
            beta0: 0.0,
            beta1: 0.0,
            beta2: 0.0,
            beta3: 0.0,
            ..LpgConfig::default()
        };
        let (pi, by) = heads(2, 2);
        let params = vec![0.3, -0.2, 0.1, 0.4, 0.05, -0.1, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0];
        let obs = [[1.0, 0.0], [0.0, 1.0]];
        let advantages = [0.7, -1.3];
        let targets: Vec<LpgTargets> = advantages
            .iter()
            .map(|&a| LpgTargets { y_hat: vec![0.3, 0.6], pi_hat: a })
            .collect();
        let samples: Vec<LpgUpdateSample> = (0..2)
            .map(|i| LpgUpdateSample { obs: &obs[i], action: 1 - i, targets: &targets[i] })
            .collect();
        let u = lpg_update(&pi, &by, &params, &samples, &config).unwrap();
        let mut expected = vec![0.0; pi.param_count()];
        for s in &samples {
            let logits = pi.forward(&params[..6], s.obs).unwrap();
            let mut p = [0.0; 2];
            softmax(&logits, &mut p);
            let cot: Vec<f64> = (0..2)
                .map(|k| s.targets.pi_hat * ((k == s.action) as u8 as f64 - p[k]) / 2.0)
                .collect();
            let g = pi.grad(&params[..6], s.obs, &cot).unwrap();
            for (e, v) in expected.iter_mut().zip(g.wrt_params) {
                *e += v;
            }
        }
        for k in 0..6 {
            assert!((u.delta[k] - expected[k]).abs() < 1e-15);
        }
        assert!(u.delta[6..].iter().all(|&d| d == 0.0));
    }

    #[test]
    fn update_matches_finite_differences_of_surrogate() {
        let config = LpgConfig { bootstrap_dim: 3, ..LpgConfig::default() };
        let (pi, by) = heads(2, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let obs = [[1.0, 0.0], [0.0, 1.0]];
        for _ in 0..100 {
            let params: Vec<f64> = (0..pi.param_count() + by.param_count())
                .map(|_| rng.random_range(-1.0..1.0))
                .collect();
            let targets: Vec<LpgTargets> = (0..4)
                .map(|_| LpgTargets {
                    y_hat: (0..3).map(|_| rng.random_range(0.05..0.95)).collect(),
                    pi_hat: rng.random_range(-2.0..2.0),
                })
                .collect();
            let samples: Vec<LpgUpdateSample> = (0..4)
                .map(|i| LpgUpdateSample { obs: &obs[i % 2], action: i % 2, targets: &targets[i] })
                .collect();
            let u = lpg_update(&pi, &by, &params, &samples, &config).unwrap();
            let fd = finite_diff_grad(
                |theta| lpg_update(&pi, &by, theta, &samples, &config).unwrap().surrogate,
                &params,
                1e-6,
            )
            .unwrap();
            for (a, b) in u.delta.iter().zip(&fd) {
                assert!(relative_error(*a, *b, 1e-4) < 1e-6, "{a} vs {b}");
            }
        }
    }
}
