//! Learned drift functions (LPO and its lifetime-conditioned variant).
//!
//! The drift network sees only features that vanish at `p = 1` and has no
//! bias terms, so its output is exactly zero at the identity policy for
//! every parameter setting. Non-negativity and a zero derivative at the
//! identity are not forced by this parameterisation; [`audit_drift_conditions`]
//! measures how far a given network departs from them.

use std::sync::Mutex;

use rand::Rng;

use crate::clock::LifetimeClock;
use crate::error::{Error, Result};
use crate::nn::dist::{entropy_logit_grad, softmax};
use crate::nn::{Activation, Mlp, MlpCache, MlpSpec, ParamVector};

pub const RATIO_MIN: f64 = 1e-4;
pub const RATIO_MAX: f64 = 1e4;
pub const BASE_FEATURES: usize = 8;
pub const DEFAULT_DRIFT_HIDDEN: usize = 128;

fn check_ratio(p: f64) -> Result<()> {
    if !(p > 0.0) || !p.is_finite() {
        return Err(Error::Domain(format!("probability ratio must be positive and finite, got {p}")));
    }
    Ok(())
}

fn clamp_ratio(p: f64) -> f64 {
    p.clamp(RATIO_MIN, RATIO_MAX)
}

fn base_features(p: f64, a: f64) -> [f64; BASE_FEATURES] {
    let d = 1.0 - p;
    let l = p.ln();
    [d, d * d, d * a, d * d * a, l, l * l, l * a, l * l * a]
}

/// d(base features)/dp.
fn base_jacobian(p: f64, a: f64) -> [f64; BASE_FEATURES] {
    let d = 1.0 - p;
    let l = p.ln();
    [
        -1.0,
        -2.0 * d,
        -a,
        -2.0 * d * a,
        1.0 / p,
        2.0 * l / p,
        a / p,
        2.0 * l * a / p,
    ]
}

/// Drift inputs for one transition. `temporal` is `n/N` times `base` and is
/// present only for lifetime-conditioned drifts.
#[derive(Debug, Clone, PartialEq)]
pub struct DriftFeatures {
    pub base: [f64; BASE_FEATURES],
    pub temporal: Option<[f64; BASE_FEATURES]>,
    pub ratio: f64,
    pub advantage: f64,
    pub lifetime_frac: Option<f64>,
}

impl DriftFeatures {
    pub fn width(&self) -> usize {
        if self.temporal.is_some() {
            2 * BASE_FEATURES
        } else {
            BASE_FEATURES
        }
    }

    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.base.to_vec();
        if let Some(t) = &self.temporal {
            v.extend_from_slice(t);
        }
        v
    }

    fn from_frac(p: f64, a: f64, frac: Option<f64>) -> Result<Self> {
        check_ratio(p)?;
        if !a.is_finite() {
            return Err(Error::Numeric(format!("advantage {a} is not finite")));
        }
        let pc = clamp_ratio(p);
        let base = base_features(pc, a);
        let temporal = frac.map(|f| base.map(|b| f * b));
        Ok(Self {
            base,
            temporal,
            ratio: pc,
            advantage: a,
            lifetime_frac: frac,
        })
    }
}

/// Builds drift inputs; the ratio is clamped to `[RATIO_MIN, RATIO_MAX]`.
pub fn drift_features(p: f64, advantage: f64, clock: Option<&LifetimeClock>) -> Result<DriftFeatures> {
    DriftFeatures::from_frac(p, advantage, clock.map(LifetimeClock::lifetime_frac))
}

/// Anything that can act as the drift term of a mirror-learning objective.
pub trait DriftObjective: Send + Sync {
    fn drift(&self, ratio: f64, advantage: f64, lifetime_frac: f64) -> Result<f64>;

    fn drift_dp(&self, ratio: f64, advantage: f64, lifetime_frac: f64) -> Result<f64>;

    /// Batched derivative; implementations may override to reuse scratch space.
    fn drift_dp_batch(
        &self,
        ratios: &[f64],
        advantages: &[f64],
        fracs: &[f64],
        out: &mut [f64],
    ) -> Result<()> {
        for i in 0..ratios.len() {
            out[i] = self.drift_dp(ratios[i], advantages[i], fracs[i])?;
        }
        Ok(())
    }
}

/// The drift that makes the mirror objective equal PPO's clipped surrogate:
/// `max(0, (p - clip(p, 1-eps, 1+eps)) * A)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PpoClipDrift {
    pub clip_eps: f64,
}

impl PpoClipDrift {
    pub fn new(clip_eps: f64) -> Result<Self> {
        if !(clip_eps > 0.0 && clip_eps < 1.0) {
            return Err(Error::Config(format!("clip_eps must lie in (0, 1), got {clip_eps}")));
        }
        Ok(Self { clip_eps })
    }

    fn excess(&self, p: f64) -> f64 {
        p - p.clamp(1.0 - self.clip_eps, 1.0 + self.clip_eps)
    }
}

pub fn ppo_reference_drift(p: f64, advantage: f64, clip_eps: f64) -> Result<f64> {
    PpoClipDrift::new(clip_eps)?.drift(p, advantage, 0.0)
}

impl DriftObjective for PpoClipDrift {
    fn drift(&self, ratio: f64, advantage: f64, _: f64) -> Result<f64> {
        check_ratio(ratio)?;
        Ok((self.excess(ratio) * advantage).max(0.0))
    }

    fn drift_dp(&self, ratio: f64, advantage: f64, _: f64) -> Result<f64> {
        check_ratio(ratio)?;
        Ok(if self.excess(ratio) * advantage > 0.0 {
            advantage
        } else {
            0.0
        })
    }
}

/// No drift at all: the objective reduces to the importance-weighted return.
#[derive(Debug, Clone, Copy, Default)]
pub struct ZeroDrift;

impl DriftObjective for ZeroDrift {
    fn drift(&self, ratio: f64, _: f64, _: f64) -> Result<f64> {
        check_ratio(ratio)?;
        Ok(0.0)
    }

    fn drift_dp(&self, ratio: f64, _: f64, _: f64) -> Result<f64> {
        check_ratio(ratio)?;
        Ok(0.0)
    }
}

/// Bias-free tanh MLP over the drift features, scalar output.
#[derive(Debug)]
pub struct DriftNet {
    mlp: Mlp,
    params: ParamVector,
    temporal: bool,
    scratch: Mutex<Vec<MlpCache>>,
}

impl Clone for DriftNet {
    fn clone(&self) -> Self {
        Self {
            mlp: self.mlp.clone(),
            params: self.params.clone(),
            temporal: self.temporal,
            scratch: Mutex::new(Vec::new()),
        }
    }
}

impl PartialEq for DriftNet {
    fn eq(&self, other: &Self) -> bool {
        self.temporal == other.temporal && self.mlp.spec() == other.mlp.spec() && self.params == other.params
    }
}

impl DriftNet {
    pub fn spec(temporal: bool, hidden: usize) -> Result<MlpSpec> {
        let input = if temporal { 2 * BASE_FEATURES } else { BASE_FEATURES };
        MlpSpec::new(vec![input, hidden, 1], Activation::Tanh, false)
    }

    pub fn param_count(temporal: bool, hidden: usize) -> Result<usize> {
        Ok(Self::spec(temporal, hidden)?.param_count())
    }

    pub fn new(temporal: bool, hidden: usize, params: ParamVector) -> Result<Self> {
        let mlp = Mlp::new(Self::spec(temporal, hidden)?)?;
        if params.len() != mlp.param_count() {
            return Err(Error::Config(format!(
                "drift net with hidden width {hidden} needs {} parameters, got {}",
                mlp.param_count(),
                params.len()
            )));
        }
        Ok(Self {
            mlp,
            params,
            temporal,
            scratch: Mutex::new(Vec::new()),
        })
    }

    pub fn random<R: Rng + ?Sized>(temporal: bool, hidden: usize, rng: &mut R) -> Result<Self> {
        let mlp = Mlp::new(Self::spec(temporal, hidden)?)?;
        let params = mlp.init_params(rng);
        Self::new(temporal, hidden, params)
    }

    pub fn is_temporal(&self) -> bool {
        self.temporal
    }

    pub fn hidden_width(&self) -> usize {
        self.mlp.spec().layer_widths[1]
    }

    pub fn mlp_spec(&self) -> &MlpSpec {
        self.mlp.spec()
    }

    pub fn params(&self) -> &ParamVector {
        &self.params
    }

    fn features(&self, p: f64, a: f64, frac: f64) -> Result<DriftFeatures> {
        DriftFeatures::from_frac(p, a, self.temporal.then_some(frac))
    }

    fn with_cache<T>(&self, f: impl FnOnce(&mut MlpCache) -> T) -> T {
        let mut cache = self
            .scratch
            .lock()
            .expect("drift scratch lock")
            .pop()
            .unwrap_or_else(|| self.mlp.cache());
        let out = f(&mut cache);
        self.scratch.lock().expect("drift scratch lock").push(cache);
        out
    }

    pub fn value(&self, features: &DriftFeatures) -> Result<f64> {
        if features.width() != self.mlp.input_width() {
            return Err(Error::Config(format!(
                "drift net expects {} features, got {}",
                self.mlp.input_width(),
                features.width()
            )));
        }
        let x = features.to_vec();
        Ok(self.with_cache(|cache| self.mlp.forward_cached(&self.params, &x, cache)[0]))
    }

    fn dp_from_features(&self, features: &DriftFeatures, cache: &mut MlpCache, grad_x: &mut [f64]) -> f64 {
        let x = features.to_vec();
        self.mlp.forward_cached(&self.params, &x, cache);
        self.mlp.backward(&self.params, cache, &[1.0], None, Some(grad_x));
        let in_range = features.ratio > RATIO_MIN && features.ratio < RATIO_MAX;
        if !in_range {
            return 0.0;
        }
        let jac = base_jacobian(features.ratio, features.advantage);
        let scale = features.lifetime_frac.unwrap_or(0.0);
        let mut total = 0.0;
        for k in 0..BASE_FEATURES {
            let mut g = grad_x[k];
            if features.temporal.is_some() {
                g += scale * grad_x[BASE_FEATURES + k];
            }
            total += g * jac[k];
        }
        total
    }
}

pub fn drift_value(net: &DriftNet, features: &DriftFeatures) -> Result<f64> {
    net.value(features)
}

/// Analytic dD/dp by the chain rule through the feature map. Outside the
/// ratio clamp interval the drift is constant in `p`, so the derivative is 0.
pub fn drift_dp(net: &DriftNet, p: f64, advantage: f64, clock: Option<&LifetimeClock>) -> Result<f64> {
    if net.is_temporal() && clock.is_none() {
        return Err(Error::Config("a lifetime-conditioned drift needs a clock".into()));
    }
    let features = DriftFeatures::from_frac(
        p,
        advantage,
        if net.is_temporal() { clock.map(LifetimeClock::lifetime_frac) } else { None },
    )?;
    let mut grad_x = vec![0.0; features.width()];
    Ok(net.with_cache(|cache| net.dp_from_features(&features, cache, &mut grad_x)))
}

impl DriftObjective for DriftNet {
    fn drift(&self, ratio: f64, advantage: f64, lifetime_frac: f64) -> Result<f64> {
        self.value(&self.features(ratio, advantage, lifetime_frac)?)
    }

    fn drift_dp(&self, ratio: f64, advantage: f64, lifetime_frac: f64) -> Result<f64> {
        let features = self.features(ratio, advantage, lifetime_frac)?;
        let mut grad_x = vec![0.0; features.width()];
        Ok(self.with_cache(|cache| self.dp_from_features(&features, cache, &mut grad_x)))
    }

    fn drift_dp_batch(&self, ratios: &[f64], advantages: &[f64], fracs: &[f64], out: &mut [f64]) -> Result<()> {
        let mut grad_x = vec![0.0; self.mlp.input_width()];
        self.with_cache(|cache| {
            for i in 0..ratios.len() {
                let features = self.features(ratios[i], advantages[i], fracs[i])?;
                out[i] = self.dp_from_features(&features, cache, &mut grad_x);
            }
            Ok(())
        })
    }
}

/// One transition as seen by the policy objective.
#[derive(Debug, Clone, Copy)]
pub struct PolicySample<'a> {
    pub obs: &'a [f64],
    pub action: usize,
    pub advantage: f64,
    pub old_prob: f64,
    pub lifetime_frac: f64,
}

/// Batch mean of `p*A - D(p, A, n/N)` and its gradient over policy parameters.
#[derive(Debug, Clone)]
pub struct PolicyObjective {
    pub value: f64,
    pub grad: Vec<f64>,
}

/// Gradient (ascent direction) of the mirror-learning objective. With
/// `p = pi(a|s) / pi_old(a|s)` each transition contributes
/// `(A - dD/dp) * p * grad log pi(a|s)`, averaged over the batch.
/// `policy` maps observations to action logits.
pub fn lpo_policy_objective_grad(
    drift: &dyn DriftObjective,
    policy: &Mlp,
    params: &[f64],
    batch: &[PolicySample<'_>],
) -> Result<PolicyObjective> {
    let mut grad = vec![0.0; policy.param_count()];
    let value = accumulate_policy_grad(drift, policy, params, batch, 0.0, true, &mut grad)?;
    Ok(PolicyObjective { value, grad })
}

/// Adds the batch-mean objective gradient, plus `entropy_coef` times the
/// gradient of the mean policy entropy, into `grad`. Returns the objective
/// value when `want_value` is set and 0 otherwise.
pub fn accumulate_policy_grad(
    drift: &dyn DriftObjective,
    policy: &Mlp,
    params: &[f64],
    batch: &[PolicySample<'_>],
    entropy_coef: f64,
    want_value: bool,
    grad: &mut [f64],
) -> Result<f64> {
    if batch.is_empty() {
        return Ok(0.0);
    }
    let actions = policy.output_width();
    let mut caches: Vec<MlpCache> = Vec::with_capacity(batch.len());
    let mut probs = vec![0.0; batch.len() * actions];
    let mut ratios = Vec::with_capacity(batch.len());
    for (i, s) in batch.iter().enumerate() {
        if !(s.old_prob > 0.0) {
            return Err(Error::Domain(format!("transition {i}: old probability {} is not positive", s.old_prob)));
        }
        if !s.advantage.is_finite() {
            return Err(Error::Numeric(format!("transition {i}: advantage is not finite")));
        }
        let mut cache = policy.cache();
        let pi = &mut probs[i * actions..(i + 1) * actions];
        softmax(policy.forward_cached(params, s.obs, &mut cache), pi);
        let p = pi[s.action] / s.old_prob;
        if !p.is_finite() || p <= 0.0 {
            return Err(Error::Numeric(format!("transition {i}: probability ratio {p} is not finite and positive")));
        }
        ratios.push(p);
        caches.push(cache);
    }
    let advantages: Vec<f64> = batch.iter().map(|s| s.advantage).collect();
    let fracs: Vec<f64> = batch.iter().map(|s| s.lifetime_frac).collect();
    let mut dps = vec![0.0; batch.len()];
    drift.drift_dp_batch(&ratios, &advantages, &fracs, &mut dps)?;
    let inv = 1.0 / batch.len() as f64;
    let mut value = 0.0;
    let mut cot = vec![0.0; actions];
    let mut ent = vec![0.0; actions];
    for (i, s) in batch.iter().enumerate() {
        let p = ratios[i];
        if want_value {
            value += p * s.advantage - drift.drift(p, s.advantage, s.lifetime_frac)?;
        }
        let coef = (s.advantage - dps[i]) * p * inv;
        let pi = &probs[i * actions..(i + 1) * actions];
        if entropy_coef != 0.0 {
            entropy_logit_grad(pi, &mut ent);
        }
        for (k, c) in cot.iter_mut().enumerate() {
            let indicator = if k == s.action { 1.0 } else { 0.0 };
            *c = coef * (indicator - pi[k]);
            if entropy_coef != 0.0 {
                *c += entropy_coef * inv * ent[k];
            }
        }
        if cot.iter().all(|c| *c == 0.0) {
            continue;
        }
        policy.backward(params, &mut caches[i], &cot, Some(grad), None);
    }
    Ok(value * inv)
}

/// Evenly spaced points from `lo` to `hi` inclusive.
pub fn linspace(lo: f64, hi: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![lo],
        _ => (0..count)
            .map(|i| lo + (hi - lo) * i as f64 / (count - 1) as f64)
            .collect(),
    }
}

/// How far a drift departs from the mirror-learning conditions on a grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DriftAudit {
    pub points: usize,
    /// Share of grid points with a negative drift value.
    pub negative_fraction: f64,
    pub min_value: f64,
    /// Largest |dD/dp| along `p = 1`.
    pub max_abs_dp_at_identity: f64,
    /// Largest |D| along `p = 1`; zero for any network built on the drift features.
    pub max_abs_value_at_identity: f64,
}

pub fn audit_drift_conditions(
    drift: &dyn DriftObjective,
    lifetime_frac: f64,
    p_range: (f64, f64),
    a_range: (f64, f64),
    resolution: usize,
) -> Result<DriftAudit> {
    if resolution < 2 {
        return Err(Error::Config("audit resolution must be at least 2".into()));
    }
    let ps = linspace(p_range.0, p_range.1, resolution);
    let advantages = linspace(a_range.0, a_range.1, resolution);
    let mut negative = 0usize;
    let mut min_value = f64::INFINITY;
    for &p in &ps {
        for &a in &advantages {
            let v = drift.drift(p, a, lifetime_frac)?;
            if v < 0.0 {
                negative += 1;
            }
            min_value = min_value.min(v);
        }
    }
    let mut max_dp = 0.0f64;
    let mut max_v = 0.0f64;
    for &a in &advantages {
        max_dp = max_dp.max(drift.drift_dp(1.0, a, lifetime_frac)?.abs());
        max_v = max_v.max(drift.drift(1.0, a, lifetime_frac)?.abs());
    }
    let points = ps.len() * advantages.len();
    Ok(DriftAudit {
        points,
        negative_fraction: negative as f64 / points as f64,
        min_value,
        max_abs_dp_at_identity: max_dp,
        max_abs_value_at_identity: max_v,
    })
}
