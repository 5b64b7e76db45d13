use std::ops::Deref;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Flat parameter storage shared by policies, drift nets and LPG nets.
///
/// Every entry is finite. The layout is owned by whichever architecture
/// produced the vector; this type only guards the numeric invariant.
#[derive(Debug, Clone, PartialEq)]
pub struct ParamVector(Vec<f64>);

impl ParamVector {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        if let Some(i) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!(
                "parameter {i} is not finite ({})",
                values[i]
            )));
        }
        Ok(Self(values))
    }

    pub fn zeros(len: usize) -> Self {
        Self(vec![0.0; len])
    }

    /// Vector of independent standard-normal draws.
    pub fn standard_normal<R: Rng + ?Sized>(len: usize, rng: &mut R) -> Self {
        Self((0..len).map(|_| rng.sample(StandardNormal)).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    /// `self + scale * direction`; fails if the result leaves the finite range.
    pub fn offset(&self, direction: &[f64], scale: f64) -> Result<Self> {
        if direction.len() != self.len() {
            return Err(Error::Config(format!(
                "offset direction has {} entries, parameters have {}",
                direction.len(),
                self.len()
            )));
        }
        Self::new(
            self.0
                .iter()
                .zip(direction)
                .map(|(p, d)| p + scale * d)
                .collect(),
        )
    }

    /// Applies an in-place update and re-checks finiteness.
    pub fn update_with(&mut self, f: impl FnOnce(&mut [f64])) -> Result<()> {
        f(&mut self.0);
        if let Some(i) = self.0.iter().position(|v| !v.is_finite()) {
            return Err(Error::Numeric(format!("parameter {i} became non-finite")));
        }
        Ok(())
    }

    pub fn l2_norm(&self) -> f64 {
        l2_norm(&self.0)
    }
}

impl Deref for ParamVector {
    type Target = [f64];

    fn deref(&self) -> &[f64] {
        &self.0
    }
}

pub fn l2_norm(values: &[f64]) -> f64 {
    values.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Scales `grad` in place so its L2 norm does not exceed `max_norm`.
/// Returns the norm before clipping. A non-positive `max_norm` disables clipping.
pub fn clip_grad_norm(grad: &mut [f64], max_norm: f64) -> f64 {
    let norm = l2_norm(grad);
    if max_norm > 0.0 && norm > max_norm {
        let scale = max_norm / norm;
        grad.iter_mut().for_each(|g| *g *= scale);
    }
    norm
}
