use crate::error::{Error, Result};

/// Environment steps consumed so far (`n`) out of the training horizon (`N`).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct LifetimeClock {
    n: u64,
    horizon: u64,
}

impl LifetimeClock {
    pub fn new(horizon: u64) -> Result<Self> {
        Self::at(0, horizon)
    }

    pub fn at(n: u64, horizon: u64) -> Result<Self> {
        if horizon == 0 {
            return Err(Error::Config("training horizon must be positive".into()));
        }
        if n > horizon {
            return Err(Error::Usage(format!("clock position {n} exceeds horizon {horizon}")));
        }
        Ok(Self { n, horizon })
    }

    pub fn steps(&self) -> u64 {
        self.n
    }

    pub fn horizon(&self) -> u64 {
        self.horizon
    }

    pub fn remaining(&self) -> u64 {
        self.horizon - self.n
    }

    pub fn is_finished(&self) -> bool {
        self.n == self.horizon
    }

    /// `n / N`, in `[0, 1]`.
    pub fn lifetime_frac(&self) -> f64 {
        self.n as f64 / self.horizon as f64
    }

    /// Advances by `steps`, saturating at the horizon.
    pub fn advance(&mut self, steps: u64) {
        self.n = (self.n + steps).min(self.horizon);
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn advance_saturates() {
        let mut c = LifetimeClock::new(10).unwrap();
        c.advance(4);
        assert_eq!(c.lifetime_frac(), 0.4);
        c.advance(100);
        assert!(c.is_finished());
        assert_eq!(c.lifetime_frac(), 1.0);
        assert!(LifetimeClock::at(11, 10).is_err());
        assert!(LifetimeClock::new(0).is_err());
    }
}
