use crate::error::{Error, Result};

/// Exponential moving average of squared amplitude:
/// `P ← α·P + (1−α)·z²`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EmaPower {
    value: f64,
    alpha: f64,
}

impl EmaPower {
    /// `alpha` must lie in `[0, 1)`; zero is accepted and tracks `z²` exactly.
    pub fn new(alpha: f64, value: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&alpha) {
            return Err(Error::contract(format!("EMA forgetting factor {alpha} not in [0, 1)")));
        }
        if !(value >= 0.0 && value.is_finite()) {
            return Err(Error::contract(format!("EMA power must be finite and non-negative, got {value}")));
        }
        Ok(EmaPower { value, alpha })
    }

    pub fn value(&self) -> f64 {
        self.value
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    #[inline]
    pub fn update(&mut self, z: f64) -> f64 {
        self.value = self.alpha * self.value + (1.0 - self.alpha) * z * z;
        self.value
    }

    /// Value-returning form of [`EmaPower::update`].
    pub fn updated(mut self, z: f64) -> Self {
        self.update(z);
        self
    }
}
