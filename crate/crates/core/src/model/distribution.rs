use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum DensityShape {
    Uniform,
    /// Density proportional to `exp(-rate (t - t_lo))`; negative rates tilt
    /// mass towards the top.
    TruncatedExponential { rate: f64 },
}

/// Prior over types on `[t_lo, t_hi]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TypeDistribution {
    pub t_lo: f64,
    pub t_hi: f64,
    pub shape: DensityShape,
}

impl TypeDistribution {
    pub fn new(t_lo: f64, t_hi: f64, shape: DensityShape) -> Result<Self> {
        if !(t_lo > 0.0 && t_hi > t_lo && t_hi.is_finite()) {
            return Err(Error::InvariantViolation {
                what: "type support must satisfy 0 < t_lo < t_hi".into(),
                at: vec![t_lo, t_hi],
            });
        }
        if let DensityShape::TruncatedExponential { rate } = shape {
            if !rate.is_finite() {
                return Err(Error::InvariantViolation {
                    what: "exponential rate must be finite".into(),
                    at: vec![rate],
                });
            }
        }
        Ok(Self { t_lo, t_hi, shape })
    }

    pub fn uniform(t_lo: f64, t_hi: f64) -> Result<Self> {
        Self::new(t_lo, t_hi, DensityShape::Uniform)
    }

    pub fn span(&self) -> f64 {
        self.t_hi - self.t_lo
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.t_lo && t <= self.t_hi
    }

    /// Normalising constant of the exponential shape, `int_lo^hi e^{-r(t-lo)}`.
    fn exp_norm(rate: f64, span: f64) -> f64 {
        if rate == 0.0 {
            span
        } else {
            -(-rate * span).exp_m1() / rate
        }
    }

    pub fn density(&self, t: f64) -> f64 {
        if !self.contains(t) {
            return 0.0;
        }
        match self.shape {
            DensityShape::Uniform => 1.0 / self.span(),
            DensityShape::TruncatedExponential { rate } => {
                (-rate * (t - self.t_lo)).exp() / Self::exp_norm(rate, self.span())
            }
        }
    }

    pub fn cdf(&self, t: f64) -> f64 {
        1.0 - self.survival(t)
    }

    /// `1 - G(t)`, computed without cancellation near `t_hi`.
    pub fn survival(&self, t: f64) -> f64 {
        if t <= self.t_lo {
            return 1.0;
        }
        if t >= self.t_hi {
            return 0.0;
        }
        match self.shape {
            DensityShape::Uniform => (self.t_hi - t) / self.span(),
            DensityShape::TruncatedExponential { rate } => {
                let tail = self.t_hi - t;
                let mass = if rate == 0.0 {
                    tail
                } else {
                    (-rate * (t - self.t_lo)).exp() * Self::exp_norm(rate, tail)
                };
                mass / Self::exp_norm(rate, self.span())
            }
        }
    }
}
