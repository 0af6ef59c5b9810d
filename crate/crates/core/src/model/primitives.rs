use serde::{Deserialize, Serialize};

use crate::error::{finite, Result};

/// Cost of the cognitive signal, `c(m1, t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum CostFamily {
    /// `m1^a / (b t)`
    Power { a: f64, b: f64 },
    /// `k m1 t`. Cost rises with type; fails monotonicity and is kept as a
    /// diagnostic family.
    Bilinear { k: f64 },
}

/// Output produced by the cognitive signal, `f(m1, t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum OutputFamily {
    /// `t + gamma m1`
    Affine { gamma: f64 },
    /// `t (1 + gamma m1)`
    Multiplicative { gamma: f64 },
}

/// Cost of the non-cognitive signal, `h(m2)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum NoncogFamily {
    /// `k m2^2 / 2`
    Quadratic { k: f64 },
    /// `k (e^m2 - 1 - m2)`
    Exponential { k: f64 },
}

impl CostFamily {
    pub fn value(&self, m1: f64, t: f64) -> f64 {
        match *self {
            CostFamily::Power { a, b } => m1.powf(a) / (b * t),
            CostFamily::Bilinear { k } => k * m1 * t,
        }
    }

    pub fn d_m1(&self, m1: f64, t: f64) -> f64 {
        match *self {
            CostFamily::Power { a, b } => {
                if m1 == 0.0 {
                    if a > 1.0 {
                        0.0
                    } else if a == 1.0 {
                        1.0 / (b * t)
                    } else {
                        f64::INFINITY
                    }
                } else {
                    a * m1.powf(a - 1.0) / (b * t)
                }
            }
            CostFamily::Bilinear { k } => k * t,
        }
    }
}

impl OutputFamily {
    pub fn value(&self, m1: f64, t: f64) -> f64 {
        match *self {
            OutputFamily::Affine { gamma } => t + gamma * m1,
            OutputFamily::Multiplicative { gamma } => t * (1.0 + gamma * m1),
        }
    }

    pub fn d_m1(&self, _m1: f64, t: f64) -> f64 {
        match *self {
            OutputFamily::Affine { gamma } => gamma,
            OutputFamily::Multiplicative { gamma } => gamma * t,
        }
    }

    pub fn d_t(&self, m1: f64, _t: f64) -> f64 {
        match *self {
            OutputFamily::Affine { .. } => 1.0,
            OutputFamily::Multiplicative { gamma } => 1.0 + gamma * m1,
        }
    }
}

impl NoncogFamily {
    pub fn value(&self, m2: f64) -> f64 {
        match *self {
            NoncogFamily::Quadratic { k } => 0.5 * k * m2 * m2,
            NoncogFamily::Exponential { k } => k * (m2.exp_m1() - m2),
        }
    }

    pub fn derivative(&self, m2: f64) -> f64 {
        match *self {
            NoncogFamily::Quadratic { k } => k * m2,
            NoncogFamily::Exponential { k } => k * m2.exp_m1(),
        }
    }
}

/// The primitives `(c, f, h, alpha, M)` of the market.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelPrimitives {
    pub cost: CostFamily,
    pub output: OutputFamily,
    pub noncog: NoncogFamily,
    /// Receiver's weight on the non-cognitive signal.
    pub alpha: f64,
    /// Resource bound `M` on `m1 + m2`.
    pub budget: f64,
}

/// First derivatives at a point, as used by the first-order conditions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Derivatives {
    pub c_m1: f64,
    pub f_m1: f64,
    pub f_t: f64,
    pub h_prime: f64,
}

impl ModelPrimitives {
    pub fn new(
        cost: CostFamily,
        output: OutputFamily,
        noncog: NoncogFamily,
        alpha: f64,
        budget: f64,
    ) -> Self {
        Self {
            cost,
            output,
            noncog,
            alpha,
            budget,
        }
    }

    /// `c = m1^2/(2t)`, `f = t`, `h = m2^2/2`, `alpha = 1`: the benchmark
    /// family with closed-form separating schedule `m1 = sqrt(t^2 - 1)`
    /// when `t_lo = 1`.
    pub fn quadratic_benchmark(budget: f64) -> Self {
        Self::new(
            CostFamily::Power { a: 2.0, b: 2.0 },
            OutputFamily::Affine { gamma: 0.0 },
            NoncogFamily::Quadratic { k: 1.0 },
            1.0,
            budget,
        )
    }

    pub fn with_budget(mut self, budget: f64) -> Self {
        self.budget = budget;
        self
    }

    pub fn with_alpha(mut self, alpha: f64) -> Self {
        self.alpha = alpha;
        self
    }

    #[inline]
    pub fn c(&self, m1: f64, t: f64) -> f64 {
        self.cost.value(m1, t)
    }

    #[inline]
    pub fn c_m1(&self, m1: f64, t: f64) -> f64 {
        self.cost.d_m1(m1, t)
    }

    #[inline]
    pub fn f(&self, m1: f64, t: f64) -> f64 {
        self.output.value(m1, t)
    }

    #[inline]
    pub fn f_m1(&self, m1: f64, t: f64) -> f64 {
        self.output.d_m1(m1, t)
    }

    #[inline]
    pub fn f_t(&self, m1: f64, t: f64) -> f64 {
        self.output.d_t(m1, t)
    }

    #[inline]
    pub fn h(&self, m2: f64) -> f64 {
        self.noncog.value(m2)
    }

    #[inline]
    pub fn h_prime(&self, m2: f64) -> f64 {
        self.noncog.derivative(m2)
    }

    /// Full-information payoff of type `t` sending `(m1, m2)` and being
    /// recognised as type `believed`.
    pub fn payoff(&self, m1: f64, m2: f64, believed: f64, t: f64) -> f64 {
        self.alpha * m2 + self.f(m1, believed) - self.h(m2) - self.c(m1, t)
    }

    pub fn eval_derivatives(&self, m1: f64, m2: f64, t: f64) -> Result<Derivatives> {
        let at = [m1, m2, t];
        Ok(Derivatives {
            c_m1: finite("c_m1", self.c_m1(m1, t), &at)?,
            f_m1: finite("f_m1", self.f_m1(m1, t), &at)?,
            f_t: finite("f_t", self.f_t(m1, t), &at)?,
            h_prime: finite("h'", self.h_prime(m2), &at)?,
        })
    }
}
