use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Failures raised while validating primitives, integrating schedules,
/// locating thresholds or assembling an equilibrium.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("non-finite value from {what} at {at:?}")]
    NonFiniteEvaluation { what: &'static str, at: Vec<f64> },

    #[error("root of {what} not bracketed on [{lo}, {hi}] (f(lo) = {f_lo}, f(hi) = {f_hi})")]
    RootNotBracketed {
        what: &'static str,
        lo: f64,
        hi: f64,
        f_lo: f64,
        f_hi: f64,
    },

    #[error("adaptive quadrature on [{lo}, {hi}] stopped at error estimate {estimate:e}")]
    QuadratureFailure { lo: f64, hi: f64, estimate: f64 },

    #[error("f_t = {f_t} is not positive at (m1, t) = ({m1}, {t})")]
    DegenerateDenominator { m1: f64, t: f64, f_t: f64 },

    #[error("schedule stalled: dt/dm1 = {slope} at (m1, t) = ({m1}, {t})")]
    StalledIntegration { m1: f64, t: f64, slope: f64 },

    #[error("step size underflow at m1 = {m1} (h = {h:e})")]
    StepUnderflow { m1: f64, h: f64 },

    #[error("no pooling threshold: {reason}")]
    NoPoolRoot { reason: String },

    #[error("indifference gap changes sign {count} times on the scan grid")]
    MultipleSignChanges { count: usize },

    #[error("invariant violated: {what} at {at:?}")]
    InvariantViolation { what: String, at: Vec<f64> },

    #[error("{what} out of domain: {at:?}")]
    OutOfDomain { what: &'static str, at: Vec<f64> },

    #[error("separation infeasible at type {t}: the pooled message does not deter mimicry")]
    InfeasibleSeparation { t: f64 },
}

pub(crate) fn finite(what: &'static str, value: f64, at: &[f64]) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::NonFiniteEvaluation {
            what,
            at: at.to_vec(),
        })
    }
}
