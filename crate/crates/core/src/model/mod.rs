//! Market primitives, the type prior, assumption checks and truncated
//! expectations of output.

mod assumptions;
mod distribution;
mod primitives;

pub(crate) use assumptions::locate_m2_circ;
pub use assumptions::{validate_assumptions, Assumption, AssumptionCheck, AssumptionReport, Witness};
pub use distribution::{DensityShape, TypeDistribution};
pub use primitives::{CostFamily, Derivatives, ModelPrimitives, NoncogFamily, OutputFamily};

use crate::error::{finite, Error, Result};
use crate::numeric::{integrate, QuadOptions};

/// Bracket width for `m2°`.
pub(crate) fn assumptions_m2_width() -> f64 {
    assumptions::M2_CIRC_WIDTH
}

/// Absolute accuracy of truncated means.
pub const TRUNCATED_MEAN_TOL: f64 = 1e-10;

/// `E[g(z) | z >= t_cut]` under the prior, by adaptive quadrature. At
/// `t_cut = t_hi` the limit `g(t_hi)` is returned.
pub fn truncated_expectation<G>(dist: &TypeDistribution, g: G, t_cut: f64) -> Result<f64>
where
    G: Fn(f64) -> f64,
{
    if !(t_cut >= dist.t_lo && t_cut <= dist.t_hi) {
        return Err(Error::OutOfDomain {
            what: "truncation point",
            at: vec![t_cut],
        });
    }
    let mass = dist.survival(t_cut);
    if dist.t_hi - t_cut <= 1e-13 * dist.span() || mass <= 0.0 {
        return finite("integrand", g(dist.t_hi), &[dist.t_hi]);
    }
    let opts = QuadOptions {
        abs_tol: TRUNCATED_MEAN_TOL * mass,
        ..QuadOptions::default()
    };
    let r = integrate(|z| finite("integrand", g(z) * dist.density(z), &[z]), t_cut, dist.t_hi, opts)?;
    Ok(r.value / mass)
}

/// `E[f(m1, z) | z >= t_cut]`.
pub fn truncated_mean(
    prims: &ModelPrimitives,
    dist: &TypeDistribution,
    m1: f64,
    t_cut: f64,
) -> Result<f64> {
    truncated_expectation(dist, |z| prims.f(m1, z), t_cut)
}

/// `E[f(M, z) | z >= t_cut]`, the wage paid at the pooled message.
pub fn truncated_mean_output(
    prims: &ModelPrimitives,
    dist: &TypeDistribution,
    t_cut: f64,
) -> Result<f64> {
    truncated_mean(prims, dist, prims.budget, t_cut)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform13() -> TypeDistribution {
        TypeDistribution::uniform(1.0, 3.0).unwrap()
    }

    #[test]
    fn uniform_truncated_means() {
        let p = ModelPrimitives::quadratic_benchmark(2.0);
        let d = uniform13();
        assert!((truncated_mean_output(&p, &d, 2.0).unwrap() - 2.5).abs() < 1e-12);
        assert!((truncated_mean_output(&p, &d, 1.0).unwrap() - 2.0).abs() < 1e-12);
        assert_eq!(truncated_mean_output(&p, &d, 3.0).unwrap(), 3.0);
        assert!(truncated_mean_output(&p, &d, 0.5).is_err());
    }

    #[test]
    fn squared_output_closed_form() {
        let d = uniform13();
        // int_{1.5}^{3} z^2 dz / 2 divided by survival 0.75.
        let closed = (27.0 - 1.5f64.powi(3)) / (3.0 * 1.5);
        assert!((closed - 5.25).abs() < 1e-15);
        let mean = truncated_expectation(&d, |z| z * z, 1.5).unwrap();
        assert!((mean - closed).abs() < 1e-10);
    }

    #[test]
    fn near_top_limit_is_continuous() {
        let p = ModelPrimitives::quadratic_benchmark(2.0);
        let d = uniform13();
        let v = truncated_mean_output(&p, &d, 3.0 - 1e-7).unwrap();
        assert!((v - (3.0 - 0.5e-7)).abs() < 1e-10);
    }
}
