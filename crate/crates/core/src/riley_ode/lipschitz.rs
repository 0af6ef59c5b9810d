use super::{rhs, Region};
use crate::error::{Error, Result};
use crate::model::ModelPrimitives;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LipschitzBox {
    pub m1: (f64, f64),
    pub t: (f64, f64),
}

/// Largest difference quotient `|phi(m1, t') - phi(m1, t)| / |t' - t|`
/// between neighbouring points of a `samples x samples` grid on the box.
///
/// Diagnostic only: a finite value is consistent with the Lipschitz
/// condition that guarantees a unique solution, it does not prove it.
pub fn estimate_lipschitz(
    prims: &ModelPrimitives,
    region: Region,
    bx: LipschitzBox,
    samples: usize,
) -> Result<f64> {
    let n = samples.max(2);
    let grid = |(lo, hi): (f64, f64), i: usize| lo + (hi - lo) * i as f64 / (n - 1) as f64;
    let eval = |m1: f64, t: f64| -> Result<f64> {
        rhs(prims, region, m1, t).map_err(|e| match e {
            Error::DegenerateDenominator { m1, t, .. } => Error::NonFiniteEvaluation {
                what: "rhs (vanishing f_t)",
                at: vec![m1, t],
            },
            other => other,
        })
    };
    let mut best = 0.0f64;
    for i in 0..n {
        let m1 = grid(bx.m1, i);
        let mut prev: Option<(f64, f64)> = None;
        for j in 0..n {
            let t = grid(bx.t, j);
            let v = eval(m1, t)?;
            if let Some((tp, vp)) = prev {
                if t > tp {
                    best = best.max(((v - vp) / (t - tp)).abs());
                }
            }
            prev = Some((t, v));
        }
    }
    Ok(best)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::OutputFamily;

    #[test]
    fn quad_slack_box() {
        let p = ModelPrimitives::quadratic_benchmark(2.0);
        let b = LipschitzBox { m1: (0.0, 1.0), t: (1.0, 2f64.sqrt()) };
        let est = estimate_lipschitz(&p, Region::Slack, b, 400).unwrap();
        // sup |d phi / dt| = sup m1 / t^2 = 1 at (1, 1); grid quotients
        // approach it from below.
        assert!(est <= 1.0 && est > 0.998, "{est}");
    }

    #[test]
    fn degenerate_box_is_zero() {
        let p = ModelPrimitives::quadratic_benchmark(2.0);
        let b = LipschitzBox { m1: (0.5, 0.5), t: (1.2, 1.2) };
        assert_eq!(estimate_lipschitz(&p, Region::Binding, b, 10).unwrap(), 0.0);
    }

    #[test]
    fn vanishing_output_slope_is_non_finite() {
        let p = ModelPrimitives {
            output: OutputFamily::Multiplicative { gamma: -0.5 },
            ..ModelPrimitives::quadratic_benchmark(2.0)
        };
        let b = LipschitzBox { m1: (0.0, 2.0), t: (1.0, 2.0) };
        assert!(matches!(
            estimate_lipschitz(&p, Region::Slack, b, 11),
            Err(Error::NonFiniteEvaluation { .. })
        ));
    }
}
