use serde::Serialize;

use super::{ModelPrimitives, TypeDistribution};
use crate::error::{finite, Error, Result};
use crate::numeric::bisect;

/// Margin required by strict inequalities on the grid.
pub const STRICT_MARGIN: f64 = 1e-10;
/// Bracket width used when locating `m2°`.
pub const M2_CIRC_WIDTH: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Assumption {
    /// `c` strictly increasing in `m1`.
    CostIncreasingInSignal,
    /// `c` strictly decreasing in `t` (away from `m1 = 0`).
    CostDecreasingInType,
    /// `f` non-decreasing in `m1`.
    OutputNondecreasingInSignal,
    /// `f` strictly increasing in `t`, with `f_t > 0`.
    OutputIncreasingInType,
    SingleCrossing,
    /// `f - c` strictly concave in `m1`.
    SurplusConcave,
    /// `h` strictly convex.
    NoncogConvex,
    /// `0 < m2° < M`.
    InteriorNoncogOptimum,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Witness {
    pub m1: Option<f64>,
    pub m2: Option<f64>,
    pub t: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionCheck {
    pub assumption: Assumption,
    pub passed: bool,
    /// Largest shortfall from the required inequality; zero on pass.
    pub worst_violation: f64,
    pub witness: Option<Witness>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AssumptionReport {
    pub checks: Vec<AssumptionCheck>,
    pub m2_circ: f64,
    pub grid_density: usize,
}

impl AssumptionReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn check(&self, which: Assumption) -> &AssumptionCheck {
        self.checks
            .iter()
            .find(|c| c.assumption == which)
            .expect("every assumption is checked")
    }
}

struct Tally {
    assumption: Assumption,
    worst: f64,
    witness: Option<Witness>,
}

impl Tally {
    fn new(assumption: Assumption) -> Self {
        Self {
            assumption,
            worst: 0.0,
            witness: None,
        }
    }

    /// Records `shortfall > 0` as a violation.
    fn record(&mut self, shortfall: f64, witness: Witness) {
        if shortfall > 0.0 && shortfall > self.worst {
            self.worst = shortfall;
            self.witness = Some(witness);
        }
    }

    fn finish(self) -> AssumptionCheck {
        AssumptionCheck {
            assumption: self.assumption,
            passed: self.witness.is_none(),
            worst_violation: self.worst,
            witness: self.witness,
        }
    }
}

fn at(m1: Option<f64>, m2: Option<f64>, t: Option<f64>) -> Witness {
    Witness { m1, m2, t }
}

/// Locates the maximizer of `alpha m2 - h(m2)` over `m2 >= 0`, widening the
/// bracket beyond `M` when needed so that a root above the budget is still
/// reported.
pub(crate) fn locate_m2_circ(prims: &ModelPrimitives) -> Result<f64> {
    let foc = |m2: f64| finite("h'", prims.alpha - prims.h_prime(m2), &[m2]);
    let at_zero = foc(0.0)?;
    if at_zero == 0.0 {
        return Ok(0.0);
    }
    let mut hi = prims.budget.max(1.0);
    if at_zero > 0.0 {
        let mut tries = 0;
        while foc(hi)? > 0.0 {
            hi *= 2.0;
            tries += 1;
            if tries > 60 {
                break;
            }
        }
    }
    Ok(bisect("alpha - h'", foc, 0.0, hi, M2_CIRC_WIDTH)?.mid())
}

/// Checks the standing assumptions on a uniform grid with `grid_density`
/// points per axis over `[0, M]^2 x [t_lo, t_hi]`.
pub fn validate_assumptions(
    prims: &ModelPrimitives,
    dist: &TypeDistribution,
    grid_density: usize,
) -> Result<AssumptionReport> {
    if grid_density < 2 {
        return Err(Error::OutOfDomain {
            what: "grid density",
            at: vec![grid_density as f64],
        });
    }
    let n = grid_density;
    let step = |lo: f64, hi: f64, i: usize| lo + (hi - lo) * i as f64 / (n - 1) as f64;
    let m: Vec<f64> = (0..n).map(|i| step(0.0, prims.budget, i)).collect();
    let ts: Vec<f64> = (0..n).map(|j| step(dist.t_lo, dist.t_hi, j)).collect();

    let mut cost = vec![vec![0.0; n]; n];
    let mut out = vec![vec![0.0; n]; n];
    let mut out_t = vec![vec![0.0; n]; n];
    for i in 0..n {
        for j in 0..n {
            let pt = [m[i], ts[j]];
            cost[i][j] = finite("c", prims.c(m[i], ts[j]), &pt)?;
            out[i][j] = finite("f", prims.f(m[i], ts[j]), &pt)?;
            out_t[i][j] = finite("f_t", prims.f_t(m[i], ts[j]), &pt)?;
        }
    }
    let noncog: Vec<f64> = m
        .iter()
        .map(|&x| finite("h", prims.h(x), &[x]))
        .collect::<Result<_>>()?;

    let mut c_inc = Tally::new(Assumption::CostIncreasingInSignal);
    let mut c_dec = Tally::new(Assumption::CostDecreasingInType);
    let mut f_nondec = Tally::new(Assumption::OutputNondecreasingInSignal);
    let mut f_inc = Tally::new(Assumption::OutputIncreasingInType);
    let mut crossing = Tally::new(Assumption::SingleCrossing);
    let mut concave = Tally::new(Assumption::SurplusConcave);
    let mut convex = Tally::new(Assumption::NoncogConvex);

    for j in 0..n {
        for i in 0..n - 1 {
            let w = at(Some(m[i]), None, Some(ts[j]));
            c_inc.record(STRICT_MARGIN - (cost[i + 1][j] - cost[i][j]), w);
            let scale = out[i][j].abs().max(1.0);
            f_nondec.record(-(out[i + 1][j] - out[i][j]) - 1e-12 * scale, w);
        }
    }
    for i in 0..n {
        for j in 0..n - 1 {
            let w = at(Some(m[i]), None, Some(ts[j]));
            // The zero-signal row is exempt: cost families vanish there.
            if i > 0 {
                c_dec.record(STRICT_MARGIN - (cost[i][j] - cost[i][j + 1]), w);
            }
            f_inc.record(STRICT_MARGIN - (out[i][j + 1] - out[i][j]), w);
        }
        for j in 0..n {
            f_inc.record(-out_t[i][j], at(Some(m[i]), None, Some(ts[j])));
        }
    }
    // Over all pairs jp < j the cross-difference is d[jp] - d[j] with
    // d = c(m_i, .) - c(m_ip, .); its minimum uses the running minimum of d.
    for i in 1..n {
        for ip in 0..i {
            let mut d_min = cost[i][0] - cost[ip][0];
            for j in 1..n {
                let d = cost[i][j] - cost[ip][j];
                crossing.record(STRICT_MARGIN - (d_min - d), at(Some(m[i]), None, Some(ts[j])));
                d_min = d_min.min(d);
            }
        }
    }
    for j in 0..n {
        for i in 1..n.saturating_sub(1) {
            let s = |k: usize| out[k][j] - cost[k][j];
            let second = s(i + 1) - 2.0 * s(i) + s(i - 1);
            concave.record(second + STRICT_MARGIN, at(Some(m[i]), None, Some(ts[j])));
        }
    }
    for i in 1..n.saturating_sub(1) {
        let second = noncog[i + 1] - 2.0 * noncog[i] + noncog[i - 1];
        convex.record(STRICT_MARGIN - second, at(None, Some(m[i]), None));
    }

    let m2_circ = locate_m2_circ(prims)?;
    let mut interior = Tally::new(Assumption::InteriorNoncogOptimum);
    let w = at(None, Some(m2_circ), None);
    interior.record(-m2_circ, w);
    if m2_circ <= 0.0 {
        interior.record(f64::MIN_POSITIVE, w);
    }
    interior.record(m2_circ - prims.budget, w);
    if m2_circ >= prims.budget {
        interior.record(f64::MIN_POSITIVE, w);
    }

    Ok(AssumptionReport {
        checks: vec![
            c_inc.finish(),
            c_dec.finish(),
            f_nondec.finish(),
            f_inc.finish(),
            crossing.finish(),
            concave.finish(),
            convex.finish(),
            interior.finish(),
        ],
        m2_circ,
        grid_density,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{CostFamily, NoncogFamily, OutputFamily};

    fn uniform13() -> TypeDistribution {
        TypeDistribution::uniform(1.0, 3.0).unwrap()
    }

    #[test]
    fn quad_family_passes() {
        let r = validate_assumptions(&ModelPrimitives::quadratic_benchmark(2.0), &uniform13(), 20).unwrap();
        assert!(r.all_passed(), "{r:#?}");
        assert!((r.m2_circ - 1.0).abs() <= 1e-12);
    }

    #[test]
    fn large_alpha_breaks_interior_optimum() {
        let p = ModelPrimitives::quadratic_benchmark(2.0).with_alpha(3.0);
        let r = validate_assumptions(&p, &uniform13(), 10).unwrap();
        let a4 = r.check(Assumption::InteriorNoncogOptimum);
        assert!(!a4.passed);
        assert!((r.m2_circ - 3.0).abs() < 1e-11);
        assert!(r.checks.iter().filter(|c| !c.passed).count() == 1);
    }

    #[test]
    fn cost_rising_in_type_is_flagged() {
        let p = ModelPrimitives {
            cost: CostFamily::Bilinear { k: 1.0 },
            ..ModelPrimitives::quadratic_benchmark(2.0)
        };
        let r = validate_assumptions(&p, &uniform13(), 10).unwrap();
        let a = r.check(Assumption::CostDecreasingInType);
        assert!(!a.passed);
        let w = a.witness.unwrap();
        assert!(w.m1.unwrap() > 0.0);
    }

    #[test]
    fn single_crossing_matches_all_pairs_scan() {
        let p = ModelPrimitives {
            cost: CostFamily::Bilinear { k: 1.5 },
            ..ModelPrimitives::quadratic_benchmark(2.0)
        };
        let n = 9;
        let r = validate_assumptions(&p, &uniform13(), n).unwrap();
        let a = r.check(Assumption::SingleCrossing);
        let g = |lo: f64, hi: f64, i: usize| lo + (hi - lo) * i as f64 / (n - 1) as f64;
        let mut worst: f64 = 0.0;
        for i in 0..n {
            for ip in 0..i {
                for j in 0..n {
                    for jp in 0..j {
                        let (mi, mip, tj, tjp) = (g(0.0, 2.0, i), g(0.0, 2.0, ip), g(1.0, 3.0, j), g(1.0, 3.0, jp));
                        let gap = p.c(mi, tjp) + p.c(mip, tj) - p.c(mi, tj) - p.c(mip, tjp);
                        worst = worst.max(STRICT_MARGIN - gap);
                    }
                }
            }
        }
        // k (m_i - m_ip)(t_j - t_jp) peaks at the corners: 1.5 * 2 * 2.
        assert!(!a.passed);
        assert!((worst - (6.0 + STRICT_MARGIN)).abs() < 1e-12);
        assert!((a.worst_violation - worst).abs() < 1e-12);
        let quad = validate_assumptions(&ModelPrimitives::quadratic_benchmark(2.0), &uniform13(), n).unwrap();
        assert!(quad.check(Assumption::SingleCrossing).passed);
    }

    #[test]
    fn negative_h_slope_at_zero_is_not_bracketed() {
        let p = ModelPrimitives {
            noncog: NoncogFamily::Quadratic { k: 1.0 },
            output: OutputFamily::Affine { gamma: 0.0 },
            ..ModelPrimitives::quadratic_benchmark(2.0)
        }
        .with_alpha(-1.0);
        assert!(matches!(
            validate_assumptions(&p, &uniform13(), 5),
            Err(Error::RootNotBracketed { .. })
        ));
    }

    #[test]
    fn tiny_grid_rejected() {
        let p = ModelPrimitives::quadratic_benchmark(2.0);
        assert!(validate_assumptions(&p, &uniform13(), 1).is_err());
    }
}
