//! The assembled equilibrium: schedules, utilities, the wage map and the
//! belief map including off-path messages.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{truncated_mean, truncated_mean_output, ModelPrimitives, TypeDistribution};
use crate::riley_ode::{PiecewiseSchedule, Region, StepControl};
use crate::thresholds::{compute_thresholds, PoolThreshold, ThresholdSolution, Thresholds};

/// `m1 + m2` within this of `M` counts as binding.
pub const BINDING_TOL: f64 = 1e-9;
/// Largest accepted excess of `m1 + m2` over `M`.
pub const FEASIBILITY_TOL: f64 = 1e-12;
/// Bound on `|U(t_h-) - U_pool(t_h)|` accepted at assembly.
pub const INDIFFERENCE_TOL: f64 = 1e-7;
const ASSEMBLY_GRID: usize = 401;
const MONOTONE_SLACK: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum ConstraintStatus {
    Binding,
    Slack,
}

pub fn constraint_status(m1: f64, m2: f64, budget: f64) -> Result<ConstraintStatus> {
    let sum = m1 + m2;
    if !(m1 >= 0.0 && m2 >= 0.0) || sum > budget + FEASIBILITY_TOL || sum.is_nan() {
        return Err(Error::OutOfDomain {
            what: "infeasible message",
            at: vec![m1, m2, budget],
        });
    }
    Ok(if (sum - budget).abs() <= BINDING_TOL {
        ConstraintStatus::Binding
    } else {
        ConstraintStatus::Slack
    })
}

/// Support of the receivers' belief after a message.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BeliefSupport {
    Point { t: f64 },
    Interval { lo: f64, hi: f64 },
}

impl BeliefSupport {
    pub fn lo(&self) -> f64 {
        match *self {
            BeliefSupport::Point { t } => t,
            BeliefSupport::Interval { lo, .. } => lo,
        }
    }

    pub fn hi(&self) -> f64 {
        match *self {
            BeliefSupport::Point { t } => t,
            BeliefSupport::Interval { hi, .. } => hi,
        }
    }
}

/// Which part of the equilibrium a type belongs to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Segment {
    Slack,
    Binding,
    Pool,
}

impl Segment {
    pub fn name(self) -> &'static str {
        match self {
            Segment::Slack => "slack",
            Segment::Binding => "binding",
            Segment::Pool => "pool",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Equilibrium {
    pub prims: ModelPrimitives,
    pub dist: TypeDistribution,
    pub thresholds: Thresholds,
    /// Separating schedule on `[t_lo, t_h]` (or `[t_lo, t_hi]` without a pool).
    pub schedule: PiecewiseSchedule,
    /// Separating schedule before truncation at the pool, up to `t'`.
    pub extended_schedule: PiecewiseSchedule,
    pub pool: Option<PoolThreshold>,
    /// `E f(M, z | z >= t_h)`.
    pub pooled_wage: Option<f64>,
}

/// Computes thresholds and assembles the equilibrium.
pub fn solve(
    prims: &ModelPrimitives,
    dist: &TypeDistribution,
    control: StepControl,
) -> Result<Equilibrium> {
    let solution = compute_thresholds(prims, dist, control)?;
    assemble(prims, dist, solution)
}

pub fn assemble(
    prims: &ModelPrimitives,
    dist: &TypeDistribution,
    solution: ThresholdSolution,
) -> Result<Equilibrium> {
    let ThresholdSolution { thresholds, schedule, pool } = solution;
    let (truncated, pooled_wage) = match thresholds.t_h {
        Some(th) => (
            schedule.truncate_at_t(th)?,
            Some(truncated_mean_output(prims, dist, th)?),
        ),
        None => (schedule.clone(), None),
    };
    let eq = Equilibrium {
        prims: *prims,
        dist: *dist,
        thresholds,
        schedule: truncated,
        extended_schedule: schedule,
        pool,
        pooled_wage,
    };
    eq.check_invariants()?;
    Ok(eq)
}

impl Equilibrium {
    /// The same construction with the pool moved to `t_h`, without the
    /// assembly checks. The pooled wage is kept unless `reprice` is set.
    /// Used to build deliberately wrong equilibria.
    pub fn with_pool_threshold(&self, t_h: f64, reprice: bool) -> Result<Equilibrium> {
        let mut eq = self.clone();
        eq.schedule = self.extended_schedule.truncate_at_t(t_h)?;
        if reprice || eq.pooled_wage.is_none() {
            eq.pooled_wage = Some(truncated_mean_output(&self.prims, &self.dist, t_h)?);
        }
        eq.thresholds.t_h = Some(t_h);
        if let Some(p) = eq.pool.as_mut() {
            p.t_h = t_h;
        }
        Ok(eq)
    }

    /// Indifference gap of type `t` when the pool starts at `t`.
    pub fn indifference_gap(&self, t: f64) -> Result<f64> {
        crate::thresholds::indifference_gap(&self.prims, &self.dist, &self.extended_schedule, t)
    }

    pub fn has_pool(&self) -> bool {
        self.thresholds.t_h.is_some()
    }

    fn check_type(&self, t: f64) -> Result<()> {
        if !(t >= self.dist.t_lo && t <= self.dist.t_hi) {
            return Err(Error::OutOfDomain {
                what: "type outside support",
                at: vec![t, self.dist.t_lo, self.dist.t_hi],
            });
        }
        Ok(())
    }

    pub fn segment_at(&self, t: f64) -> Result<Segment> {
        self.check_type(t)?;
        if self.thresholds.t_h.is_some_and(|th| t >= th) {
            return Ok(Segment::Pool);
        }
        Ok(match self.schedule.signals(t)?.2 {
            Region::Slack => Segment::Slack,
            Region::Binding => Segment::Binding,
        })
    }

    /// Equilibrium message of type `t`; the pool starts at `t_h` inclusive.
    pub fn schedule_at(&self, t: f64) -> Result<(f64, f64)> {
        self.check_type(t)?;
        if self.thresholds.t_h.is_some_and(|th| t >= th) {
            return Ok((self.prims.budget, 0.0));
        }
        let (m1, m2, _) = self.schedule.signals(t)?;
        Ok((m1, m2))
    }

    /// Limit of the separating schedule as `t` rises to `t_h`.
    pub fn pre_pool_action(&self) -> Option<(f64, f64)> {
        let th = self.thresholds.t_h?;
        self.schedule.signals(th).ok().map(|(m1, m2, _)| (m1, m2))
    }

    /// On-path wage of type `t`.
    pub fn on_path_wage(&self, t: f64) -> Result<f64> {
        if let (Some(th), Some(w)) = (self.thresholds.t_h, self.pooled_wage) {
            self.check_type(t)?;
            if t >= th {
                return Ok(w);
            }
        }
        let (m1, m2) = self.schedule_at(t)?;
        Ok(self.prims.alpha * m2 + self.prims.f(m1, t))
    }

    /// Equilibrium utility `U(t)`.
    pub fn utility(&self, t: f64) -> Result<f64> {
        let (m1, m2) = self.schedule_at(t)?;
        Ok(self.on_path_wage(t)? - self.prims.h(m2) - self.prims.c(m1, t))
    }

    /// Utility of type `t` just below the pool threshold, at the separating action.
    pub fn separating_utility(&self, t: f64) -> Result<f64> {
        self.check_type(t)?;
        let (m1, m2, _) = self.schedule.signals(t)?;
        Ok(self.prims.payoff(m1, m2, t, t))
    }

    pub fn belief_at(&self, m1: f64, m2: f64) -> Result<BeliefSupport> {
        let m = self.prims.budget;
        constraint_status(m1, m2, m)?;
        let (lo, hi) = (self.dist.t_lo, self.dist.t_hi);
        if m1 < self.schedule.m1_start() {
            return Ok(BeliefSupport::Point { t: lo });
        }
        if m1 <= self.schedule.m1_end() {
            let t = self.schedule.belief(m1).ok_or(Error::OutOfDomain {
                what: "signal outside separating range",
                at: vec![m1],
            })?;
            return Ok(BeliefSupport::Point { t: t.clamp(lo, hi) });
        }
        Ok(match self.thresholds.t_h {
            Some(th) if m1 >= m - FEASIBILITY_TOL => BeliefSupport::Interval { lo: th, hi },
            Some(th) => BeliefSupport::Point { t: th },
            None => BeliefSupport::Point { t: hi },
        })
    }

    /// Competitive wage `alpha m2 + E f(m1, t)` under the belief.
    pub fn wage_at(&self, m1: f64, m2: f64) -> Result<f64> {
        let expected = match self.belief_at(m1, m2)? {
            BeliefSupport::Point { t } => self.prims.f(m1, t),
            BeliefSupport::Interval { lo, .. } => match self.pooled_wage {
                Some(w) if m1 == self.prims.budget => w,
                _ => truncated_mean(&self.prims, &self.dist, m1, lo)?,
            },
        };
        Ok(self.prims.alpha * m2 + expected)
    }

    pub fn sender_utility(&self, t: f64, m1: f64, m2: f64) -> Result<f64> {
        Ok(self.wage_at(m1, m2)? - self.prims.h(m2) - self.prims.c(m1, t))
    }

    /// Evenly spaced types on the support, endpoints included.
    pub fn type_grid(&self, n: usize) -> Vec<f64> {
        let (lo, hi) = (self.dist.t_lo, self.dist.t_hi);
        (0..n)
            .map(|i| if i + 1 == n { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 })
            .collect()
    }

    fn check_invariants(&self) -> Result<()> {
        let m = self.prims.budget;
        let th = &self.thresholds;
        let mut prev: Option<(f64, f64, f64)> = None;
        for t in self.type_grid(ASSEMBLY_GRID) {
            let (m1, m2) = self.schedule_at(t)?;
            if let Some((t0, a, b)) = prev {
                if m1 < a - MONOTONE_SLACK || m2 > b + MONOTONE_SLACK || m1 + m2 < a + b - MONOTONE_SLACK {
                    return Err(Error::InvariantViolation {
                        what: "schedule not monotone".into(),
                        at: vec![t0, t],
                    });
                }
            }
            let pooled = th.t_h.is_some_and(|h| t >= h);
            if !pooled && t < th.t_ell && (m2 - th.m2_circ).abs() > MONOTONE_SLACK {
                return Err(Error::InvariantViolation {
                    what: "slack type off the stationary non-cognitive signal".into(),
                    at: vec![t, m2],
                });
            }
            if !pooled && t >= th.t_ell && th.t_ell < self.dist.t_hi && (m1 + m2 - m).abs() > BINDING_TOL {
                return Err(Error::InvariantViolation {
                    what: "type above the binding threshold is slack".into(),
                    at: vec![t, m1 + m2],
                });
            }
            prev = Some((t, m1, m2));
        }
        if let (Some(h), Some(w)) = (th.t_h, self.pooled_wage) {
            let below = self.separating_utility(h)?;
            let at = w - self.prims.c(m, h) - self.prims.h(0.0);
            if (below - at).abs() > INDIFFERENCE_TOL {
                return Err(Error::InvariantViolation {
                    what: "pool threshold type not indifferent".into(),
                    at: vec![h, below, at],
                });
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::thresholds::Regime;

    fn quad(m: f64) -> Equilibrium {
        let d = TypeDistribution::uniform(1.0, 3.0).unwrap();
        solve(&ModelPrimitives::quadratic_benchmark(m), &d, StepControl::default()).unwrap()
    }

    #[test]
    fn quad_pool_example() {
        let eq = quad(2.0);
        assert_eq!(eq.thresholds.regime, Regime::TwoPartWithPool);
        assert!((eq.utility(1.0).unwrap() - 1.5).abs() < 1e-12);
        let th = eq.thresholds.t_h.unwrap();
        for t in [th, 0.5 * (th + 3.0), 3.0] {
            assert_eq!(eq.schedule_at(t).unwrap(), (2.0, 0.0));
            assert!((eq.on_path_wage(t).unwrap() - 0.5 * (th + 3.0)).abs() < 1e-10);
        }
        let t = eq.thresholds.t_ell - 1e-3;
        let (m1, m2) = eq.schedule_at(t).unwrap();
        assert!((m2 - 1.0).abs() < 1e-12);
        assert!((m1 - (t * t - 1.0).sqrt()).abs() < 1e-7);
        let (k1, k2) = eq.schedule_at(eq.thresholds.t_ell).unwrap();
        assert!((k1 - 1.0).abs() < 1e-8 && (k2 - 1.0).abs() < 1e-8);
    }

    #[test]
    fn deviation_utility() {
        let eq = quad(2.0);
        let u = eq.sender_utility(1.0, 0.5, 1.0).unwrap();
        assert!((u - (1.0 + 1.25f64.sqrt() - 0.625)).abs() < 1e-7);
    }

    #[test]
    fn beliefs_by_clause() {
        let eq = quad(2.0);
        let th = eq.thresholds.t_h.unwrap();
        assert_eq!(eq.belief_at(2.0, 0.0).unwrap(), BeliefSupport::Interval { lo: th, hi: 3.0 });
        let (a, _) = eq.pre_pool_action().unwrap();
        let m1 = 0.5 * (a + 2.0);
        assert_eq!(eq.belief_at(m1, 2.0 - m1).unwrap(), BeliefSupport::Point { t: th });
        assert_eq!(eq.belief_at(m1, 0.0).unwrap(), BeliefSupport::Point { t: th });
        let on = eq.belief_at(0.5, 1.0).unwrap();
        assert_eq!(on, eq.belief_at(0.5, 0.3).unwrap());
        assert!((on.lo() - 1.25f64.sqrt()).abs() < 1e-7);
        assert!((eq.wage_at(2.0, 0.0).unwrap() - eq.pooled_wage.unwrap()).abs() == 0.0);
    }

    #[test]
    fn no_pool_beyond_range_is_top_type() {
        let eq = quad(10.0);
        let top = eq.schedule_at(3.0).unwrap().0;
        assert_eq!(eq.belief_at(top + 0.1, 1.0).unwrap(), BeliefSupport::Point { t: 3.0 });
    }

    #[test]
    fn constraint_status_examples() {
        assert_eq!(constraint_status(1.0, 1.0, 2.0).unwrap(), ConstraintStatus::Binding);
        assert_eq!(constraint_status(0.3, 1.0, 2.0).unwrap(), ConstraintStatus::Slack);
        assert!(matches!(constraint_status(1.0, 1.1, 2.0), Err(Error::OutOfDomain { .. })));
    }

    #[test]
    fn out_of_support() {
        let eq = quad(2.0);
        assert!(matches!(eq.schedule_at(0.5), Err(Error::OutOfDomain { .. })));
    }
}
