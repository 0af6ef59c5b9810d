//! Stationary quantities, the two threshold types and the regime they
//! induce.

use serde::Serialize;

use crate::error::{finite, Error, Result};
use crate::model::{truncated_mean_output, ModelPrimitives, TypeDistribution};
use crate::numeric::{bisect, golden_max};
use crate::riley_ode::{
    integrate_schedule, Integration, PiecewiseSchedule, Region, StepControl, StopEvents, StopReason,
};

/// Tolerance for equality of threshold types when classifying.
pub const REGIME_TOL: f64 = 1e-9;
/// Final bracket width for the pooling threshold.
pub const T_H_WIDTH: f64 = 1e-10;
/// Points in the uniqueness scan of the indifference gap.
pub const SIGN_SCAN_POINTS: usize = 200;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    /// `t_lo < t_ell = t_hi`
    SeparatingNoBinding,
    /// `t_lo < t_ell < t_hi`, no pool
    TwoPartSeparating,
    /// `t_lo = t_ell < t_hi`, no pool
    AllBindingSeparating,
    /// `t_lo < t_ell < t_h < t_hi`
    TwoPartWithPool,
    /// `t_lo < t_ell = t_h < t_hi`
    KinkAtPool,
    /// `t_lo = t_ell < t_h < t_hi`
    AllBindingWithPool,
}

impl Regime {
    pub const ALL: [Regime; 6] = [
        Regime::SeparatingNoBinding,
        Regime::TwoPartSeparating,
        Regime::AllBindingSeparating,
        Regime::TwoPartWithPool,
        Regime::KinkAtPool,
        Regime::AllBindingWithPool,
    ];

    pub fn has_pool(self) -> bool {
        matches!(
            self,
            Regime::TwoPartWithPool | Regime::KinkAtPool | Regime::AllBindingWithPool
        )
    }

    pub fn name(self) -> &'static str {
        match self {
            Regime::SeparatingNoBinding => "separating_no_binding",
            Regime::TwoPartSeparating => "two_part_separating",
            Regime::AllBindingSeparating => "all_binding_separating",
            Regime::TwoPartWithPool => "two_part_with_pool",
            Regime::KinkAtPool => "kink_at_pool",
            Regime::AllBindingWithPool => "all_binding_with_pool",
        }
    }
}

impl std::fmt::Display for Regime {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Regime implied by the thresholds, with [`REGIME_TOL`] for equalities.
pub fn classify_regime(t_ell: f64, t_h: Option<f64>, t_lo: f64, t_hi: f64) -> Regime {
    let eq = |a: f64, b: f64| (a - b).abs() <= REGIME_TOL;
    match t_h {
        Some(th) if eq(t_ell, t_lo) => {
            let _ = th;
            Regime::AllBindingWithPool
        }
        Some(th) if eq(t_ell, th) => Regime::KinkAtPool,
        Some(_) => Regime::TwoPartWithPool,
        None if eq(t_ell, t_hi) => Regime::SeparatingNoBinding,
        None if eq(t_ell, t_lo) => Regime::AllBindingSeparating,
        None => Regime::TwoPartSeparating,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Thresholds {
    pub m2_circ: f64,
    /// Cognitive signal of the lowest type in equilibrium.
    pub m1_low: f64,
    pub t_ell: f64,
    pub t_h: Option<f64>,
    pub t_prime: Option<f64>,
    /// Where the slack schedule meets the constraint, before any pool
    /// truncates it.
    pub t_kink: Option<f64>,
    pub regime: Regime,
}

/// Root of `alpha - h'(m2)` on `[0, M]`.
pub fn compute_m2_circ(prims: &ModelPrimitives) -> Result<f64> {
    let b = bisect(
        "alpha - h'",
        |m2| finite("h'", prims.alpha - prims.h_prime(m2), &[m2]),
        0.0,
        prims.budget,
        crate::model::assumptions_m2_width(),
    )?;
    Ok(b.mid())
}

/// Maximizer of `f(., t) - c(., t)` on `[0, M]`.
pub fn compute_m1_low(prims: &ModelPrimitives, t: f64) -> Result<f64> {
    let marginal = |m1: f64| finite("f_m1 - c_m1", prims.f_m1(m1, t) - prims.c_m1(m1, t), &[m1, t]);
    let m = prims.budget;
    if marginal(0.0)? <= 0.0 {
        return Ok(0.0);
    }
    if marginal(m)? >= 0.0 {
        return Ok(m);
    }
    Ok(bisect("f_m1 - c_m1", marginal, 0.0, m, 1e-14)?.mid())
}

/// Maximizer over `m1 in [0, M]` of the constrained full-information
/// payoff `f - c + alpha (M - m1) - h(M - m1)`.
pub fn constrained_bottom(prims: &ModelPrimitives, t: f64) -> Result<f64> {
    let m = prims.budget;
    let payoff = |m1: f64| finite("payoff", prims.payoff(m1, m - m1, t, t), &[m1, t]);
    let rough = golden_max(payoff, 0.0, m, 1e-9)?;
    let marginal = |m1: f64| {
        finite(
            "constrained marginal",
            prims.f_m1(m1, t) - prims.c_m1(m1, t) - prims.alpha + prims.h_prime(m - m1),
            &[m1, t],
        )
    };
    if rough > 0.0 && rough < m && marginal(0.0)? > 0.0 && marginal(m)? < 0.0 {
        return Ok(bisect("constrained marginal", marginal, 0.0, m, 1e-14)?.mid());
    }
    Ok(rough)
}

/// Type at which the slack schedule meets the constraint: `t_lo` when the
/// lowest type is already constrained, `t_hi` if the schedule never binds.
pub fn find_t_ell(dist: &TypeDistribution, slack: Option<&Integration>) -> f64 {
    match slack {
        None => dist.t_lo,
        Some(run) => match run.stop {
            StopReason::TopType => dist.t_hi,
            _ => run.path.last().t,
        },
    }
}

/// Type `t'` at which the binding schedule exhausts the budget, if that
/// happens strictly inside the support.
pub fn check_condition_a(binding: &Integration, dist: &TypeDistribution) -> Option<f64> {
    let last = binding.path.last();
    (binding.stop == StopReason::BudgetExhausted && last.t > dist.t_lo && last.t < dist.t_hi)
        .then_some(last.t)
}

/// Utility of type `t` at its separating action.
pub fn separating_utility(prims: &ModelPrimitives, schedule: &PiecewiseSchedule, t: f64) -> Result<f64> {
    let (m1, m2, _) = schedule.signals(t)?;
    Ok(prims.payoff(m1, m2, t, t))
}

/// Utility of type `t` at the pooled message when the pool starts at `t_cut`.
pub fn pooled_utility(
    prims: &ModelPrimitives,
    dist: &TypeDistribution,
    t_cut: f64,
    t: f64,
) -> Result<f64> {
    Ok(truncated_mean_output(prims, dist, t_cut)? - prims.c(prims.budget, t) - prims.h(0.0))
}

/// Indifference gap: pooled minus separating utility of type `t` when the
/// pool starts at `t`.
pub fn indifference_gap(
    prims: &ModelPrimitives,
    dist: &TypeDistribution,
    schedule: &PiecewiseSchedule,
    t: f64,
) -> Result<f64> {
    Ok(pooled_utility(prims, dist, t, t)? - separating_utility(prims, schedule, t)?)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PoolThreshold {
    pub t_h: f64,
    pub residual: f64,
    pub scan_sign_changes: usize,
}

/// Sign changes of the gap on `SIGN_SCAN_POINTS` points of
/// `[t_lo + 1e-9, t_prime]`, with the sub-bracket of the last change.
pub fn scan_gap(
    prims: &ModelPrimitives,
    dist: &TypeDistribution,
    schedule: &PiecewiseSchedule,
    t_prime: f64,
) -> Result<(usize, Option<(f64, f64)>)> {
    let lo = dist.t_lo + 1e-9;
    let n = SIGN_SCAN_POINTS;
    let mut changes = 0;
    let mut bracket = None;
    let mut prev: Option<(f64, f64)> = None;
    for i in 0..n {
        let t = if i + 1 == n { t_prime } else { lo + (t_prime - lo) * i as f64 / (n - 1) as f64 };
        let g = indifference_gap(prims, dist, schedule, t)?;
        if let Some((tp, gp)) = prev {
            if gp != 0.0 && g != 0.0 && gp.signum() != g.signum() || gp < 0.0 && g == 0.0 {
                changes += 1;
                bracket = Some((tp, t));
            }
        }
        prev = Some((t, g));
    }
    Ok((changes, bracket))
}

/// Solves the indifference condition for the pooling threshold on
/// `(t_lo, t_prime]`.
pub fn find_t_h(
    prims: &ModelPrimitives,
    dist: &TypeDistribution,
    schedule: &PiecewiseSchedule,
    t_prime: f64,
) -> Result<PoolThreshold> {
    let at_bottom = indifference_gap(prims, dist, schedule, dist.t_lo)?;
    if !(at_bottom < 0.0) {
        return Err(Error::NoPoolRoot {
            reason: format!(
                "lowest type weakly prefers the pooled message (gap {at_bottom:.6e} >= 0)"
            ),
        });
    }
    let (changes, bracket) = scan_gap(prims, dist, schedule, t_prime)?;
    if changes > 1 {
        return Err(Error::MultipleSignChanges { count: changes });
    }
    let (a, b) = bracket.ok_or_else(|| Error::NoPoolRoot {
        reason: format!("indifference gap has no sign change on ({}, {t_prime}]", dist.t_lo),
    })?;
    let root = bisect(
        "indifference gap",
        |t| indifference_gap(prims, dist, schedule, t),
        a,
        b,
        T_H_WIDTH,
    )?;
    let t_h = root.mid();
    Ok(PoolThreshold {
        t_h,
        residual: indifference_gap(prims, dist, schedule, t_h)?,
        scan_sign_changes: changes,
    })
}

/// Thresholds together with the separating schedule they were computed on.
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdSolution {
    pub thresholds: Thresholds,
    /// Separating schedule up to `t'` (or `t_hi`), before truncation at the pool.
    pub schedule: PiecewiseSchedule,
    pub pool: Option<PoolThreshold>,
}

pub fn compute_thresholds(
    prims: &ModelPrimitives,
    dist: &TypeDistribution,
    control: StepControl,
) -> Result<ThresholdSolution> {
    let m = prims.budget;
    // Beyond the budget the constraint binds for every type; the stationary
    // point is still needed to compare against `M - m1`.
    let m2_circ = match compute_m2_circ(prims) {
        Err(Error::RootNotBracketed { .. }) => crate::model::locate_m2_circ(prims)?,
        other => other?,
    };
    let m1_free = compute_m1_low(prims, dist.t_lo)?;

    let slack = if m1_free + m2_circ < m {
        Some(integrate_schedule(
            prims,
            (m1_free, dist.t_lo),
            Region::Slack,
            StopEvents { t_hi: dist.t_hi, m1_stop: m - m2_circ },
            control,
        )?)
    } else {
        None
    };
    let t_kink_raw = find_t_ell(dist, slack.as_ref());
    let binding = if t_kink_raw < dist.t_hi {
        let start = match &slack {
            Some(run) => (run.path.last().m1, run.path.last().t),
            None => (constrained_bottom(prims, dist.t_lo)?, dist.t_lo),
        };
        Some(integrate_schedule(
            prims,
            start,
            Region::Binding,
            StopEvents { t_hi: dist.t_hi, m1_stop: m },
            control,
        )?)
    } else {
        None
    };
    let t_prime = binding.as_ref().and_then(|b| check_condition_a(b, dist));

    let schedule = PiecewiseSchedule {
        slack: slack.map(|r| r.path),
        binding: binding.map(|r| r.path),
        m2_circ,
        budget: m,
    };
    let m1_low = schedule.m1_start();

    let pool = match t_prime {
        Some(tp) => Some(find_t_h(prims, dist, &schedule, tp)?),
        None => None,
    };
    let t_h = pool.map(|p| p.t_h);
    // A pool that opens before the slack schedule reaches the constraint
    // makes the pool's lower end the binding threshold.
    let t_ell = match t_h {
        Some(th) if th < t_kink_raw => th,
        _ => t_kink_raw,
    };
    let regime = classify_regime(t_ell, t_h, dist.t_lo, dist.t_hi);
    Ok(ThresholdSolution {
        thresholds: Thresholds {
            m2_circ,
            m1_low,
            t_ell,
            t_h,
            t_prime,
            t_kink: schedule.t_kink(),
            regime,
        },
        schedule,
        pool,
    })
}
