use serde::Serialize;

use super::{rhs, PathNode, Region, SampledPath};
use crate::error::{Error, Result};
use crate::model::ModelPrimitives;
use crate::numeric::bisect;

/// Width to which the `t = t_hi` crossing is refined.
pub const EVENT_WIDTH: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepControl {
    pub rtol: f64,
    pub atol: f64,
    /// Largest step as a fraction of the `m1` interval to cover.
    pub max_step_fraction: f64,
}

impl Default for StepControl {
    fn default() -> Self {
        Self {
            rtol: 1e-9,
            atol: 1e-11,
            max_step_fraction: 1.0 / 64.0,
        }
    }
}

/// Where integration must stop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StopEvents {
    /// Top of the type support.
    pub t_hi: f64,
    /// `M - m2°` on the slack region, `M` on the binding region.
    pub m1_stop: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    /// `t` reached the top type.
    TopType,
    /// Slack schedule reached `m1 + m2° = M`.
    ConstraintBinds,
    /// Binding schedule reached `m1 = M`.
    BudgetExhausted,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Integration {
    pub path: SampledPath,
    pub stop: StopReason,
    pub steps_accepted: usize,
    pub steps_rejected: usize,
    /// Sum of accepted local error estimates in `t`.
    pub error_estimate: f64,
}

// Dormand–Prince 5(4).
const C: [f64; 7] = [0.0, 0.2, 0.3, 0.8, 8.0 / 9.0, 1.0, 1.0];
const A: [[f64; 6]; 7] = [
    [0.0; 6],
    [0.2, 0.0, 0.0, 0.0, 0.0, 0.0],
    [3.0 / 40.0, 9.0 / 40.0, 0.0, 0.0, 0.0, 0.0],
    [44.0 / 45.0, -56.0 / 15.0, 32.0 / 9.0, 0.0, 0.0, 0.0],
    [19372.0 / 6561.0, -25360.0 / 2187.0, 64448.0 / 6561.0, -212.0 / 729.0, 0.0, 0.0],
    [9017.0 / 3168.0, -355.0 / 33.0, 46732.0 / 5247.0, 49.0 / 176.0, -5103.0 / 18656.0, 0.0],
    [35.0 / 384.0, 0.0, 500.0 / 1113.0, 125.0 / 192.0, -2187.0 / 6784.0, 11.0 / 84.0],
];
const E: [f64; 7] = [
    71.0 / 57600.0,
    0.0,
    -71.0 / 16695.0,
    71.0 / 1920.0,
    -17253.0 / 339200.0,
    22.0 / 525.0,
    -1.0 / 40.0,
];

struct Step {
    t_new: f64,
    slope_new: f64,
    error: f64,
}

fn dp_step<F>(f: &F, x: f64, y: f64, k1: f64, h: f64) -> Result<Step>
where
    F: Fn(f64, f64) -> Result<f64>,
{
    let mut k = [0.0; 7];
    k[0] = k1;
    for s in 1..7 {
        let mut acc = y;
        for (j, kj) in k.iter().enumerate().take(s) {
            acc += h * A[s][j] * kj;
        }
        if s == 6 {
            // FSAL: stage 7 is evaluated at the 5th-order solution.
            k[6] = f(x + h, acc)?;
            let err: f64 = h * E.iter().zip(k.iter()).map(|(e, kk)| e * kk).sum::<f64>();
            return Ok(Step {
                t_new: acc,
                slope_new: k[6],
                error: err,
            });
        }
        k[s] = f(x + C[s] * h, acc)?;
    }
    unreachable!()
}

fn hermite_t(a: &PathNode, b: &PathNode, m1: f64) -> f64 {
    let h = b.m1 - a.m1;
    let s = (m1 - a.m1) / h;
    let s2 = s * s;
    let s3 = s2 * s;
    (2.0 * s3 - 3.0 * s2 + 1.0) * a.t
        + (s3 - 2.0 * s2 + s) * h * a.slope
        + (-2.0 * s3 + 3.0 * s2) * b.t
        + (s3 - s2) * h * b.slope
}

/// Integrates `dt/dm1 = phi(m1, t)` for the given region from `start`
/// until the first stop event.
pub fn integrate_schedule(
    prims: &ModelPrimitives,
    start: (f64, f64),
    region: Region,
    stop: StopEvents,
    control: StepControl,
) -> Result<Integration> {
    let phi = |m1: f64, t: f64| rhs(prims, region, m1, t);
    let (m0, t0) = start;
    let boundary_reason = match region {
        Region::Slack => StopReason::ConstraintBinds,
        Region::Binding => StopReason::BudgetExhausted,
    };
    let k0 = phi(m0, t0)?;
    let single = |reason| {
        Ok(Integration {
            path: SampledPath::point(m0, t0, k0, region),
            stop: reason,
            steps_accepted: 0,
            steps_rejected: 0,
            error_estimate: 0.0,
        })
    };
    if t0 >= stop.t_hi {
        return single(StopReason::TopType);
    }
    if m0 >= stop.m1_stop {
        return single(boundary_reason);
    }
    let span = stop.m1_stop - m0;
    if k0 <= 0.0 {
        // Zero slope at the start is the usual Riley singularity; one Euler
        // micro-step must find the path advancing.
        let probe = m0 + 1e-6 * prims.budget.max(span);
        let kp = phi(probe.min(stop.m1_stop), t0)?;
        if kp <= 0.0 || k0 < 0.0 {
            return Err(Error::StalledIntegration { m1: m0, t: t0, slope: k0.min(kp) });
        }
    }

    let h_max = span * control.max_step_fraction;
    let mut h = (span * 1e-4).min(h_max);
    let mut nodes = vec![PathNode { m1: m0, t: t0, slope: k0, region }];
    let (mut x, mut y, mut k) = (m0, t0, k0);
    let (mut accepted, mut rejected) = (0, 0);
    let mut error_estimate = 0.0;

    loop {
        let remaining = stop.m1_stop - x;
        let last = h >= remaining;
        let h_try = if last { remaining } else { h };
        if h_try <= 1e-14 * x.abs().max(1.0) {
            return Err(Error::StepUnderflow { m1: x, h: h_try });
        }
        let step = dp_step(&phi, x, y, k, h_try)?;
        let scale = control.atol + control.rtol * y.abs().max(step.t_new.abs());
        let err = (step.error / scale).abs();
        if !err.is_finite() || err > 1.0 {
            rejected += 1;
            let factor = if err.is_finite() { (0.9 * err.powf(-0.2)).max(0.2) } else { 0.2 };
            h = h_try * factor;
            continue;
        }
        accepted += 1;
        error_estimate += step.error.abs();
        let x_new = if last { stop.m1_stop } else { x + h_try };
        // Rounding may undershoot `y` by a few ulps on near-flat steps.
        let t_new = if step.t_new < y && y - step.t_new <= 4.0 * f64::EPSILON * y.abs() {
            y
        } else {
            step.t_new
        };
        let next = PathNode { m1: x_new, t: t_new, slope: step.slope_new, region };
        if next.t >= stop.t_hi {
            let prev = *nodes.last().expect("non-empty");
            let crossing = bisect(
                "t - t_hi",
                |m| Ok(hermite_t(&prev, &next, m) - stop.t_hi),
                prev.m1,
                next.m1,
                EVENT_WIDTH,
            )?;
            let m_hit = crossing.hi;
            if m_hit > prev.m1 && stop.t_hi > prev.t {
                nodes.push(PathNode {
                    m1: m_hit,
                    t: stop.t_hi,
                    slope: phi(m_hit, stop.t_hi)?,
                    region,
                });
            }
            return Ok(Integration {
                path: SampledPath::new(nodes)?,
                stop: StopReason::TopType,
                steps_accepted: accepted,
                steps_rejected: rejected,
                error_estimate,
            });
        }
        let stalled = Error::StalledIntegration {
            m1: next.m1,
            t: next.t,
            slope: next.slope,
        };
        if next.t < y || next.slope <= 0.0 {
            return Err(stalled);
        }
        // Steps too short to move `t` in floating point advance the state
        // without adding a node; nodes stay strictly increasing in `t`.
        let mut top = nodes.last().expect("non-empty").t;
        if !(next.t > top) && last && nodes.len() > 1 {
            nodes.pop();
            top = nodes.last().expect("non-empty").t;
        }
        if next.t > top {
            nodes.push(next);
        } else if last {
            return Err(stalled);
        }
        x = x_new;
        y = t_new;
        k = step.slope_new;
        if last {
            return Ok(Integration {
                path: SampledPath::new(nodes)?,
                stop: boundary_reason,
                steps_accepted: accepted,
                steps_rejected: rejected,
                error_estimate,
            });
        }
        let grow = if err == 0.0 { 5.0 } else { (0.9 * err.powf(-0.2)).clamp(0.2, 5.0) };
        h = (h_try * grow).min(h_max);
    }
}
