//! A discrete-type analogue of the equilibrium built without the ODE, for
//! cross-checking the continuous solver.

use rayon::prelude::*;
use serde::Serialize;

use crate::equilibrium::Equilibrium;
use crate::error::{finite, Error, Result};
use crate::model::{ModelPrimitives, TypeDistribution};
use crate::numeric::{bisect, golden_max};
use crate::thresholds::compute_m2_circ;

const LADDER_WIDTH: f64 = 1e-13;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DiscreteAllocation {
    pub types: Vec<f64>,
    /// Prior mass of each type's cell, summing to one.
    pub weights: Vec<f64>,
    pub m1: Vec<f64>,
    pub m2: Vec<f64>,
    pub wage: Vec<f64>,
    /// First pooled type, if any.
    pub pool_start: Option<usize>,
    pub budget: f64,
    pub m2_circ: f64,
    pub n_signals: usize,
}

impl DiscreteAllocation {
    pub fn len(&self) -> usize {
        self.types.len()
    }

    pub fn is_empty(&self) -> bool {
        self.types.is_empty()
    }

    /// Spacing of the signal grid.
    pub fn signal_step(&self) -> f64 {
        self.budget / (self.n_signals - 1) as f64
    }

    pub fn type_step(&self) -> f64 {
        if self.len() < 2 {
            0.0
        } else {
            self.types[1] - self.types[0]
        }
    }

    pub fn utility(&self, prims: &ModelPrimitives, k: usize) -> f64 {
        self.wage[k] - prims.h(self.m2[k]) - prims.c(self.m1[k], self.types[k])
    }

    pub fn pool_threshold(&self) -> Option<f64> {
        self.pool_start.map(|k| self.types[k])
    }
}

/// Non-cognitive signal paired with `m1` on the ladder.
fn partner(m2_circ: f64, budget: f64, m1: f64) -> f64 {
    m2_circ.min(budget - m1).max(0.0)
}

/// Type grid with cell masses from the prior.
fn type_cells(dist: &TypeDistribution, n: usize) -> (Vec<f64>, Vec<f64>) {
    let (lo, hi) = (dist.t_lo, dist.t_hi);
    let types: Vec<f64> = (0..n)
        .map(|i| if i + 1 == n { hi } else { lo + (hi - lo) * i as f64 / (n - 1).max(1) as f64 })
        .collect();
    if n == 1 {
        return (types, vec![1.0]);
    }
    let edge = |i: usize| -> f64 {
        match i {
            0 => lo,
            i if i == n => hi,
            i => 0.5 * (types[i - 1] + types[i]),
        }
    };
    let weights = (0..n).map(|i| dist.cdf(edge(i + 1)) - dist.cdf(edge(i))).collect();
    (types, weights)
}

/// Least-cost separating ladder with a top pool. Each type takes the best
/// message, for itself, among those the next lower type would not mimic;
/// thresholds are solved exactly rather than snapped to the signal grid.
pub fn discrete_riley(
    prims: &ModelPrimitives,
    dist: &TypeDistribution,
    n_types: usize,
    n_signals: usize,
) -> Result<DiscreteAllocation> {
    if n_types < 1 || n_signals < 10 {
        return Err(Error::OutOfDomain {
            what: "discrete grid size",
            at: vec![n_types as f64, n_signals as f64],
        });
    }
    let m = prims.budget;
    let m2c = match compute_m2_circ(prims) {
        Err(Error::RootNotBracketed { .. }) => m,
        other => other?,
    };
    let (types, weights) = type_cells(dist, n_types);
    let own = |x: f64, t: f64| {
        let y = partner(m2c, m, x);
        finite("ladder payoff", prims.alpha * y + prims.f(x, t) - prims.h(y) - prims.c(x, t), &[x, t])
    };
    let pooled_wage = |k: usize| -> f64 {
        let mass: f64 = weights[k..].iter().sum();
        let total: f64 = (k..n_types).map(|j| weights[j] * prims.f(m, types[j])).sum();
        total / mass
    };
    let pool_utility = |k: usize| pooled_wage(k) - prims.c(m, types[k]) - prims.h(0.0);

    let mut m1 = Vec::with_capacity(n_types);
    let mut wage = Vec::with_capacity(n_types);
    let mut pool_start = None;
    for k in 0..n_types {
        let t = types[k];
        let best_own = golden_max(|x| own(x, t), 0.0, m, 1e-12)?;
        let choice = if k == 0 {
            Some(best_own)
        } else {
            let (a, tp) = (m1[k - 1], types[k - 1]);
            let u_prev = own(a, tp)?;
            let mimic = |x: f64| -> Result<f64> {
                let y = partner(m2c, m, x);
                Ok(prims.alpha * y + prims.f(x, t) - prims.h(y) - prims.c(x, tp) - u_prev)
            };
            if mimic(m)? > 0.0 {
                None
            } else if mimic(a)? <= 0.0 {
                Some(a.max(best_own))
            } else {
                Some(bisect("no-mimic threshold", mimic, a, m, LADDER_WIDTH)?.hi.max(best_own))
            }
        };
        let separate = match choice {
            Some(x) => Some((x, own(x, t)?)),
            None => None,
        };
        let pool_better = pool_utility(k) >= separate.map_or(f64::NEG_INFINITY, |s| s.1);
        if pool_better {
            pool_start = Some(k);
            break;
        }
        let (x, _) = separate.ok_or(Error::InfeasibleSeparation { t })?;
        m1.push(x);
        wage.push(prims.alpha * partner(m2c, m, x) + prims.f(x, t));
    }
    if let Some(k) = pool_start {
        let w = pooled_wage(k);
        m1.resize(n_types, m);
        wage.resize(n_types, w);
    }
    let m2 = m1
        .iter()
        .enumerate()
        .map(|(k, &x)| if pool_start.is_some_and(|p| k >= p) { 0.0 } else { partner(m2c, m, x) })
        .collect();
    Ok(DiscreteAllocation { types, weights, m1, m2, wage, pool_start, budget: m, m2_circ: m2c, n_signals })
}

/// Largest utility gain of any type from any grid or assigned message.
/// Assigned messages pay their assigned wage; other messages are priced at
/// the type minimizing the wage needed to make the deviation pay.
pub fn epsilon_equilibrium_check(
    alloc: &DiscreteAllocation,
    prims: &ModelPrimitives,
    _dist: &TypeDistribution,
) -> Result<EpsilonReport> {
    let n = alloc.len();
    let m = alloc.budget;
    let k = alloc.n_signals - 1;
    let utilities: Vec<f64> = (0..n).map(|i| alloc.utility(prims, i)).collect();
    let mut offers: Vec<(f64, f64, f64)> = (0..n).map(|i| (alloc.m1[i], alloc.m2[i], alloc.wage[i])).collect();
    let grid = |i: usize| if i == k { m } else { m * i as f64 / k as f64 };
    let off_path: Vec<(f64, f64)> = (0..=k)
        .flat_map(|i| (0..=k - i).map(move |j| (i, j)))
        .map(|(i, j)| (grid(i), if i + j == k { m - grid(i) } else { grid(j) }))
        .filter(|&(a, b)| !offers.iter().any(|o| o.0 == a && o.1 == b))
        .collect();
    let priced: Vec<(f64, f64, f64)> = off_path
        .par_iter()
        .map(|&(a, b)| {
            let mut best = (f64::INFINITY, 0);
            for i in 0..n {
                let need = utilities[i] + prims.c(a, alloc.types[i]);
                if need < best.0 {
                    best = (need, i);
                }
            }
            (a, b, prims.alpha * b + prims.f(a, alloc.types[best.1]))
        })
        .collect();
    offers.extend(priced);
    let gains: Vec<(f64, usize, f64, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let t = alloc.types[i];
            let mut best = (0.0f64, i, alloc.m1[i], alloc.m2[i]);
            for &(a, b, w) in &offers {
                let g = w - prims.h(b) - prims.c(a, t) - utilities[i];
                if g > best.0 {
                    best = (g, i, a, b);
                }
            }
            best
        })
        .collect();
    let worst = gains.into_iter().fold((0.0, 0, 0.0, 0.0), |acc, g| if g.0 > acc.0 { g } else { acc });
    Ok(EpsilonReport { epsilon: worst.0, type_index: worst.1, message: (worst.2, worst.3) })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct EpsilonReport {
    pub epsilon: f64,
    pub type_index: usize,
    pub message: (f64, f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Comparison {
    pub max_m1_gap: f64,
    pub max_m2_gap: f64,
    /// Largest signal gap in signal-grid steps.
    pub signal_steps: f64,
    pub pool_gap: Option<f64>,
    /// Pool boundary gap in type-grid steps.
    pub type_steps: Option<f64>,
    pub pool_mismatch: bool,
    pub compared: usize,
}

/// Differences between the discrete and continuous schedules over the
/// discrete types, skipping types between the two pool boundaries.
pub fn compare(eq: &Equilibrium, alloc: &DiscreteAllocation) -> Result<Comparison> {
    let cont = eq.thresholds.t_h;
    let disc = alloc.pool_threshold();
    let (lo, hi) = match (cont, disc) {
        (Some(a), Some(b)) => (a.min(b), a.max(b)),
        _ => (f64::INFINITY, f64::INFINITY),
    };
    let (mut g1, mut g2, mut compared) = (0.0f64, 0.0f64, 0usize);
    for k in 0..alloc.len() {
        let t = alloc.types[k];
        if t >= lo && t < hi {
            continue;
        }
        let (a, b) = eq.schedule_at(t)?;
        g1 = g1.max((a - alloc.m1[k]).abs());
        g2 = g2.max((b - alloc.m2[k]).abs());
        compared += 1;
    }
    let pool_gap = match (cont, disc) {
        (Some(a), Some(b)) => Some((a - b).abs()),
        _ => None,
    };
    let ts = alloc.type_step();
    Ok(Comparison {
        max_m1_gap: g1,
        max_m2_gap: g2,
        signal_steps: g1.max(g2) / alloc.signal_step(),
        pool_gap,
        type_steps: pool_gap.map(|g| if ts > 0.0 { g / ts } else { 0.0 }),
        pool_mismatch: cont.is_some() != disc.is_some(),
        compared,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::solve;
    use crate::riley_ode::StepControl;

    fn uniform13() -> TypeDistribution {
        TypeDistribution::uniform(1.0, 3.0).unwrap()
    }

    #[test]
    fn quad_ladder_tracks_continuous_schedule() {
        let d = uniform13();
        let p = ModelPrimitives::quadratic_benchmark(2.0);
        let eq = solve(&p, &d, StepControl::default()).unwrap();
        let a = discrete_riley(&p, &d, 100, 100).unwrap();
        let c = compare(&eq, &a).unwrap();
        assert!(!c.pool_mismatch);
        assert!(c.signal_steps <= 5.0 && c.type_steps.unwrap() <= 5.0, "{c:?}");
    }

    #[test]
    fn large_budget_has_no_pool() {
        let d = uniform13();
        let p = ModelPrimitives::quadratic_benchmark(10.0);
        let a = discrete_riley(&p, &d, 50, 50).unwrap();
        assert!(a.pool_start.is_none());
        assert!(a.m2.iter().all(|&y| (y - 1.0).abs() < 1e-12));
    }

    #[test]
    fn weights_sum_to_one() {
        let (_, w) = type_cells(&uniform13(), 7);
        assert!((w.iter().sum::<f64>() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn swapped_messages_are_not_an_equilibrium() {
        let d = uniform13();
        let p = ModelPrimitives::quadratic_benchmark(10.0);
        let mut a = discrete_riley(&p, &d, 20, 40).unwrap();
        let eps = epsilon_equilibrium_check(&a, &p, &d).unwrap().epsilon;
        a.m1.swap(5, 6);
        a.m2.swap(5, 6);
        a.wage.swap(5, 6);
        let bad = epsilon_equilibrium_check(&a, &p, &d).unwrap();
        assert!(bad.epsilon > eps && bad.epsilon > 0.0);
        assert!(bad.type_index == 5 || bad.type_index == 6);
    }

    #[test]
    fn single_type_has_no_gain() {
        let d = uniform13();
        let p = ModelPrimitives::quadratic_benchmark(10.0);
        let a = discrete_riley(&p, &d, 1, 20).unwrap();
        assert_eq!(epsilon_equilibrium_check(&a, &p, &d).unwrap().epsilon, 0.0);
    }
}
