//! Criterion D1 on a type grid, and the reasonable-belief property.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::equilibrium::{constraint_status, BeliefSupport, Equilibrium, BINDING_TOL};
use crate::error::Result;

pub const D1_TYPE_GRID: usize = 2001;
pub const D1_TIE_TOL: f64 = 1e-9;

/// Smallest wage at which type `t` weakly gains from sending `(m1, m2)`.
pub fn min_inducing_wage(eq: &Equilibrium, t: f64, m1: f64, m2: f64) -> Result<f64> {
    constraint_status(m1, m2, eq.prims.budget)?;
    Ok(eq.utility(t)? + eq.prims.c(m1, t) + eq.prims.h(m2))
}

/// Equilibrium utilities tabulated on an even type grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TypeUtilities {
    pub types: Vec<f64>,
    pub utility: Vec<f64>,
}

impl TypeUtilities {
    pub fn new(eq: &Equilibrium, n: usize) -> Result<Self> {
        let types = eq.type_grid(n.max(2));
        let utility = types.par_iter().map(|&t| eq.utility(t)).collect::<Result<Vec<_>>>()?;
        Ok(Self { types, utility })
    }

    pub fn step(&self) -> f64 {
        self.types[1] - self.types[0]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct D1Result {
    pub message: (f64, f64),
    pub min_wage: Vec<f64>,
    /// Grid indices attaining the minimum within [`D1_TIE_TOL`].
    pub survivors: Vec<usize>,
    /// Interval hull of the surviving types.
    pub hull: (f64, f64),
}

impl D1Result {
    /// Whether `[lo, hi]` lies within the hull widened by `slack`.
    pub fn covers(&self, lo: f64, hi: f64, slack: f64) -> bool {
        lo >= self.hull.0 - slack && hi <= self.hull.1 + slack
    }
}

pub fn d1_support(eq: &Equilibrium, m1: f64, m2: f64, table: &TypeUtilities) -> Result<D1Result> {
    constraint_status(m1, m2, eq.prims.budget)?;
    let h = eq.prims.h(m2);
    let min_wage: Vec<f64> = table
        .types
        .iter()
        .zip(&table.utility)
        .map(|(&t, &u)| u + eq.prims.c(m1, t) + h)
        .collect();
    let best = min_wage.iter().copied().fold(f64::INFINITY, f64::min);
    let survivors: Vec<usize> = (0..min_wage.len())
        .filter(|&i| min_wage[i] <= best + D1_TIE_TOL)
        .collect();
    let hull = (
        table.types[survivors[0]],
        table.types[*survivors.last().expect("minimum attained")],
    );
    Ok(D1Result { message: (m1, m2), min_wage, survivors, hull })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReasonableCheck {
    pub passed: bool,
    pub pairs: usize,
    /// `(m1, m2, m2')` with differing beliefs.
    pub witness: Option<(f64, f64, f64)>,
}

/// Samples pairs of slack messages sharing `m1` and compares their belief
/// supports. A binding message is the only binding one with its `m1`, so
/// binding pairs are trivially consistent.
pub fn check_reasonable_with<F>(budget: f64, belief: F, sample_count: usize, seed: u64) -> Result<ReasonableCheck>
where
    F: Fn(f64, f64) -> Result<BeliefSupport>,
{
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = 0;
    for _ in 0..sample_count {
        let m1 = rng.gen_range(0.0..budget);
        let room = budget - m1 - 2.0 * BINDING_TOL;
        if room <= 0.0 {
            continue;
        }
        let (a, b) = (rng.gen_range(0.0..room), rng.gen_range(0.0..room));
        pairs += 1;
        if belief(m1, a)? != belief(m1, b)? {
            return Ok(ReasonableCheck { passed: false, pairs, witness: Some((m1, a, b)) });
        }
    }
    Ok(ReasonableCheck { passed: true, pairs, witness: None })
}

pub fn check_reasonable(eq: &Equilibrium, sample_count: usize, seed: u64) -> Result<ReasonableCheck> {
    check_reasonable_with(eq.prims.budget, |a, b| eq.belief_at(a, b), sample_count, seed)
}
