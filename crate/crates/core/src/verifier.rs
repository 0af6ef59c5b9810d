//! Certification of an assembled equilibrium.

use rayon::prelude::*;
use serde::Serialize;

use crate::d1::{check_reasonable_with, d1_support, TypeUtilities, D1_TYPE_GRID};
use crate::equilibrium::{BeliefSupport, Equilibrium, Segment, BINDING_TOL};
use crate::error::Result;
use crate::riley_ode::{Region, SampledPath};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckStatus {
    Pass,
    Fail,
    NotApplicable,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CheckRecord {
    pub name: String,
    pub status: CheckStatus,
    pub worst_residual: f64,
    pub witness: Vec<f64>,
    pub tolerance: f64,
    pub note: String,
}

impl CheckRecord {
    pub fn graded(name: &str, worst: f64, witness: Vec<f64>, tolerance: f64) -> Self {
        let status = if worst <= tolerance { CheckStatus::Pass } else { CheckStatus::Fail };
        Self { name: name.into(), status, worst_residual: worst, witness, tolerance, note: String::new() }
    }

    pub fn not_applicable(name: &str, note: &str) -> Self {
        Self {
            name: name.into(),
            status: CheckStatus::NotApplicable,
            worst_residual: 0.0,
            witness: vec![],
            tolerance: 0.0,
            note: note.into(),
        }
    }

    pub fn with_note(mut self, note: impl Into<String>) -> Self {
        self.note = note.into();
        self
    }

    pub fn failed(&self) -> bool {
        self.status == CheckStatus::Fail
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerificationReport {
    pub checks: Vec<CheckRecord>,
    pub overall: CheckStatus,
}

impl VerificationReport {
    pub fn new(checks: Vec<CheckRecord>) -> Self {
        let overall = if checks.iter().any(CheckRecord::failed) { CheckStatus::Fail } else { CheckStatus::Pass };
        Self { checks, overall }
    }

    pub fn passed(&self) -> bool {
        self.overall == CheckStatus::Pass
    }

    pub fn get(&self, name: &str) -> Option<&CheckRecord> {
        self.checks.iter().find(|c| c.name == name)
    }

    pub fn failures(&self) -> Vec<&str> {
        self.checks.iter().filter(|c| c.failed()).map(|c| c.name.as_str()).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VerifyOptions {
    pub ic_types: usize,
    pub ic_messages: usize,
    pub ic_tol: f64,
    pub structure_types: usize,
    pub foc_tol: f64,
    pub bottom_tol: f64,
    pub indifference_tol: f64,
    pub d1_messages: usize,
    pub d1_types: usize,
    pub reasonable_samples: usize,
    pub seed: u64,
}

impl Default for VerifyOptions {
    fn default() -> Self {
        Self {
            ic_types: 201,
            ic_messages: 201,
            ic_tol: 1e-4,
            structure_types: 2001,
            foc_tol: 1e-6,
            bottom_tol: 1e-10,
            indifference_tol: 1e-8,
            d1_messages: 50,
            d1_types: D1_TYPE_GRID,
            reasonable_samples: 2000,
            seed: 0,
        }
    }
}

/// One type's equilibrium message.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ScheduleSample {
    pub t: f64,
    pub m1: f64,
    pub m2: f64,
    pub segment: Segment,
}

pub fn sample_schedule(eq: &Equilibrium, n: usize) -> Result<Vec<ScheduleSample>> {
    eq.type_grid(n)
        .into_iter()
        .map(|t| {
            let (m1, m2) = eq.schedule_at(t)?;
            Ok(ScheduleSample { t, m1, m2, segment: eq.segment_at(t)? })
        })
        .collect()
}

pub const MONOTONE: &str = "monotone";
pub const IC: &str = "incentive_compatibility";
pub const POOLED_MESSAGE: &str = "structure.pooled_message";
pub const POOL_INTERVAL: &str = "structure.pool_interval";
pub const SINGLE_JUMP: &str = "structure.single_jump";
pub const CONSTRAINT_SPLIT: &str = "structure.constraint_split";
pub const KINK: &str = "structure.kink";
pub const INDIFFERENCE: &str = "indifference";
pub const FOC: &str = "foc_residuals";
pub const BOTTOM_FOC: &str = "bottom_foc";
pub const D1: &str = "d1_consistency";
pub const REASONABLE: &str = "reasonable_beliefs";

/// Exact monotonicity of `m1`, `-m2` and `m1 + m2` across consecutive samples.
pub fn verify_monotone_samples(samples: &[ScheduleSample]) -> CheckRecord {
    let mut worst = 0.0f64;
    let mut witness = vec![];
    for w in samples.windows(2) {
        let (a, b) = (&w[0], &w[1]);
        // `m1 + (M - m1)` rounds to within an ulp of `M`, so two binding sums
        // may differ by two ulps.
        let (sa, sb) = (a.m1 + a.m2, b.m1 + b.m2);
        let sum_drop = sa - sb - 2.0 * f64::EPSILON * sa.abs().max(sb.abs());
        let drop = (a.m1 - b.m1).max(b.m2 - a.m2).max(sum_drop);
        if drop > worst {
            worst = drop;
            witness = vec![a.t, b.t];
        }
    }
    CheckRecord::graded(MONOTONE, worst, witness, 0.0)
}

pub fn verify_monotone(eq: &Equilibrium, n_types: usize) -> Result<CheckRecord> {
    Ok(verify_monotone_samples(&sample_schedule(eq, n_types)?))
}

/// Largest gain of any grid type from any grid message in the feasible
/// triangle.
pub fn verify_ic(eq: &Equilibrium, n_types: usize, n_messages: usize, tol: f64) -> Result<CheckRecord> {
    let m = eq.prims.budget;
    let k = n_messages.max(2) - 1;
    let grid = |i: usize| if i == k { m } else { m * i as f64 / k as f64 };
    let pairs: Vec<(f64, f64)> = (0..=k)
        .flat_map(|i| (0..=k - i).map(move |j| (i, j)))
        .map(|(i, j)| (grid(i), if i + j == k { m - grid(i) } else { grid(j) }))
        .collect();
    let offers: Vec<(f64, f64, f64)> = pairs
        .par_iter()
        .map(|&(m1, m2)| Ok((m1, m2, eq.wage_at(m1, m2)? - eq.prims.h(m2))))
        .collect::<Result<_>>()?;
    let types = eq.type_grid(n_types);
    let per_type: Vec<(f64, Vec<f64>)> = types
        .par_iter()
        .map(|&t| {
            let u = eq.utility(t)?;
            let mut best = (f64::NEG_INFINITY, 0.0, 0.0);
            for &(m1, m2, net) in &offers {
                let gain = net - eq.prims.c(m1, t) - u;
                if gain > best.0 {
                    best = (gain, m1, m2);
                }
            }
            Ok((best.0, vec![t, best.1, best.2]))
        })
        .collect::<Result<_>>()?;
    let (worst, witness) = per_type
        .into_iter()
        .fold((f64::NEG_INFINITY, vec![]), |acc, x| if x.0 > acc.0 { x } else { acc });
    Ok(CheckRecord::graded(IC, worst.max(0.0), witness, tol))
}

/// Indices `i` where the step from sample `i` to `i + 1` exceeds ten times
/// the median of up to five neighbouring steps on each side.
pub fn detect_jumps(samples: &[ScheduleSample]) -> Vec<usize> {
    let steps: Vec<f64> = samples
        .windows(2)
        .map(|w| (w[1].m1 - w[0].m1).abs() + (w[1].m2 - w[0].m2).abs())
        .collect();
    (0..steps.len())
        .filter(|&i| {
            let lo = i.saturating_sub(5);
            let hi = (i + 6).min(steps.len());
            let mut near: Vec<f64> = (lo..hi).filter(|&j| j != i).map(|j| steps[j]).collect();
            if near.is_empty() {
                return false;
            }
            near.sort_by(f64::total_cmp);
            let n = near.len();
            let median = if n % 2 == 1 { near[n / 2] } else { 0.5 * (near[n / 2 - 1] + near[n / 2]) };
            steps[i] > 0.0 && steps[i] > 10.0 * median
        })
        .collect()
}

pub fn verify_structure_samples(eq: &Equilibrium, samples: &[ScheduleSample]) -> Vec<CheckRecord> {
    let m = eq.prims.budget;
    let th = &eq.thresholds;
    let is_pooled = |s: &ScheduleSample| s.m1 == m && s.m2 == 0.0;
    let mut out = Vec::new();

    let labelled: Vec<&ScheduleSample> = samples.iter().filter(|s| s.segment == Segment::Pool).collect();
    out.push(if labelled.is_empty() {
        CheckRecord::not_applicable(POOLED_MESSAGE, "no pooled types")
    } else {
        let worst = labelled.iter().map(|s| (s.m1 - m).abs().max(s.m2.abs())).fold(0.0, f64::max);
        let w = labelled.iter().find(|s| !is_pooled(s)).map(|s| vec![s.t, s.m1, s.m2]).unwrap_or_default();
        CheckRecord::graded(POOLED_MESSAGE, worst, w, 0.0)
    });

    let pooled: Vec<usize> = (0..samples.len()).filter(|&i| is_pooled(&samples[i])).collect();
    out.push(match (pooled.first(), th.t_h) {
        (None, None) => CheckRecord::not_applicable(POOL_INTERVAL, "no pool"),
        (None, Some(h)) => CheckRecord::graded(POOL_INTERVAL, 1.0, vec![h], 0.0).with_note("pool expected but absent"),
        (Some(&first), _) => {
            let holes = (first..samples.len()).filter(|i| !is_pooled(&samples[*i])).count();
            let w = (first..samples.len()).find(|i| !is_pooled(&samples[*i])).map(|i| vec![samples[i].t]).unwrap_or_default();
            let label_mismatch = th.t_h.map_or(true, |h| samples[first].t < h);
            CheckRecord::graded(POOL_INTERVAL, holes as f64 + f64::from(u8::from(label_mismatch && holes == 0 && th.t_h.is_none())), w, 0.0)
                .with_note(format!("pool starts at sample t = {}", samples[first].t))
        }
    });

    let jumps = detect_jumps(samples);
    let step = samples.get(1).map_or(0.0, |s| s.t) - samples.first().map_or(0.0, |s| s.t);
    out.push(match th.t_h {
        Some(h) => {
            let located = jumps.len() == 1 && {
                let i = jumps[0];
                samples[i].t < h + step && samples[i + 1].t >= h - step
            };
            let w: Vec<f64> = jumps.iter().map(|&i| samples[i].t).collect();
            CheckRecord::graded(SINGLE_JUMP, if located { 0.0 } else { 1.0 }, w, 0.0)
                .with_note(format!("{} jump(s)", jumps.len()))
        }
        None => {
            let w: Vec<f64> = jumps.iter().map(|&i| samples[i].t).collect();
            CheckRecord::graded(SINGLE_JUMP, jumps.len() as f64, w, 0.0)
        }
    });

    let interior_ell = th.t_ell < eq.dist.t_hi;
    let mut bad = 0usize;
    let mut w = vec![];
    for s in samples {
        let binding = (s.m1 + s.m2 - m).abs() <= BINDING_TOL;
        let expect = interior_ell && s.t >= th.t_ell;
        if binding != expect {
            bad += 1;
            if w.is_empty() {
                w = vec![s.t, s.m1 + s.m2];
            }
        }
    }
    out.push(CheckRecord::graded(CONSTRAINT_SPLIT, bad as f64, w, 0.0));

    out.push(kink_measurement(eq));
    out
}

pub fn verify_structure(eq: &Equilibrium, n_types: usize) -> Result<Vec<CheckRecord>> {
    Ok(verify_structure_samples(eq, &sample_schedule(eq, n_types)?))
}

/// One-sided difference quotients of `m1*` at the binding threshold. Only
/// reported.
fn kink_measurement(eq: &Equilibrium) -> CheckRecord {
    let (lo, hi) = (eq.dist.t_lo, eq.dist.t_hi);
    let te = eq.thresholds.t_ell;
    let upper = eq.thresholds.t_h.unwrap_or(hi);
    let d = 1e-5;
    if !(te - d > lo && te + d < upper) {
        return CheckRecord::not_applicable(KINK, "no interior kink");
    }
    let m1 = |t: f64| eq.schedule_at(t).map(|x| x.0);
    match (m1(te - d), m1(te), m1(te + d)) {
        (Ok(a), Ok(b), Ok(c)) => {
            let (left, right) = ((b - a) / d, (c - b) / d);
            let mut r = CheckRecord::not_applicable(KINK, "");
            r.worst_residual = (right - left).abs();
            r.witness = vec![te, left, right];
            r.note = format!("dm1/dt left {left:.6e}, right {right:.6e}");
            r
        }
        _ => CheckRecord::not_applicable(KINK, "schedule unavailable near the kink"),
    }
}

pub fn verify_indifference(eq: &Equilibrium, tol: f64) -> Result<CheckRecord> {
    let (Some(h), Some(tp)) = (eq.thresholds.t_h, eq.thresholds.t_prime) else {
        return Ok(CheckRecord::not_applicable(INDIFFERENCE, "no pool"));
    };
    let residual = eq.indifference_gap(h)?.abs();
    let lo = eq.dist.t_lo;
    let mut shape_bad = 0usize;
    let mut w = vec![h];
    for i in 1..50 {
        let below = lo + (h - lo) * i as f64 / 50.0;
        if !(eq.indifference_gap(below)? < 0.0) {
            shape_bad += 1;
            w.push(below);
        }
        let above = h + (tp - h) * i as f64 / 50.0;
        if above > h && !(eq.indifference_gap(above)? > 0.0) {
            shape_bad += 1;
            w.push(above);
        }
    }
    let worst = if shape_bad > 0 { residual.max(f64::INFINITY) } else { residual };
    Ok(CheckRecord::graded(INDIFFERENCE, worst, w, tol)
        .with_note(format!("|gap(t_h)| = {residual:.3e}, {shape_bad} shape violation(s)")))
}

fn node_residual(eq: &Equilibrium, path: &SampledPath, m1: f64, t: f64, region: Region) -> Result<f64> {
    let p = &eq.prims;
    let slope = path.dt_dm1_at(m1)?;
    let base = p.f_m1(m1, t) + p.f_t(m1, t) * slope - p.c_m1(m1, t);
    Ok(match region {
        Region::Slack => base,
        Region::Binding => base - p.alpha + p.h_prime(p.budget - m1),
    })
}

/// KKT residual of a scalar concave maximization on `[0, M]`.
fn kkt(marginal: f64, x: f64, m: f64) -> f64 {
    if x <= 0.0 {
        marginal.max(0.0)
    } else if x >= m {
        (-marginal).max(0.0)
    } else {
        marginal.abs()
    }
}

/// Local incentive conditions at interior nodes of both separating
/// segments, and the lowest type's optimality conditions.
pub fn verify_foc_residuals(eq: &Equilibrium, tol: f64, bottom_tol: f64) -> Result<Vec<CheckRecord>> {
    let mut worst = 0.0f64;
    let mut witness = vec![];
    let mut count = 0usize;
    for (region, path) in [(Region::Slack, &eq.schedule.slack), (Region::Binding, &eq.schedule.binding)] {
        let Some(path) = path else { continue };
        let nodes = path.nodes();
        if nodes.len() < 3 {
            continue;
        }
        for n in &nodes[1..nodes.len() - 1] {
            if (n.t - eq.thresholds.t_ell).abs() <= 1e-12 {
                continue;
            }
            let r = node_residual(eq, path, n.m1, n.t, region)?.abs();
            count += 1;
            if r > worst {
                worst = r;
                witness = vec![n.t, n.m1];
            }
        }
    }
    let interior = if count == 0 {
        CheckRecord::not_applicable(FOC, "no interior nodes")
    } else {
        CheckRecord::graded(FOC, worst, witness, tol).with_note(format!("{count} nodes"))
    };

    let p = &eq.prims;
    let m = p.budget;
    let t = eq.dist.t_lo;
    let (m1, m2) = eq.schedule_at(t)?;
    let bottom = if eq.schedule.slack.is_some() {
        let a = kkt(p.f_m1(m1, t) - p.c_m1(m1, t), m1, m);
        let b = (p.alpha - p.h_prime(m2)).abs();
        CheckRecord::graded(BOTTOM_FOC, a.max(b), vec![t, m1, m2], bottom_tol)
    } else {
        let g = p.f_m1(m1, t) - p.c_m1(m1, t) - p.alpha + p.h_prime(m - m1);
        CheckRecord::graded(BOTTOM_FOC, kkt(g, m1, m), vec![t, m1, m2], bottom_tol)
    };
    Ok(vec![interior, bottom])
}

/// Whether `(m1, m2)` is some type's equilibrium message.
fn on_path(eq: &Equilibrium, m1: f64, m2: f64, belief: &BeliefSupport) -> bool {
    match *belief {
        BeliefSupport::Interval { .. } => true,
        BeliefSupport::Point { t } => eq
            .schedule_at(t)
            .map(|(a, b)| (a - m1).abs() <= 1e-9 && (b - m2).abs() <= 1e-9)
            .unwrap_or(false),
    }
}

/// Belief supports on an off-path message grid lie in the D1 surviving
/// sets, one type step of slack allowed; the three off-path regions
/// single out `t_h`, `t_lo` and `t_hi`.
pub fn verify_d1_with<F>(eq: &Equilibrium, belief: F, n_messages: usize, n_types: usize) -> Result<CheckRecord>
where
    F: Fn(f64, f64) -> Result<BeliefSupport> + Sync,
{
    let table = TypeUtilities::new(eq, n_types)?;
    let step = table.step();
    let m = eq.prims.budget;
    let k = n_messages.max(2) - 1;
    let grid = |i: usize| m * i as f64 / k as f64;
    let messages: Vec<(f64, f64)> = (0..=k)
        .flat_map(|i| (0..=k - i).map(move |j| (i, j)))
        .map(|(i, j)| (grid(i), if i + j == k { m - grid(i) } else { grid(j) }))
        .collect();
    let pre_pool = eq.pre_pool_action();
    let m1_low = eq.schedule.m1_start();
    let top = eq.schedule.m1_end();
    let (t_lo, t_hi) = (eq.dist.t_lo, eq.dist.t_hi);
    let results: Vec<(f64, Vec<f64>, usize)> = messages
        .par_iter()
        .map(|&(m1, m2)| {
            let b = belief(m1, m2)?;
            if on_path(eq, m1, m2, &eq.belief_at(m1, m2)?) {
                return Ok((0.0, vec![], 0));
            }
            let r = d1_support(eq, m1, m2, &table)?;
            let mut gap = (r.hull.0 - b.lo()).max(b.hi() - r.hull.1).max(0.0);
            let target = match (eq.thresholds.t_h, pre_pool) {
                (Some(h), Some((a, _))) if m1 > a && m1 < m => Some(h),
                _ if m1 < m1_low => Some(t_lo),
                (None, _) if m1 > top => Some(t_hi),
                _ => None,
            };
            if let Some(x) = target {
                gap = gap.max((r.hull.0 - x).abs()).max((r.hull.1 - x).abs());
            }
            // Within a type step counts as contained.
            let excess = (gap - step).max(0.0);
            Ok((excess, vec![m1, m2, b.lo(), b.hi(), r.hull.0, r.hull.1], 1))
        })
        .collect::<Result<_>>()?;
    let checked: usize = results.iter().map(|r| r.2).sum();
    let (worst, witness, _) = results
        .into_iter()
        .fold((0.0, vec![], 0), |acc, x| if x.0 > acc.0 { x } else { acc });
    Ok(CheckRecord::graded(D1, worst, witness, 0.0).with_note(format!("{checked} off-path messages")))
}

pub fn verify_d1(eq: &Equilibrium, n_messages: usize, n_types: usize) -> Result<CheckRecord> {
    verify_d1_with(eq, |a, b| eq.belief_at(a, b), n_messages, n_types)
}

pub fn verify_reasonable_with<F>(eq: &Equilibrium, belief: F, samples: usize, seed: u64) -> Result<CheckRecord>
where
    F: Fn(f64, f64) -> Result<BeliefSupport>,
{
    let r = check_reasonable_with(eq.prims.budget, belief, samples, seed)?;
    let witness = r.witness.map(|(a, b, c)| vec![a, b, c]).unwrap_or_default();
    Ok(CheckRecord::graded(REASONABLE, if r.passed { 0.0 } else { 1.0 }, witness, 0.0)
        .with_note(format!("{} slack pairs", r.pairs)))
}

/// Every check on the equilibrium itself.
pub fn verify_all(eq: &Equilibrium, opts: &VerifyOptions) -> Result<VerificationReport> {
    let samples = sample_schedule(eq, opts.structure_types)?;
    verify_all_with(eq, &samples, |a, b| eq.belief_at(a, b), opts)
}

/// As [`verify_all`], but with the schedule samples and the belief map
/// supplied by the caller.
pub fn verify_all_with<F>(
    eq: &Equilibrium,
    samples: &[ScheduleSample],
    belief: F,
    opts: &VerifyOptions,
) -> Result<VerificationReport>
where
    F: Fn(f64, f64) -> Result<BeliefSupport> + Sync,
{
    let (ic, rest) = rayon::join(
        || verify_ic(eq, opts.ic_types, opts.ic_messages, opts.ic_tol),
        || -> Result<Vec<CheckRecord>> {
            let mut v = vec![verify_monotone_samples(samples)];
            v.extend(verify_structure_samples(eq, samples));
            v.push(verify_indifference(eq, opts.indifference_tol)?);
            v.extend(verify_foc_residuals(eq, opts.foc_tol, opts.bottom_tol)?);
            v.push(verify_d1_with(eq, &belief, opts.d1_messages, opts.d1_types)?);
            v.push(verify_reasonable_with(eq, &belief, opts.reasonable_samples, opts.seed)?);
            Ok(v)
        },
    );
    let mut checks = rest?;
    checks.insert(1, ic?);
    Ok(VerificationReport::new(checks))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::equilibrium::solve;
    use crate::model::{ModelPrimitives, TypeDistribution};
    use crate::riley_ode::StepControl;

    fn quad(m: f64) -> Equilibrium {
        let d = TypeDistribution::uniform(1.0, 3.0).unwrap();
        solve(&ModelPrimitives::quadratic_benchmark(m), &d, StepControl::default()).unwrap()
    }

    #[test]
    fn quad_pool_passes_everything() {
        let eq = quad(2.0);
        let opts = VerifyOptions { ic_types: 51, ic_messages: 51, ..VerifyOptions::default() };
        let r = verify_all(&eq, &opts).unwrap();
        assert!(r.passed(), "{:#?}", r.checks.iter().filter(|c| c.failed()).collect::<Vec<_>>());
    }

    #[test]
    fn swapped_pair_breaks_monotonicity() {
        let eq = quad(2.0);
        let mut s = sample_schedule(&eq, 201).unwrap();
        assert_eq!(verify_monotone_samples(&s).status, CheckStatus::Pass);
        let (a, b) = (s[50], s[51]);
        (s[50].m1, s[50].m2, s[51].m1, s[51].m2) = (b.m1, b.m2, a.m1, a.m2);
        let r = verify_monotone_samples(&s);
        assert!(r.failed());
        assert_eq!(r.witness, vec![s[50].t, s[51].t]);
    }

    #[test]
    fn separating_no_binding_structure() {
        let eq = quad(10.0);
        let recs = verify_structure(&eq, 2001).unwrap();
        assert!(recs.iter().all(|r| !r.failed()), "{recs:#?}");
        let s = sample_schedule(&eq, 101).unwrap();
        assert!(s.iter().all(|x| x.m2 == s[0].m2 && (x.m2 - 1.0).abs() < 1e-12));
    }

    #[test]
    fn corrupted_alpha_shows_in_foc() {
        let mut eq = quad(2.0);
        eq.prims.alpha += 0.01;
        let r = verify_foc_residuals(&eq, 1e-6, 1e-10).unwrap();
        assert!(r[0].failed() && (r[0].worst_residual - 0.01).abs() < 1e-6);
        assert!(r[1].failed());
    }
}
