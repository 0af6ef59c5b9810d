//! Acceptance suite. Each criterion prints one PASS/FAIL line; the process
//! exits non-zero if any criterion fails.

use std::collections::BTreeSet;
use std::process::ExitCode;
use std::time::Instant;

use sigbudget::d1::{d1_support, TypeUtilities, D1_TYPE_GRID};
use sigbudget::equilibrium::{solve, BeliefSupport, Equilibrium};
use sigbudget::model::{
    truncated_mean_output, CostFamily, ModelPrimitives, NoncogFamily, OutputFamily, TypeDistribution,
};
use sigbudget::oracle::{compare, discrete_riley};
use sigbudget::riley_ode::StepControl;
use sigbudget::thresholds::{compute_thresholds, scan_gap, Regime};
use sigbudget::verifier::{
    sample_schedule, verify_all, verify_all_with, verify_d1, verify_foc_residuals, verify_ic,
    verify_monotone_samples, verify_structure_samples, CheckRecord, VerifyOptions, BOTTOM_FOC, FOC,
    INDIFFERENCE, MONOTONE, REASONABLE,
};

type Outcome = Result<(bool, String), String>;

fn uniform13() -> TypeDistribution {
    TypeDistribution::uniform(1.0, 3.0).unwrap()
}

fn quad(m: f64) -> Equilibrium {
    solve(&ModelPrimitives::quadratic_benchmark(m), &uniform13(), StepControl::default()).unwrap()
}

fn power_family(b: f64, k: f64, m: f64) -> ModelPrimitives {
    ModelPrimitives::new(
        CostFamily::Power { a: 2.0, b },
        OutputFamily::Affine { gamma: 0.0 },
        NoncogFamily::Quadratic { k },
        2.0,
        m,
    )
}

fn err<E: std::fmt::Debug>(e: E) -> String {
    format!("{e:?}")
}

/// Fixed-step RK4 on the binding branch of the benchmark, from the kink
/// `(1, sqrt 2)`, with the indifference crossing located by bisection
/// inside the bracketing step. Returns `(t_h, t')`.
fn reference_thresholds() -> (f64, f64) {
    let rhs = |m1: f64, t: f64| m1 / t + m1 - 1.0;
    let rk4 = |m1: f64, t: f64, h: f64| {
        let k1 = rhs(m1, t);
        let k2 = rhs(m1 + 0.5 * h, t + 0.5 * h * k1);
        let k3 = rhs(m1 + 0.5 * h, t + 0.5 * h * k2);
        let k4 = rhs(m1 + h, t + h * k3);
        t + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    };
    let gap = |m1: f64, t: f64| {
        let pool = 0.5 * (t + 3.0) - 2.0 / t;
        let sep = (2.0 - m1) + t - m1 * m1 / (2.0 * t) - 0.5 * (2.0 - m1) * (2.0 - m1);
        pool - sep
    };
    let n = 200_000;
    let h = 1.0 / n as f64;
    let (mut m1, mut t) = (1.0, 2f64.sqrt());
    let mut t_h = f64::NAN;
    for _ in 0..n {
        let t_next = rk4(m1, t, h);
        if t_h.is_nan() && gap(m1, t) < 0.0 && gap(m1 + h, t_next) >= 0.0 {
            let (mut a, mut b) = (0.0, h);
            for _ in 0..80 {
                let mid = 0.5 * (a + b);
                if gap(m1 + mid, rk4(m1, t, mid)) < 0.0 {
                    a = mid;
                } else {
                    b = mid;
                }
            }
            t_h = rk4(m1, t, 0.5 * (a + b));
        }
        m1 += h;
        t = t_next;
    }
    (t_h, t)
}

fn criterion_1() -> Outcome {
    let start = Instant::now();
    let eq = quad(2.0);
    let elapsed = start.elapsed().as_secs_f64();
    let root2 = 2f64.sqrt();
    let mut worst = 0.0f64;
    for i in 0..2001 {
        let t = 1.0 + (root2 - 1.0) * i as f64 / 2000.0;
        let (m1, _) = eq.schedule_at(t).map_err(err)?;
        worst = worst.max((m1 - (t * t - 1.0).max(0.0).sqrt()).abs());
    }
    let ell = (eq.thresholds.t_ell - root2).abs();
    let m2c = (eq.thresholds.m2_circ - 1.0).abs();
    let pass = worst <= 1e-6 && ell <= 1e-6 && m2c <= 1e-12 && elapsed <= 1.0;
    Ok((pass, format!("max|m1 - sqrt(t^2-1)| = {worst:.2e}, |t_ell - sqrt2| = {ell:.2e}, |m2° - 1| = {m2c:.1e}, solve {elapsed:.3}s")))
}

fn criterion_2() -> Outcome {
    let p = ModelPrimitives::quadratic_benchmark(2.0);
    let d = uniform13();
    let s = compute_thresholds(&p, &d, StepControl::default()).map_err(err)?;
    let pool_lo = truncated_mean_output(&p, &d, 1.0).map_err(err)? - p.c(2.0, 1.0) - p.h(0.0);
    let (m1, m2, _) = s.schedule.signals(1.0).map_err(err)?;
    let u_lo = p.payoff(m1, m2, 1.0, 1.0);
    let pool = s.pool.ok_or("no pool threshold")?;
    let (changes, _) = scan_gap(&p, &d, &s.schedule, s.thresholds.t_prime.unwrap()).map_err(err)?;
    let (ref_th, ref_tp) = reference_thresholds();
    let dth = (pool.t_h - ref_th).abs();
    let dtp = (s.thresholds.t_prime.unwrap() - ref_tp).abs();
    let pass = pool_lo < u_lo && pool.residual.abs() <= 1e-8 && changes == 1 && dth <= 1e-8;
    Ok((
        pass,
        format!(
            "existence {pool_lo:.3} < {u_lo:.3}, |gap(t_h)| = {:.2e}, sign changes {changes}, t_h = {:.10} (reference {ref_th:.10}, diff {dth:.1e}), t' diff {dtp:.1e}",
            pool.residual.abs(),
            pool.t_h
        ),
    ))
}

fn criterion_3() -> Outcome {
    let eq = quad(2.0);
    let r = verify_foc_residuals(&eq, 1e-6, 1e-10).map_err(err)?;
    let pass = r.iter().all(|c| !c.failed());
    Ok((pass, format!("{FOC} {:.2e} ({}), {BOTTOM_FOC} {:.2e}", r[0].worst_residual, r[0].note, r[1].worst_residual)))
}

fn criterion_4() -> Outcome {
    let eq = quad(2.0);
    let start = Instant::now();
    let r = verify_ic(&eq, 201, 201, 1e-4).map_err(err)?;
    let elapsed = start.elapsed().as_secs_f64();
    Ok((!r.failed() && elapsed <= 60.0, format!("max gain {:.2e} at {:?}, {elapsed:.2}s", r.worst_residual, r.witness)))
}

fn structure_ok(eq: &Equilibrium) -> Result<(bool, Vec<CheckRecord>), String> {
    let s = sample_schedule(eq, 2001).map_err(err)?;
    let mut recs = vec![verify_monotone_samples(&s)];
    recs.extend(verify_structure_samples(eq, &s));
    Ok((recs.iter().all(|r| !r.failed()), recs))
}

fn criterion_5() -> Outcome {
    let eq = quad(2.0);
    let (ok, recs) = structure_ok(&eq)?;
    let summary: Vec<String> = recs.iter().map(|r| format!("{} {:?}", r.name, r.status)).collect();
    Ok((ok, summary.join(", ")))
}

fn criterion_6() -> Outcome {
    let mut notes = vec![];
    let mut pass = true;

    let eq = quad(2.0);
    let r = verify_d1(&eq, 50, D1_TYPE_GRID).map_err(err)?;
    pass &= !r.failed();
    notes.push(format!("pool instance containment excess {:.1e} ({})", r.worst_residual, r.note));
    let table = TypeUtilities::new(&eq, D1_TYPE_GRID).map_err(err)?;
    let step = table.step();
    let th = eq.thresholds.t_h.unwrap();
    let (a, b) = eq.pre_pool_action().unwrap();
    let mut worst = 0.0f64;
    let mut count = 0;
    for i in 1..50 {
        let m1 = a + (2.0 - a) * i as f64 / 50.0;
        for j in 0..=10 {
            let m2 = (b.min(2.0 - m1)) * j as f64 / 10.0;
            let h = d1_support(&eq, m1, m2, &table).map_err(err)?.hull;
            worst = worst.max((h.0 - th).abs()).max((h.1 - th).abs());
            count += 1;
        }
    }
    pass &= worst <= step;
    notes.push(format!("rectangle {count} msgs, max |hull - t_h| = {worst:.1e}"));

    let p = ModelPrimitives { output: OutputFamily::Affine { gamma: 0.5 }, ..ModelPrimitives::quadratic_benchmark(10.0) };
    let eq = solve(&p, &uniform13(), StepControl::default()).map_err(err)?;
    let r = verify_d1(&eq, 50, D1_TYPE_GRID).map_err(err)?;
    pass &= !r.failed();
    let table = TypeUtilities::new(&eq, D1_TYPE_GRID).map_err(err)?;
    let low = eq.schedule.m1_start();
    let top = eq.schedule.m1_end();
    let (mut below, mut above) = (0.0f64, 0.0f64);
    for i in 0..20 {
        let m1 = low * i as f64 / 20.0;
        let h = d1_support(&eq, m1, 1.0, &table).map_err(err)?.hull;
        below = below.max((h.0 - 1.0).abs()).max((h.1 - 1.0).abs());
        let m1 = top + (10.0 - 1.0 - top) * (i + 1) as f64 / 21.0;
        let h = d1_support(&eq, m1, 1.0, &table).map_err(err)?.hull;
        above = above.max((h.0 - 3.0).abs()).max((h.1 - 3.0).abs());
    }
    pass &= below <= table.step() && above <= table.step();
    notes.push(format!(
        "gamma=0.5 M=10: containment excess {:.1e}, below m1_low {below:.1e}, above top {above:.1e}",
        r.worst_residual
    ));
    Ok((pass, notes.join("; ")))
}

fn criterion_7() -> Outcome {
    let mut seen = BTreeSet::new();
    let mut notes = vec![];
    let mut pass = true;
    for (name, b, k) in [("A", 1.0, 1.0), ("D", 4.0, 4.0)] {
        for m in [0.9, 1.05, 1.5, 2.0, 3.9, 10.0] {
            match solve(&power_family(b, k, m), &uniform13(), StepControl::default()) {
                Ok(eq) => {
                    let (ok, _) = structure_ok(&eq)?;
                    pass &= ok;
                    seen.insert(eq.thresholds.regime.name());
                    notes.push(format!("{name}{m}:{}{}", eq.thresholds.regime.name(), if ok { "" } else { "(structure FAIL)" }));
                }
                Err(e) => notes.push(format!("{name}{m}:{}", err(e).split_whitespace().next().unwrap_or(""))),
            }
        }
    }
    pass &= Regime::ALL.iter().all(|r| seen.contains(r.name()));
    Ok((pass, format!("{} of 6 regimes; {}", seen.len(), notes.join(" "))))
}

fn criterion_8() -> Outcome {
    let start = Instant::now();
    let p = ModelPrimitives::quadratic_benchmark(2.0);
    let eq = quad(2.0);
    let c400 = compare(&eq, &discrete_riley(&p, &uniform13(), 400, 400).map_err(err)?).map_err(err)?;
    let c800 = compare(&eq, &discrete_riley(&p, &uniform13(), 800, 800).map_err(err)?).map_err(err)?;
    let elapsed = start.elapsed().as_secs_f64();
    let sig = c400.max_m1_gap.max(c400.max_m2_gap) / c800.max_m1_gap.max(c800.max_m2_gap);
    let pool = c400.pool_gap.unwrap_or(f64::NAN) / c800.pool_gap.unwrap_or(f64::NAN);
    let pass = !c400.pool_mismatch
        && c400.signal_steps <= 5.0
        && c400.type_steps.is_some_and(|s| s <= 5.0)
        && sig >= 1.5
        && pool >= 1.5
        && elapsed <= 120.0;
    Ok((
        pass,
        format!(
            "400: {:.2} signal steps, pool {:.2} type steps; shrink x{sig:.2} (signals), x{pool:.2} (pool); {elapsed:.2}s",
            c400.signal_steps,
            c400.type_steps.unwrap_or(f64::NAN)
        ),
    ))
}

fn criterion_9() -> Outcome {
    let eq = quad(2.0);
    let opts = VerifyOptions::default();
    let samples = sample_schedule(&eq, opts.structure_types).map_err(err)?;
    let baseline = verify_all(&eq, &opts).map_err(err)?;
    if !baseline.passed() {
        return Ok((false, format!("baseline fails {:?}", baseline.failures())));
    }
    let mut notes = vec![];
    let mut pass = true;

    let mut swapped = samples.clone();
    let (x, y) = (swapped[600], swapped[601]);
    (swapped[600].m1, swapped[600].m2, swapped[601].m1, swapped[601].m2) = (y.m1, y.m2, x.m1, x.m2);
    let r = verify_all_with(&eq, &swapped, |a, b| eq.belief_at(a, b), &opts).map_err(err)?;
    pass &= r.failures() == [MONOTONE];
    notes.push(format!("swap -> {:?}", r.failures()));

    let th = eq.thresholds.t_h.unwrap();
    let moved = eq.with_pool_threshold(th + 1e-3, false).map_err(err)?;
    let moved_samples = sample_schedule(&moved, opts.structure_types).map_err(err)?;
    let r = verify_all_with(&moved, &moved_samples, |a, b| moved.belief_at(a, b), &opts).map_err(err)?;
    pass &= r.failures() == [INDIFFERENCE];
    notes.push(format!("t_h+1e-3 -> {:?}", r.failures()));
    let repriced = eq.with_pool_threshold(th + 1e-3, true).map_err(err)?;
    let r = verify_all(&repriced, &opts).map_err(err)?;
    notes.push(format!("(repriced pool, informational: {:?})", r.failures()));

    let m2c = eq.thresholds.m2_circ;
    let shift = 0.1 / (D1_TYPE_GRID - 1) as f64;
    let skewed = |m1: f64, m2: f64| {
        let b = eq.belief_at(m1, m2)?;
        Ok(match b {
            BeliefSupport::Point { t } if m2 > m2c && m1 + m2 < 2.0 - 1e-9 => BeliefSupport::Point { t: (t + shift).min(3.0) },
            other => other,
        })
    };
    let r = verify_all_with(&eq, &samples, skewed, &opts).map_err(err)?;
    pass &= r.failures() == [REASONABLE];
    notes.push(format!("m2-dependent belief -> {:?}", r.failures()));
    Ok((pass, notes.join("; ")))
}

fn main() -> ExitCode {
    let criteria: [(&str, fn() -> Outcome); 9] = [
        ("closed-form recovery", criterion_1),
        ("indifference certification", criterion_2),
        ("first-order residuals", criterion_3),
        ("global incentive compatibility", criterion_4),
        ("structure suite", criterion_5),
        ("D1 consistency", criterion_6),
        ("regime coverage", criterion_7),
        ("discrete oracle equivalence", criterion_8),
        ("negative controls", criterion_9),
    ];
    let mut failed = 0;
    for (i, (name, run)) in criteria.iter().enumerate() {
        let start = Instant::now();
        let (ok, detail) = match run() {
            Ok(x) => x,
            Err(e) => (false, format!("error: {e}")),
        };
        failed += usize::from(!ok);
        println!(
            "criterion {} {:<32} {} [{:.2}s] {}",
            i + 1,
            name,
            if ok { "PASS" } else { "FAIL" },
            start.elapsed().as_secs_f64(),
            detail
        );
    }
    println!("acceptance: {} passed, {} failed", criteria.len() - failed, failed);
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
