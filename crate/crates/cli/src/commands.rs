use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::Serialize;
use sigbudget::equilibrium::{solve, Equilibrium};
use sigbudget::model::{validate_assumptions, AssumptionReport};
use sigbudget::oracle::{compare, discrete_riley, epsilon_equilibrium_check, Comparison, EpsilonReport};
use sigbudget::thresholds::{PoolThreshold, Thresholds};
use sigbudget::verifier::{verify_all, verify_structure, CheckRecord, CheckStatus, VerificationReport};
use sigbudget::Error as SolveError;
use thiserror::Error;

use crate::config::RunConfig;

pub const SCHEDULE_HEADER: [&str; 6] = ["t", "m1", "m2", "wage", "utility", "region"];
pub const SWEEP_HEADER: [&str; 10] =
    ["budget", "regime", "t_ell", "t_h", "t_prime", "t_kink", "m2_circ", "m1_low", "structure", "status"];
pub const ORACLE: &str = "oracle_comparison";

#[derive(Debug, Error)]
pub enum RunError {
    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },
    #[error("{path}: {source}")]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{0}")]
    Solve(#[from] SolveError),
}

/// Outcome of a command that ran to completion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Outcome {
    Pass,
    Fail,
}

impl Outcome {
    fn all(passes: impl IntoIterator<Item = bool>) -> Self {
        if passes.into_iter().all(|p| p) {
            Outcome::Pass
        } else {
            Outcome::Fail
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Validate,
    Solve,
    Verify,
    Sweep,
    Export,
}

/// Snake-case name of a solver failure, as written to reports.
pub fn error_kind(e: &SolveError) -> &'static str {
    match e {
        SolveError::NonFiniteEvaluation { .. } => "non_finite_evaluation",
        SolveError::RootNotBracketed { .. } => "root_not_bracketed",
        SolveError::QuadratureFailure { .. } => "quadrature_failure",
        SolveError::DegenerateDenominator { .. } => "degenerate_denominator",
        SolveError::StalledIntegration { .. } => "stalled_integration",
        SolveError::StepUnderflow { .. } => "step_underflow",
        SolveError::NoPoolRoot { .. } => "no_pool_root",
        SolveError::MultipleSignChanges { .. } => "multiple_sign_changes",
        SolveError::InvariantViolation { .. } => "invariant_violation",
        SolveError::OutOfDomain { .. } => "out_of_domain",
        SolveError::InfeasibleSeparation { .. } => "infeasible_separation",
    }
}

#[derive(Debug, Serialize)]
struct JobError {
    kind: &'static str,
    message: String,
}

impl From<&SolveError> for JobError {
    fn from(e: &SolveError) -> Self {
        Self { kind: error_kind(e), message: e.to_string() }
    }
}

#[derive(Debug, Serialize)]
struct EquilibriumSummary {
    thresholds: Thresholds,
    pool: Option<PoolThreshold>,
    pooled_wage: Option<f64>,
}

impl From<&Equilibrium> for EquilibriumSummary {
    fn from(eq: &Equilibrium) -> Self {
        Self { thresholds: eq.thresholds, pool: eq.pool, pooled_wage: eq.pooled_wage }
    }
}

#[derive(Debug, Serialize)]
struct OracleSummary {
    n_types: usize,
    n_signals: usize,
    comparison: Comparison,
    epsilon: EpsilonReport,
}

#[derive(Debug, Serialize)]
struct JobRecord<T: Serialize> {
    budget: f64,
    #[serde(skip_serializing_if = "Option::is_none")]
    schedule_csv: Option<String>,
    #[serde(flatten, serialize_with = "flat_body")]
    body: Result<T, JobError>,
}

#[derive(Serialize)]
#[serde(untagged)]
enum Body<'a, T> {
    Ok(&'a T),
    Err { error: &'a JobError },
}

fn flat_body<T: Serialize, S: serde::Serializer>(body: &Result<T, JobError>, s: S) -> Result<S::Ok, S::Error> {
    match body {
        Ok(v) => Body::Ok(v).serialize(s),
        Err(error) => Body::<T>::Err { error }.serialize(s),
    }
}

fn io_err(path: &Path) -> impl FnOnce(io::Error) -> RunError + '_ {
    move |source| RunError::Io { path: path.to_path_buf(), source }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), RunError> {
    let mut text = serde_json::to_string_pretty(value).expect("reports serialize");
    text.push('\n');
    fs::write(path, text).map_err(io_err(path))
}

/// 17 significant digits.
pub fn format_float(x: f64) -> String {
    format!("{x:.16e}")
}

/// One row per type on an evenly spaced grid, sorted by `t`.
pub fn schedule_rows(eq: &Equilibrium, n: usize) -> Result<Vec<[String; 6]>, SolveError> {
    eq.type_grid(n)
        .into_iter()
        .map(|t| {
            let (m1, m2) = eq.schedule_at(t)?;
            Ok([
                format_float(t),
                format_float(m1),
                format_float(m2),
                format_float(eq.on_path_wage(t)?),
                format_float(eq.utility(t)?),
                eq.segment_at(t)?.name().to_string(),
            ])
        })
        .collect()
}

pub fn write_schedule_csv(path: &Path, eq: &Equilibrium, n: usize) -> Result<(), RunError> {
    let rows = schedule_rows(eq, n)?;
    let csv_err = |source| RunError::Csv { path: path.to_path_buf(), source };
    let mut w = csv::Writer::from_path(path).map_err(csv_err)?;
    w.write_record(SCHEDULE_HEADER).map_err(csv_err)?;
    for row in &rows {
        w.write_record(row).map_err(csv_err)?;
    }
    w.flush().map_err(io_err(path))
}

/// Directory for job `i`: the output directory itself for a single budget,
/// a numbered subdirectory for each entry of a sweep list.
fn job_dir(config: &RunConfig, out: &Path, i: usize) -> Result<PathBuf, RunError> {
    let dir = if config.is_sweep() { out.join(format!("job_{i:03}")) } else { out.to_path_buf() };
    fs::create_dir_all(&dir).map_err(io_err(&dir))?;
    Ok(dir)
}

fn oracle_check(eq: &Equilibrium, config: &RunConfig) -> Result<(OracleSummary, CheckRecord), SolveError> {
    let (n_types, n_signals) = (config.grids.oracle_types, config.grids.oracle_signals);
    let alloc = discrete_riley(&eq.prims, &eq.dist, n_types, n_signals)?;
    let comparison = compare(eq, &alloc)?;
    let epsilon = epsilon_equilibrium_check(&alloc, &eq.prims, &eq.dist)?;
    let steps = comparison.signal_steps.max(comparison.type_steps.unwrap_or(0.0));
    let worst = if comparison.pool_mismatch { f64::INFINITY } else { steps };
    let mut record = CheckRecord::graded(ORACLE, worst, vec![], config.tolerances.oracle_steps);
    if comparison.pool_mismatch {
        record = record.with_note("pool present in only one of the discrete and continuous schedules");
    }
    Ok((OracleSummary { n_types, n_signals, comparison, epsilon }, record))
}

#[derive(Debug, Serialize)]
struct Certified {
    equilibrium: EquilibriumSummary,
    report: VerificationReport,
    #[serde(skip_serializing_if = "Option::is_none")]
    oracle: Option<OracleSummary>,
}

fn certify(eq: &Equilibrium, config: &RunConfig, with_oracle: bool) -> Result<Certified, SolveError> {
    let mut report = verify_all(eq, &config.verify_options())?;
    let oracle = if with_oracle {
        let (summary, record) = oracle_check(eq, config)?;
        let mut checks = report.checks;
        checks.push(record);
        report = VerificationReport::new(checks);
        Some(summary)
    } else {
        None
    };
    Ok(Certified { equilibrium: eq.into(), report, oracle })
}

fn print_report(budget: f64, report: &VerificationReport) {
    for c in &report.checks {
        let status = match c.status {
            CheckStatus::Pass => "pass",
            CheckStatus::Fail => "FAIL",
            CheckStatus::NotApplicable => "n/a",
        };
        println!("M={budget} {:<28} {status:<4} worst={:.3e} tol={:.1e}", c.name, c.worst_residual, c.tolerance);
    }
}

/// Runs `command` for every budget in `config`, writing under `out`.
pub fn run(command: Command, config: &RunConfig, out: &Path) -> Result<Outcome, RunError> {
    fs::create_dir_all(out).map_err(io_err(out))?;
    match command {
        Command::Validate => validate(config, out),
        Command::Solve => solve_jobs(config, out),
        Command::Verify => certify_jobs(config, out, true, "report.json"),
        Command::Export => certify_jobs(config, out, false, "export.json"),
        Command::Sweep => sweep(config, out),
    }
}

fn validate(config: &RunConfig, out: &Path) -> Result<Outcome, RunError> {
    let dist = config.distribution();
    let jobs: Vec<JobRecord<AssumptionReport>> = config
        .budgets()
        .par_iter()
        .map(|&m| {
            let body = validate_assumptions(&config.primitives(m), &dist, config.grids.assumptions)
                .map_err(|e| JobError::from(&e));
            JobRecord { budget: m, schedule_csv: None, body }
        })
        .collect();
    for job in &jobs {
        match &job.body {
            Ok(r) => {
                for c in &r.checks {
                    let status = if c.passed { "pass" } else { "FAIL" };
                    println!("M={} {:?} {status}", job.budget, c.assumption);
                }
            }
            Err(e) => println!("M={} error {}: {}", job.budget, e.kind, e.message),
        }
    }
    write_json(&out.join("assumptions.json"), &jobs)?;
    Ok(Outcome::all(jobs.iter().map(|j| j.body.as_ref().is_ok_and(|r| r.all_passed()))))
}

fn solve_jobs(config: &RunConfig, out: &Path) -> Result<Outcome, RunError> {
    let dist = config.distribution();
    let jobs: Vec<JobRecord<EquilibriumSummary>> = config
        .budgets()
        .par_iter()
        .enumerate()
        .map(|(i, &m)| -> Result<_, RunError> {
            match solve(&config.primitives(m), &dist, config.step_control()) {
                Ok(eq) => {
                    let dir = job_dir(config, out, i)?;
                    let csv = dir.join("schedule.csv");
                    write_schedule_csv(&csv, &eq, config.grids.types)?;
                    Ok(JobRecord { budget: m, schedule_csv: Some(relative(out, &csv)), body: Ok((&eq).into()) })
                }
                Err(e) => Ok(JobRecord { budget: m, schedule_csv: None, body: Err(JobError::from(&e)) }),
            }
        })
        .collect::<Result<_, _>>()?;
    for job in &jobs {
        match &job.body {
            Ok(s) => {
                let t_h = s.thresholds.t_h.map_or("none".to_string(), |t| t.to_string());
                println!("M={} regime={} t_ell={} t_h={t_h}", job.budget, s.thresholds.regime, s.thresholds.t_ell);
            }
            Err(e) => println!("M={} error {}: {}", job.budget, e.kind, e.message),
        }
    }
    write_json(&out.join("equilibrium.json"), &jobs)?;
    Ok(Outcome::all(jobs.iter().map(|j| j.body.is_ok())))
}

fn certify_jobs(config: &RunConfig, out: &Path, with_oracle: bool, name: &str) -> Result<Outcome, RunError> {
    let dist = config.distribution();
    let jobs: Vec<JobRecord<Certified>> = config
        .budgets()
        .par_iter()
        .enumerate()
        .map(|(i, &m)| -> Result<_, RunError> {
            let eq = match solve(&config.primitives(m), &dist, config.step_control()) {
                Ok(eq) => eq,
                Err(e) => return Ok(JobRecord { budget: m, schedule_csv: None, body: Err(JobError::from(&e)) }),
            };
            let mut csv_name = None;
            if !with_oracle {
                let dir = job_dir(config, out, i)?;
                let csv = dir.join("schedule.csv");
                write_schedule_csv(&csv, &eq, config.grids.types)?;
                csv_name = Some(relative(out, &csv));
            }
            let body = certify(&eq, config, with_oracle).map_err(|e| JobError::from(&e));
            Ok(JobRecord { budget: m, schedule_csv: csv_name, body })
        })
        .collect::<Result<_, _>>()?;
    for job in &jobs {
        match &job.body {
            Ok(c) => print_report(job.budget, &c.report),
            Err(e) => println!("M={} error {}: {}", job.budget, e.kind, e.message),
        }
    }
    write_json(&out.join(name), &jobs)?;
    Ok(Outcome::all(jobs.iter().map(|j| j.body.as_ref().is_ok_and(|c| c.report.passed()))))
}

fn relative(base: &Path, path: &Path) -> String {
    path.strip_prefix(base).unwrap_or(path).to_string_lossy().into_owned()
}

fn opt(x: Option<f64>) -> String {
    x.map(format_float).unwrap_or_default()
}

fn sweep(config: &RunConfig, out: &Path) -> Result<Outcome, RunError> {
    let dist = config.distribution();
    let rows: Vec<([String; 10], bool)> = config
        .budgets()
        .par_iter()
        .map(|&m| {
            let result = solve(&config.primitives(m), &dist, config.step_control())
                .and_then(|eq| Ok((verify_structure(&eq, config.grids.types)?, eq)));
            match result {
                Ok((checks, eq)) => {
                    let th = &eq.thresholds;
                    let ok = checks.iter().all(|c| !c.failed());
                    let row = [
                        format_float(m),
                        th.regime.name().to_string(),
                        format_float(th.t_ell),
                        opt(th.t_h),
                        opt(th.t_prime),
                        opt(th.t_kink),
                        format_float(th.m2_circ),
                        format_float(th.m1_low),
                        if ok { "pass" } else { "fail" }.to_string(),
                        "ok".to_string(),
                    ];
                    (row, ok)
                }
                Err(e) => {
                    let mut row: [String; 10] = Default::default();
                    row[0] = format_float(m);
                    row[9] = error_kind(&e).to_string();
                    (row, false)
                }
            }
        })
        .collect();
    let path = out.join("sweep.csv");
    let csv_err = |source| RunError::Csv { path: path.clone(), source };
    let mut w = csv::Writer::from_path(&path).map_err(csv_err)?;
    w.write_record(SWEEP_HEADER).map_err(csv_err)?;
    for (row, _) in &rows {
        w.write_record(row).map_err(csv_err)?;
        println!("M={} regime={} structure={} status={}", row[0], row[1], row[8], row[9]);
    }
    w.flush().map_err(io_err(&path))?;
    Ok(Outcome::all(rows.iter().map(|(_, ok)| *ok)))
}
