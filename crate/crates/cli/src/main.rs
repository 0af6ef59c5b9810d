use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sigbudget_cli::{exit, parse_config, run, Command, Outcome, RunError};

#[derive(Debug, Parser)]
#[command(name = "sigbudget", version, about = "Solve and certify budget-constrained signaling equilibria")]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// TOML run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory; overrides `output_dir`.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Concurrent jobs; defaults to the available cores.
    #[arg(long, global = true)]
    workers: Option<usize>,
    /// Seed for sampled checks; overrides `seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Cmd {
    /// Check the primitives against the model assumptions.
    Validate,
    /// Solve for the equilibrium and write its schedule.
    Solve,
    /// Run every verifier check plus the discrete oracle comparison.
    Verify,
    /// Classify the regime at each budget of the sweep list.
    Sweep,
    /// Write the schedule CSV and a JSON of thresholds and report.
    Export,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Validate => Command::Validate,
            Cmd::Solve => Command::Solve,
            Cmd::Verify => Command::Verify,
            Cmd::Sweep => Command::Sweep,
            Cmd::Export => Command::Export,
        }
    }
}

fn input_error(message: impl std::fmt::Display) -> ExitCode {
    eprintln!("error: {message}");
    ExitCode::from(exit::INPUT_ERROR)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(exit::INPUT_ERROR) } else { ExitCode::SUCCESS };
        }
    };
    let Some(path) = cli.config else {
        return input_error("--config <path> is required");
    };
    let text = match std::fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) => return input_error(format!("{}: {e}", path.display())),
    };
    let mut config = match parse_config(&text) {
        Ok(c) => c,
        Err(e) => return input_error(format!("{}: {e}", path.display())),
    };
    if let Some(seed) = cli.seed {
        config.seed = seed;
    }
    if let Some(out) = cli.out {
        config.output_dir = out;
    }
    if cli.workers == Some(0) {
        return input_error("--workers must be at least 1");
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(n) = cli.workers {
        pool = pool.num_threads(n);
    }
    let pool = match pool.build() {
        Ok(p) => p,
        Err(e) => return input_error(e),
    };
    let out = config.output_dir.clone();
    match pool.install(|| run(cli.command.into(), &config, &out)) {
        Ok(Outcome::Pass) => ExitCode::from(exit::PASS),
        Ok(Outcome::Fail) => ExitCode::from(exit::VERIFICATION_FAILURE),
        Err(e @ RunError::Solve(_)) => {
            eprintln!("error: {e}");
            ExitCode::from(exit::VERIFICATION_FAILURE)
        }
        Err(e) => input_error(e),
    }
}
