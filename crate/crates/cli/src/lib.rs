//! Config-driven front end for the `sigbudget` solver: parse a TOML run
//! configuration, then validate, solve, verify, sweep or export.

pub mod commands;
pub mod config;

pub use commands::{run, Command, Outcome, RunError};
pub use config::{parse_config, Budget, ConfigError, RunConfig};

/// Process exit codes.
pub mod exit {
    pub const PASS: u8 = 0;
    pub const INPUT_ERROR: u8 = 1;
    pub const VERIFICATION_FAILURE: u8 = 2;
}
