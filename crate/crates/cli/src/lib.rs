//! Config-driven experiment runner for `gossipgd`.
//!
//! Subcommands write CSV (`run`, `grid`, `rates`, `explore-m`) or a
//! pass/fail report (`validate`). Exit codes are a stable contract:
//! 0 success, 1 validation failure, 2 configuration error, 3 numerical
//! failure during a run.

pub mod commands;
pub mod config;

pub use config::{Experiment, Mode, RunConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("validation failed: {0}")]
    Validation(String),
    #[error("configuration error: {0}")]
    Config(String),
    #[error("numerical failure: {0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Validation(_) => 1,
            CliError::Config(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Config(format!("cannot write CSV: {e}"))
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Config(format!("i/o: {e}"))
    }
}
