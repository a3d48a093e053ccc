//! Experiment runner: one JSON config in, one sorted JSON report out.
//!
//! Exit codes are 0 (pass), 1 (tolerance failed), 2 (bad config) and 3
//! (numerical failure inside the core).

use std::fmt;

pub mod config;
pub mod experiments;
pub mod report;
pub mod sweep;

pub use config::{Experiment, ExperimentConfig, GridSpec};
pub use experiments::{Outcome, Series};
pub use report::{run, run_with_series, ExperimentReport, ARTIFACT_VERSION};
pub use sweep::{sweep, SweepReport, SweepRow};

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    Config(String),
    Numerical(String),
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) | CliError::Io(_) => 2,
            CliError::Numerical(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Numerical(m) => write!(f, "numerical error: {m}"),
            CliError::Io(m) => write!(f, "io error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<disperse_core::Error> for CliError {
    fn from(e: disperse_core::Error) -> Self {
        if e.is_input_error() {
            CliError::Config(e.to_string())
        } else {
            CliError::Numerical(e.to_string())
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<csv::Error> for CliError {
    fn from(e: csv::Error) -> Self {
        CliError::Io(e.to_string())
    }
}
