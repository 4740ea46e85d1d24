//! Experiment harness: parse a plan, run seed sweeps, write CSV traces and
//! print bound checks.

pub mod experiment;
pub mod fstar;
pub mod plan;

use thiserror::Error;

pub use experiment::run_experiment;
pub use plan::{parse_args, ExperimentPlan};

pub const EXIT_OK: i32 = 0;
pub const EXIT_CHECK_FAILED: i32 = 1;
pub const EXIT_DIVERGED: i32 = 2;
pub const EXIT_USAGE: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Clap(clap::Error),
    #[error("{0}")]
    Usage(String),
    #[error("{0}: {1}")]
    Io(String, std::io::Error),
    #[error("{0}")]
    Run(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Clap(e) if !e.use_stderr() => EXIT_OK,
            CliError::Clap(_) | CliError::Usage(_) => EXIT_USAGE,
            CliError::Io(..) | CliError::Run(_) => EXIT_CHECK_FAILED,
        }
    }
}
