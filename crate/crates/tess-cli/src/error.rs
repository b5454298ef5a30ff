//! Process-level error type. Every failure carries the exit code the binary
//! reports: 2 for configuration problems, 3 for data and file problems, 4
//! for numeric divergence during training.

use tess_core::CoreError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("data error: {0}")]
    Data(String),
    #[error("numeric divergence: {0}")]
    Diverged(String),
}

pub type CliResult<T> = Result<T, CliError>;

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
            CliError::Diverged(_) => 4,
        }
    }
}

/// A core failure while building or validating a network is a config problem.
pub fn cfg_err(e: CoreError) -> CliError {
    CliError::Config(e.to_string())
}

/// A core failure while reading or generating samples is a data problem.
pub fn data_err(path: &str, e: CoreError) -> CliError {
    CliError::Data(format!("{path}: {e}"))
}

pub fn io_err(path: &str, e: std::io::Error) -> CliError {
    CliError::Data(format!("{path}: {e}"))
}
