use std::process::ExitCode;

use gap_minmax::Error as CoreError;
use thiserror::Error;

/// Failures mapped onto the documented exit codes.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad flags, config or input files: exit 1.
    #[error("{0}")]
    Usage(String),
    /// The min-max could not be applied (hypothesis or bracket failure): exit 2.
    #[error("{0}")]
    Solve(String),
    /// A verified property or invariant failed: exit 3.
    #[error("{0}")]
    Property(String),
}

impl CliError {
    pub fn exit_code(&self) -> ExitCode {
        ExitCode::from(match self {
            Self::Usage(_) => 1,
            Self::Solve(_) => 2,
            Self::Property(_) => 3,
        })
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::InvalidInput(_)
            | CoreError::Parse { .. }
            | CoreError::Io(_)
            | CoreError::NotPositiveDefinite { .. }
            | CoreError::LevelOutOfRange { .. } => Self::Usage(e.to_string()),
            CoreError::HypothesisViolated { .. }
            | CoreError::NoBracket { .. }
            | CoreError::EnergyBelowGap { .. }
            | CoreError::NoRoot { .. }
            | CoreError::ZeroVector
            | CoreError::Assembly(_) => Self::Solve(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        Self::Usage(e.to_string())
    }
}
