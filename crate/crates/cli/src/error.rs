use std::path::Path;

use themefit_core::Error as CoreError;

/// Failure of a command, classified by the exit code it maps to.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad flags, config values or missing inputs.
    #[error("{0}")]
    Usage(String),
    /// Input files that do not satisfy the corpus formats or invariants.
    #[error("{0}")]
    Data(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Data(_) => 3,
            CliError::Internal(_) => 4,
        }
    }

    pub(crate) fn read(path: &Path, e: std::io::Error) -> Self {
        CliError::Usage(format!("cannot read {}: {e}", path.display()))
    }

    pub(crate) fn write(path: &Path, e: std::io::Error) -> Self {
        CliError::Internal(format!("cannot write {}: {e}", path.display()))
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Argument(_) | CoreError::Config(_) => CliError::Usage(e.to_string()),
            CoreError::Validation(_) | CoreError::Sampling(_) => CliError::Data(e.to_string()),
        }
    }
}

pub type Result<T, E = CliError> = std::result::Result<T, E>;
