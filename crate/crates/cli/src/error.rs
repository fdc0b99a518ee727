use std::path::PathBuf;

use thiserror::Error;

/// Failures of a command, grouped by exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad config, bad data or an invalid request.
    #[error("{0}")]
    Validation(String),

    /// The estimator or a solver could not produce a result.
    #[error("{0}")]
    Estimation(String),

    /// A signature check failed under `--strict`.
    #[error("{0}")]
    Signature(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Validation(_) | CliError::Io { .. } => 1,
            CliError::Estimation(_) => 2,
            CliError::Signature(_) => 3,
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.into(),
            source,
        }
    }
}

impl From<tlc_core::Error> for CliError {
    fn from(e: tlc_core::Error) -> Self {
        use tlc_core::Error as E;
        match e {
            E::EstimationImpossible(_) | E::NumericalInconsistency(_) | E::ZeroSurvivor(_) | E::PiecewiseRegime(_) => {
                CliError::Estimation(e.to_string())
            }
            _ => CliError::Validation(e.to_string()),
        }
    }
}

pub type Result<T> = std::result::Result<T, CliError>;
