//! Error taxonomy of the CLI, mapped onto process exit codes:
//! 2 for configuration problems, 3 for numerical/definiteness failures,
//! 4 for I/O.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error("numerical error: {0}")]
    Numeric(String),
    #[error("io error: {0}")]
    Io(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Numeric(_) => 3,
            CliError::Io(_) => 4,
        }
    }

    pub fn config(msg: impl std::fmt::Display) -> Self {
        CliError::Config(msg.to_string())
    }

    pub fn numeric(msg: impl std::fmt::Display) -> Self {
        CliError::Numeric(msg.to_string())
    }

    pub fn io(msg: impl std::fmt::Display) -> Self {
        CliError::Io(msg.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Io(e.to_string())
    }
}

impl From<mfcov_core::SpdError> for CliError {
    fn from(e: mfcov_core::SpdError) -> Self {
        CliError::Numeric(e.to_string())
    }
}

impl From<mfcov_core::EstimatorError> for CliError {
    fn from(e: mfcov_core::EstimatorError) -> Self {
        CliError::Numeric(e.to_string())
    }
}

impl From<mfcov_core::MomentsError> for CliError {
    fn from(e: mfcov_core::MomentsError) -> Self {
        CliError::Numeric(e.to_string())
    }
}

impl From<mfcov_core::AllocationError> for CliError {
    fn from(e: mfcov_core::AllocationError) -> Self {
        CliError::Numeric(e.to_string())
    }
}

impl From<mfcov_core::models::ModelError> for CliError {
    fn from(e: mfcov_core::models::ModelError) -> Self {
        CliError::Numeric(e.to_string())
    }
}

impl From<mfcov_core::metric::MetricError> for CliError {
    fn from(e: mfcov_core::metric::MetricError) -> Self {
        CliError::Numeric(e.to_string())
    }
}
