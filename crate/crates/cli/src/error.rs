use thiserror::Error;

use mimic_core::eval::EvalError;
use mimic_core::matcher::MatchError;
use mimic_core::netlist::{CamoError, ParseError};
use mimic_core::partition::PartitionError;
use mimic_core::tnet::TnetError;

/// Process exit statuses.
pub mod exit {
    pub const OK: i32 = 0;
    pub const BELOW_THRESHOLD: i32 = 1;
    pub const INPUT: i32 = 2;
    pub const INTERNAL: i32 = 3;
}

#[derive(Debug, Error)]
pub enum CliError {
    /// Unreadable, unparsable or inconsistent user input.
    #[error("input error: {0}")]
    Input(String),
    #[error("internal error: {0}")]
    Internal(String),
    #[error("functional accuracy {accuracy:.3}% is below the threshold of {threshold:.3}%")]
    BelowThreshold { accuracy: f64, threshold: f64 },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => exit::INPUT,
            CliError::Internal(_) => exit::INTERNAL,
            CliError::BelowThreshold { .. } => exit::BELOW_THRESHOLD,
        }
    }

    pub fn input(e: impl std::fmt::Display) -> Self {
        CliError::Input(e.to_string())
    }

    pub fn internal(e: impl std::fmt::Display) -> Self {
        CliError::Internal(e.to_string())
    }
}

impl From<ParseError> for CliError {
    fn from(e: ParseError) -> Self {
        CliError::input(e)
    }
}

impl From<CamoError> for CliError {
    fn from(e: CamoError) -> Self {
        CliError::internal(e)
    }
}

impl From<PartitionError> for CliError {
    fn from(e: PartitionError) -> Self {
        match e {
            PartitionError::BadConfig(_) | PartitionError::TooFewNodes { .. } => CliError::input(e),
            other => CliError::internal(other),
        }
    }
}

impl From<MatchError> for CliError {
    fn from(e: MatchError) -> Self {
        match e {
            MatchError::BadConfig(_) => CliError::input(e),
            other => CliError::internal(other),
        }
    }
}

impl From<TnetError> for CliError {
    fn from(e: TnetError) -> Self {
        match e {
            TnetError::Config(_) => CliError::input(e),
            other => CliError::internal(other),
        }
    }
}

impl From<EvalError> for CliError {
    fn from(e: EvalError) -> Self {
        match e {
            EvalError::InvalidF1(_) | EvalError::Json(_) | EvalError::TooManyKeys { .. } => CliError::input(e),
            other => CliError::internal(other),
        }
    }
}
