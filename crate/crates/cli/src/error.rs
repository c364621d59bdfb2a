use std::fmt;

use dpdg_core::Error as CoreError;

/// Failure classes of the command line, each with its own exit code.
#[derive(Debug)]
pub enum CliError {
    /// A verification or dominance check did not hold.
    Verification(String),
    /// Malformed or inconsistent configuration.
    Config(String),
    /// Unreadable, missing or malformed data, or an output that could not be written.
    Data(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Verification(_) => 1,
            CliError::Config(_) => 2,
            CliError::Data(_) => 3,
        }
    }

    pub fn config(msg: impl Into<String>) -> Self {
        CliError::Config(msg.into())
    }

    pub fn data(msg: impl Into<String>) -> Self {
        CliError::Data(msg.into())
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Verification(m) => write!(f, "verification failed: {m}"),
            CliError::Config(m) => write!(f, "config error: {m}"),
            CliError::Data(m) => write!(f, "data error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Parameter(_)
            | CoreError::InfeasiblePlan { .. }
            | CoreError::InsufficientTrials(_)
            | CoreError::Diverged { .. }
            | CoreError::UndefinedMetric(_) => CliError::Config(e.to_string()),
            CoreError::Schema(_)
            | CoreError::Dimension { .. }
            | CoreError::Parse { .. }
            | CoreError::MissingValue { .. }
            | CoreError::Io(_)
            | CoreError::Csv(_)
            | CoreError::Json(_) => CliError::Data(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Data(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
