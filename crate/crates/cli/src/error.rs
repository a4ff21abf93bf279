use lapopt_core::Error as CoreError;
use thiserror::Error;

/// Command failures, each mapped to an exit code.
#[derive(Debug, Error)]
pub enum CliError {
    /// Bad configuration, track or arguments (exit 1).
    #[error("{0}")]
    Input(String),
    /// The optimization itself failed (exit 2).
    #[error("{0}")]
    Solver(String),
    /// Outputs were written but the result is not trustworthy: the iterative
    /// algorithm did not converge, or a validation bound was not met (exit 3).
    #[error("{0}")]
    Unconverged(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 1,
            CliError::Solver(_) => 2,
            CliError::Unconverged(_) => 3,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        match e {
            CoreError::Parse { .. }
            | CoreError::Validation(_)
            | CoreError::Config(_)
            | CoreError::Io(_) => CliError::Input(e.to_string()),
            CoreError::NotOptimal(_)
            | CoreError::Infeasible(_)
            | CoreError::StepInfeasible { .. }
            | CoreError::Conic(_) => CliError::Solver(e.to_string()),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

pub type CliResult<T> = Result<T, CliError>;
