use lapopt_conic::{ConicError, SolveStatus};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },
    #[error("invalid input: {0}")]
    Validation(String),
    #[error("configuration: {0}")]
    Config(String),
    #[error("solver did not reach optimality: {0}")]
    NotOptimal(SolveStatus),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error("step {step}: no feasible gear")]
    StepInfeasible { step: usize },
    #[error(transparent)]
    Conic(#[from] ConicError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid(msg: impl Into<String>) -> Error {
    Error::Validation(msg.into())
}
