use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConicError {
    #[error("invalid problem: {0}")]
    Invalid(String),
    #[error("problem dump, line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("backend rejected the problem: {0}")]
    Backend(String),
}
