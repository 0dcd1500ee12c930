use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid panel: {0}")]
    InvalidPanel(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("{context}: matrix is not positive definite (condition estimate {condition_estimate:.3e})")]
    NotPositiveDefinite { context: String, condition_estimate: f64 },

    #[error("missing reference outcome for unit {unit}, time {time}")]
    MissingReference { unit: usize, time: usize },

    #[error("index out of range: {0}")]
    OutOfRange(String),

    #[error("no eligible cells: {0}")]
    NoEligibleCells(String),

    #[error("insufficient control units: need at least {needed}, have {available}")]
    InsufficientControls { needed: usize, available: usize },

    #[error("every grid point failed; first failure: {0}")]
    AllGridPointsFailed(String),

    #[error("bootstrap failed: {failed} of {total} replicates failed")]
    BootstrapFailed { failed: usize, total: usize },

    #[error("matrix completion failed: {0}")]
    Completion(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
