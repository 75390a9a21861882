use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("evaluation budget of {max} exhausted")]
    BudgetExhausted { max: usize },

    #[error("unknown benchmark function `{name}` in dimension {dimension}")]
    UnknownFunction { name: String, dimension: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("training became numerically unstable at iteration {iteration}: {reason}")]
    Unstable { iteration: usize, reason: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
