//! Error type shared across the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Operand dimensions (qubit counts, vector lengths) do not agree.
    #[error("dimension mismatch: expected {expected}, got {got} ({context})")]
    DimensionMismatch {
        expected: usize,
        got: usize,
        context: &'static str,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A dense/enumeration oracle was asked for a problem size it refuses.
    #[error("oracle size exceeded: {context} is limited to {limit}, got {got}")]
    OracleSize {
        limit: usize,
        got: usize,
        context: &'static str,
    },

    /// The requested run would exceed the configured evaluation budget.
    #[error("evaluation budget exceeded: run needs {required} evaluations, budget is {budget} (raise the budget to proceed)")]
    BudgetExceeded { required: u128, budget: u64 },

    #[error("insufficient data: need at least {needed} points, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),

    #[error("CSV error: {0}")]
    Csv(#[from] csv::Error),

    #[error("JSON error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("{context}: {source}")]
    WithContext {
        context: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    /// Wrap with a phase or experiment name while keeping the cause.
    pub fn context(self, context: impl Into<String>) -> Self {
        Error::WithContext {
            context: context.into(),
            source: Box::new(self),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
