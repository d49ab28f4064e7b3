use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("model domain violation: {0}")]
    ModelDomain(String),

    #[error("invalid e1 path: step {index} goes from {from} to {to}")]
    InvalidPath { index: usize, from: i64, to: i64 },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("oracle budget exceeded: about {estimate} states for {what} (limit {limit})")]
    OracleBudget {
        what: String,
        estimate: u128,
        limit: u128,
    },

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
