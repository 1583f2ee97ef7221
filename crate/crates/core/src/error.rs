//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("empty input: {0}")]
    EmptyInput(String),
    #[error("validation: {0}")]
    Validation(String),
    #[error("window: {0}")]
    Window(String),
    #[error("shape: {0}")]
    Shape(String),
    #[error("lifecycle: {0}")]
    Lifecycle(String),
    #[error("stream: {0}")]
    Stream(String),
    #[error("liquidity: {0}")]
    Liquidity(String),
    #[error("infeasible rebalance: {0}")]
    InfeasibleRebalance(String),
    #[error("numeric: {0}")]
    Numeric(String),
    #[error("config: {0}")]
    Config(String),
    #[error("data: {0}")]
    Data(String),
    #[error("training divergence: {0}")]
    Divergence(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
