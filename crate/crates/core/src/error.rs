use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("LP solver failure: {0}")]
    Solver(String),

    #[error("no convergence after {iterations} rounds (last gap {gap:e})")]
    Convergence { iterations: usize, gap: f64 },

    #[error("capacity exceeded: {needed} constraints > cap {cap}; use the 1-slack solver")]
    Capacity { needed: usize, cap: usize },

    #[error("model is not submodular: {0}")]
    Submodularity(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidInput(msg.into()))
}
