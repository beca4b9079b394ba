use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("round {round} is outside the horizon 1..={horizon}")]
    Horizon { round: usize, horizon: usize },

    #[error("action {action:?} lies outside the action bounds at dimension {dim}")]
    ActionOutOfBounds { action: Vec<f64>, dim: usize },

    #[error("state {state:?} lies outside the state bounds at dimension {dim}")]
    StateOutOfBounds { state: Vec<f64>, dim: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    /// A ledger precondition failed. This is a projection bug, never a data condition.
    #[error("safety fault at round {round}: {reason}")]
    SafetyFault { round: usize, reason: String },

    #[error("records are not paired: {0}")]
    Pairing(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}:{line}: {reason}")]
    Parse { path: PathBuf, line: usize, reason: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("refused: {0}")]
    Refused(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}
