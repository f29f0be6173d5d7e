use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("batch too small: contrastive loss needs at least 2 samples, got {0}")]
    BatchTooSmall(usize),

    #[error("evaluator is not deterministic: two identical calls returned {first} and {second}")]
    Determinism { first: f64, second: f64 },

    #[error("invalid state: {0}")]
    State(String),

    #[error("{path}: line {line}: {message}")]
    Load {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("non-finite loss in stage {stage}, epoch {epoch}, batch {batch}: {detail}")]
    NumericalAbort {
        stage: String,
        epoch: usize,
        batch: usize,
        detail: String,
    },

    #[error("toy experiment diverged at step {step}")]
    Diverged { step: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for failures caused by the numbers themselves rather than by
    /// bad input or configuration.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NumericalAbort { .. } | Error::Diverged { .. })
    }
}
