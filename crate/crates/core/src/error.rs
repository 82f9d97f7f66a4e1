use thiserror::Error;

/// Errors produced by the rate-model library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid block: {0}")]
    InvalidBlock(String),

    #[error("negative or non-finite rate {0}")]
    InvalidRate(f64),

    #[error("dataset is empty")]
    EmptyDataset,

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("non-finite input: {0}")]
    NonFinite(&'static str),

    #[error("feature mask selects no columns and bias is disabled")]
    EmptyDesign,

    #[error("correlation undefined: {0} has zero variance")]
    UndefinedCorrelation(&'static str),

    #[error("relative error undefined: every reference rate is zero")]
    UndefinedMre,

    #[error("need at least {needed} records, got {got}")]
    NotEnoughData { needed: usize, got: usize },

    #[error("non-finite gradient at iteration {iteration}")]
    NonFiniteGradient { iteration: usize },

    #[error("least-squares solve failed: {0}")]
    Solver(String),

    #[error("line {line}: {reason}")]
    Parse { line: usize, reason: String },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Whether this error stems from a numerical failure rather than bad input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::NonFinite(_)
                | Error::UndefinedCorrelation(_)
                | Error::UndefinedMre
                | Error::NonFiniteGradient { .. }
                | Error::Solver(_)
        )
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
