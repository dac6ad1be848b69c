use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    Dimension { expected: usize, actual: usize },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid dataset: {0}")]
    Dataset(String),

    #[error("stepping a terminal state")]
    TerminalStep,

    #[error("non-finite dual objective at iteration {iteration}")]
    NonFiniteObjective { iteration: usize },

    #[error("non-finite gradient at SGLD step {step}")]
    NonFiniteGradient { step: usize },

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("degenerate statistic: {0}")]
    Degenerate(String),

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }
}
