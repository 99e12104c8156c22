use thiserror::Error;

/// Errors shared across the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("shape mismatch: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        expected: Vec<usize>,
        actual: Vec<usize>,
    },

    #[error("training diverged at epoch {epoch}: {detail}")]
    DivergedTraining { epoch: usize, detail: String },

    #[error("insufficient data for class {class}: {detail}")]
    InsufficientClassData { class: usize, detail: String },

    #[error("ill-conditioned statistics: {0}")]
    IllConditionedStats(String),

    #[error("degenerate split: {0}")]
    DegenerateSplit(String),

    #[error("io: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization: {0}")]
    Serde(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
