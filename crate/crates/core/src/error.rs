use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected n = {expected}, got n = {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("Heisenberg index n must be at least 1")]
    ZeroDimension,

    #[error("non-finite coordinate in point")]
    NonFinite,

    #[error("kernel is singular at the identity")]
    Singularity,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("cube (k = {k}) is not contained in the window of radius {window_radius}")]
    OutsideWindow { k: i32, window_radius: f64 },

    #[error("density {theta} is below the threshold M = {threshold}")]
    BelowThreshold { theta: f64, threshold: f64 },

    #[error("measure has no atoms")]
    EmptyMeasure,

    #[error("iteration has {levels} level(s); at least {required} are needed")]
    TooFewLevels { levels: usize, required: usize },

    #[error("malformed atom file at line {line}: {message}")]
    AtomFormat { line: usize, message: String },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
