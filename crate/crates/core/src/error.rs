use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error)]
pub enum LipsError {
    /// An argument fell outside the domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The requested dimension exceeds what an exhaustive routine will handle.
    #[error("capacity error: p = {p} exceeds the enumeration limit of {limit}")]
    Capacity { p: usize, limit: usize },

    /// Adding predictor `index` (0-based) makes the design numerically singular.
    #[error("predictor {index} is collinear with the current model")]
    Collinear { index: usize },

    /// A prior or run configuration cannot be evaluated.
    #[error("configuration error: {0}")]
    Config(String),

    /// Malformed input data.
    #[error("parse error at row {row}, column {column}: {message}")]
    Parse {
        row: usize,
        column: String,
        message: String,
    },

    /// A numerical routine failed to produce a finite answer.
    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, LipsError>;

pub(crate) fn domain<T>(msg: impl Into<String>) -> Result<T> {
    Err(LipsError::Domain(msg.into()))
}
