use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("csv input is empty")]
    EmptyInput,

    #[error("csv parse error at line {line}, column {column}: {message}")]
    Parse {
        line: u64,
        column: usize,
        message: String,
    },

    #[error("ragged csv: line {line} has {found} fields, expected {expected}")]
    Ragged {
        line: u64,
        found: usize,
        expected: usize,
    },

    #[error("invalid time series: {0}")]
    InvalidSeries(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("strided trajectory matrix (stride {0}) is not a Hankel matrix")]
    NotHankel(usize),

    #[error(
        "singular innovation covariance at step {step}; the observation is inconsistent with \
         the model, consider regularising R"
    )]
    SingularInnovation { step: usize },

    #[error("svd did not converge")]
    SvdFailed,

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
