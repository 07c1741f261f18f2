use thiserror::Error;

/// Errors reported by the distribution, fitting and CLI layers.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// The Weibull density is unbounded at the origin when the shape is below one.
    #[error("weibull density is infinite at x = 0 for shape {alpha} < 1")]
    InfiniteDensity { alpha: f64 },

    #[error("degenerate discrete Weibull with p = 1 is not a proper distribution")]
    DegenerateDw,

    #[error("empty data")]
    EmptyData,

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("observation {index} has zero probability under the model")]
    ZeroProbability { index: usize },

    #[error("non-finite log-likelihood at observation {index}")]
    NonFinite { index: usize },

    #[error("parameter not identifiable: {0}")]
    Unidentifiable(String),

    #[error("mismatched shape parameters: {0} vs {1}")]
    MismatchedShape(f64, f64),

    #[error("negative Hessian is not positive definite; consider profile-likelihood intervals")]
    NotPositiveDefinite,

    #[error("too few cells for a chi-square test: {0}")]
    TooFewCells(usize),

    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
