use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse failure class, used by drivers to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Category {
    /// Invalid parameters or configuration.
    Config,
    /// Input data that cannot be processed as given.
    Data,
    /// A solver or factorization failed.
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("spectrum needs at least 3 samples, got {0}")]
    TooShort(usize),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("no peak above threshold {threshold:.6e}")]
    PeakNotFound { threshold: f64 },

    #[error("nnls did not converge within {0} iterations")]
    IterationLimit(usize),

    #[error("scoring column {column} failed: {source}")]
    Scoring {
        column: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("every column fell below the drop tolerance")]
    EmptyData,

    #[error("vertex selection needs {needed} qualifying columns but found only {found}")]
    Selection { found: usize, needed: usize },

    #[error("mixing matrix is rank deficient (singular value ratio {ratio:.3e})")]
    RankDeficient { ratio: f64 },

    #[error("matrix is singular or ill-conditioned (condition number {condition:.3e})")]
    Singular { condition: f64 },

    #[error("data entry at row {row}, column {column} is negative")]
    NegativeData { row: usize, column: usize },

    #[error("zero vector has no direction")]
    ZeroVector,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error(
        "source {source_index} is not dominant on window {start}..={end}: \
         off-source ratio {ratio:.4} exceeds {limit:.4}"
    )]
    Dominance {
        source_index: usize,
        start: usize,
        end: usize,
        ratio: f64,
        limit: f64,
    },
}

impl Error {
    pub fn category(&self) -> Category {
        match self {
            Error::Domain(_) | Error::TooShort(_) | Error::Config(_) | Error::Dominance { .. } => {
                Category::Config
            }
            Error::DimensionMismatch(_)
            | Error::PeakNotFound { .. }
            | Error::EmptyData
            | Error::Selection { .. }
            | Error::NegativeData { .. }
            | Error::ZeroVector => Category::Data,
            Error::IterationLimit(_)
            | Error::Scoring { .. }
            | Error::RankDeficient { .. }
            | Error::Singular { .. } => Category::Numerical,
        }
    }

    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn mismatch(msg: impl Into<String>) -> Self {
        Error::DimensionMismatch(msg.into())
    }
}
