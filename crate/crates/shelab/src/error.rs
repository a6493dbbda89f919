use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    /// A parameter fell outside its mathematical domain.
    #[error("domain error: {0}")]
    Domain(String),

    /// Circulant embedding produced an eigenvalue too negative to clamp.
    #[error("circulant embedding failed: eigenvalue {value:.3e} below tolerance (enlarge torus)")]
    Embedding { value: f64 },

    /// A simulation produced a non-finite field value.
    #[error("simulation diverged at step {step}: {detail}")]
    Diverged { step: usize, detail: String },

    /// Not enough data to compute the requested statistic.
    #[error("insufficient data: {0}")]
    InsufficientData(String),

    /// A tabulated quantity was queried beyond its extent.
    #[error("table extent exceeded: {0}")]
    Extent(String),

    /// Malformed input to a report/fit routine.
    #[error("validation error: {0}")]
    Validation(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}
