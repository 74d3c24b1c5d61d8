use thiserror::Error;

/// Errors produced by the tracking engine and its data model.
#[derive(Debug, Error)]
pub enum Error {
    /// A visibility triple outside the four admissible slot patterns.
    #[error("invalid visibility pattern ({0}, {1}, {2})")]
    InvalidPattern(u8, u8, u8),

    /// A per-cell visibility row that violates the irreversibility rules
    /// (e.g. a cell that goes absent and later reappears).
    #[error("inconsistent point record: {0}")]
    Record(String),

    /// An argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A frame or map too small for the configured feature grid.
    #[error("size error: {0}")]
    Size(String),

    /// Mismatched tensor or map shapes.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// A non-finite value produced during iterative refinement or training.
    #[error("numeric failure in {context} at step {index}")]
    Numeric { context: String, index: usize },

    /// Could not place the initial cells under the separation constraint.
    #[error("placement failed after {attempts} attempts")]
    Placement { attempts: usize },

    /// A malformed table, config, or on-disk artifact.
    #[error("format error: {0}")]
    Format(String),

    /// TRA is undefined for an empty reference graph.
    #[error("metric undefined: empty reference")]
    UndefinedMetric,

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
