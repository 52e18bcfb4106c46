//! Crate-wide error type.

use std::path::PathBuf;

/// Errors produced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A parameter failed validation (bad modulus, residue, set, ...).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// An argument was outside the mathematical domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A sieve segment exceeded the configured maximum length.
    #[error("segment of length {requested} exceeds the configured maximum {max}")]
    SegmentBudget { requested: u64, max: u64 },

    /// A combinatorial or sieve-capacity budget was exceeded.
    #[error("budget exceeded: {0}")]
    Budget(String),

    /// A set was larger than the supported subset-enumeration size.
    #[error("set of size {size} exceeds the 2^{max} subset budget")]
    SetTooLarge { size: usize, max: u32 },

    /// A required series-table entry is missing.
    #[error("table cache miss for set {set:?} (q = {q})")]
    CacheMiss { q: u32, set: Vec<u64> },

    /// A stitch grid is missing windows.
    #[error("incomplete window grid; missing (alpha, beta) pairs: {gaps:?}")]
    MissingWindows { gaps: Vec<(u32, u32)> },

    /// Count-mode and ratio-mode series were mixed.
    #[error("unit mismatch: {0}")]
    UnitMismatch(String),

    /// The least-squares basis is degenerate.
    #[error("singular fit: {0}")]
    SingularFit(String),

    /// An operation received an empty input series.
    #[error("empty input: {0}")]
    EmptyInput(String),

    /// Quadrature failed to reach the requested accuracy.
    #[error("quadrature did not converge: achieved relative error estimate {achieved:e}")]
    NonConvergence { achieved: f64 },

    /// Filesystem failure, with the offending path.
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// A persisted file could not be parsed.
    #[error("parse error in {path}: {message}")]
    Parse { path: PathBuf, message: String },
}

impl Error {
    pub fn invalid_parameter(msg: impl Into<String>) -> Self {
        Error::InvalidParameter(msg.into())
    }

    pub fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub fn budget(msg: impl Into<String>) -> Self {
        Error::Budget(msg.into())
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
