//! Error type shared across the crate.

use thiserror::Error;

/// Errors raised by table construction, transforms, model updates, fitting,
/// and the plain-text file formats.
#[derive(Debug, Error)]
pub enum Error {
    /// An index (flat or per-digit) fell outside its declared range.
    #[error("index out of range: {0}")]
    Index(String),

    /// Inputs violate a structural precondition (mismatched specs, bad shape
    /// arguments, non-distribution input where one is required).
    #[error("domain error: {0}")]
    Domain(String),

    /// The requested object would exceed what dense enumeration supports.
    #[error("capacity exceeded: {0}")]
    Capacity(String),

    /// A numeric quantity left the region where the closed forms are valid
    /// (for example a dual coordinate at or beyond +-1).
    #[error("numeric domain error: {0}")]
    Numeric(String),

    /// A file did not parse as the expected format.
    #[error("parse error in {path} line {line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
