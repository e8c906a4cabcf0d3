use thiserror::Error;

/// Errors shared by every module in the crate.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the documented domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// The requested (f, A) pair has no finite critical-surface F for these
    /// exponents; the exact Bellman value is not defined there.
    #[error("surface error: {0}")]
    Surface(String),

    /// A bracketed root search failed to converge.
    #[error("convergence error: {0}")]
    Convergence(String),

    /// The tree is too shallow, or would be too large, for the request.
    #[error("tree capacity error: {0}")]
    Capacity(String),

    /// alpha has no finite base-m expansion of the required length.
    #[error("representation error: {0}")]
    Representation(String),

    /// A series that must converge has ratio >= 1.
    #[error("divergence error: {0}")]
    Divergence(String),

    /// An internal invariant failed, signalling corrupted input.
    #[error("invariant violation: {0}")]
    Invariant(String),

    /// Malformed text input (step-function files, range syntax).
    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
