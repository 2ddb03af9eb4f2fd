use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A scale-sensitive diagnostic was asked to operate outside the window
    /// `4*mesh <= l <= diam/4` where the discretization is trustworthy.
    #[error("scale window violation: {0}")]
    ScaleWindow(String),

    #[error("kernel singularity: {0}")]
    Singularity(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate input: {0}")]
    DegenerateInput(String),

    #[error("resource limit: {0}")]
    ResourceLimit(String),

    /// A structural certificate failed after construction. This indicates a
    /// bug, never a bad input; it exists as a test hook.
    #[error("construction invariant violated: {0}")]
    InvariantViolation(String),

    #[error("undefined ratio: {0}")]
    UndefinedRatio(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
