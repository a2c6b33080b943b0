use thiserror::Error;

/// Errors shared by all pipeline stages.
#[derive(Debug, Error)]
pub enum Error {
    /// A caller-supplied parameter violates an operation's contract.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// A file was readable but its content is not a valid image.
    #[error("format error: {0}")]
    Format(String),

    /// Underlying I/O failure.
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    /// A required external capability (e.g. a JPEG codec) is not available.
    #[error("capability unavailable: {0}")]
    Capability(String),

    /// A cross-check between two independent computation routes failed.
    #[error("verification failed: {0}")]
    Verification(String),
}

pub type Result<T> = std::result::Result<T, Error>;
