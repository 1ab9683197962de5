use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    Param(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("cover too large: estimated {estimated:.3e} points exceeds cap {cap}; raise the cap or coarsen the cover")]
    CoverTooLarge { estimated: f64, cap: usize },

    #[error("architecture too large for cover enumeration: {0}")]
    ArchitectureTooLarge(String),

    #[error("cover unavailable: {0}")]
    CoverUnavailable(String),

    #[error("kernel not implemented: {0}")]
    KernelNotImplemented(String),

    #[error("monotonicity violated: {0}")]
    Monotonicity(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Param(msg.into())
    }

    /// Process exit code used by the command-line front end.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::CoverTooLarge { .. } | Error::ArchitectureTooLarge(_) => 3,
            Error::Io(_) => 1,
            _ => 2,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
