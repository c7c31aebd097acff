use thiserror::Error;

/// Errors surfaced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A mesh, polyline or config failed structural validation.
    #[error("validation failed: {0}")]
    Validation(String),

    /// Tangent frame became too ill-conditioned to continue.
    #[error("degenerate frame: Gram condition number {condition:.3e}")]
    DegenerateFrame { condition: f64 },

    /// A statistical procedure could not produce a result (e.g. non-positive means).
    #[error("statistical failure: {0}")]
    Statistical(String),

    #[error("internal error: {0}")]
    Internal(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::InvalidArgument(msg.into()))
}

impl Error {
    /// Process exit code: 2 for rejected input, 3 for a statistical failure, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidArgument(_) | Error::Validation(_) | Error::Parse(_) => 2,
            Error::Statistical(_) => 3,
            _ => 1,
        }
    }
}
