use std::path::PathBuf;

/// Errors raised by the simulator, agent and tooling.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed input; `location` names the line and/or field.
    #[error("parse error at {location}: {message}")]
    Parse { location: String, message: String },

    /// Shapes or cross-references that do not line up.
    #[error("structural error: {0}")]
    Structural(String),

    /// A value violates a documented invariant.
    #[error("validation error: {0}")]
    Validation(String),

    #[error("usage error: {0}")]
    Usage(String),

    #[error("instance too large: {0}")]
    Capacity(String),

    #[error("non-finite value in {tensor}")]
    Numerical { tensor: String },

    #[error("incompatible checkpoint: {0}")]
    Incompatible(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(location: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            location: location.into(),
            message: message.into(),
        }
    }
}
