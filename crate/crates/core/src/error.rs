use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("format error in field `{field}`: {message}")]
    Format { field: String, message: String },

    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncated { expected: usize, found: usize },

    #[error("invariant violation: {0}")]
    Invariant(String),

    #[error("index {index:?} out of bounds for shape {shape:?}")]
    OutOfBounds { index: [i64; 3], shape: [usize; 3] },

    #[error("geometry mismatch: {0}")]
    GeometryMismatch(String),

    #[error("parameter error: {0}")]
    Param(String),

    #[error("missing sample ids: {0:?}")]
    MissingIds(Vec<String>),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {source}", path.display())]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn format(field: &str, message: impl Into<String>) -> Self {
        Error::Format {
            field: field.to_string(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
