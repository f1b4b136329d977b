use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("duplicate doc_id {id:?} at line {line}")]
    DuplicateDocId { id: String, line: usize },

    #[error("cannot build an index over an empty corpus")]
    EmptyCorpus,

    #[error("empty query")]
    EmptyQuery,

    #[error("no text for doc_id {0:?}")]
    MissingDocument(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("cosine similarity is undefined for a zero vector")]
    ZeroVector,

    /// Transport or HTTP status failure talking to a remote provider.
    #[error("http request to {url} failed{}: {message}", status.map(|s| format!(" with status {s}")).unwrap_or_default())]
    Http {
        url: String,
        status: Option<u16>,
        message: String,
    },

    /// The remote service answered, but not in the agreed shape.
    #[error("protocol error from {url}: {message}")]
    Protocol { url: String, message: String },

    #[error("index file {path}: {message}")]
    IndexFormat { path: PathBuf, message: String },

    #[error("config: {0}")]
    Config(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Transport failures, 429 and 5xx responses are worth another attempt.
    pub fn is_retryable(&self) -> bool {
        match self {
            Error::Http { status: None, .. } => true,
            Error::Http {
                status: Some(code), ..
            } => *code == 429 || *code >= 500,
            _ => false,
        }
    }
}
