use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("duplicate doc_id `{0}`")]
    DuplicateDocId(String),

    #[error("duplicate query_id `{0}`")]
    DuplicateQueryId(String),

    #[error("unknown doc_id `{0}`")]
    UnknownDocId(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("generator error: {0}")]
    Generator(#[from] crate::utility::GenerateError),

    #[error("query `{query_id}`: {source}")]
    Query {
        query_id: String,
        #[source]
        source: Box<Error>,
    },

    #[error("{path}: line {line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("unsupported file format in {path}: {message}")]
    Format { path: String, message: String },

    #[error("query sets are misaligned; symmetric difference: {0:?}")]
    Misaligned(Vec<String>),

    #[error("config: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_query(self, query_id: &str) -> Self {
        Error::Query {
            query_id: query_id.to_string(),
            source: Box::new(self),
        }
    }
}
