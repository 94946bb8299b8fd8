use std::path::PathBuf;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: invalid UTF-8 at byte offset {byte_offset}")]
    InvalidUtf8 { path: PathBuf, byte_offset: usize },

    #[error("{path}:{line}: {reason}")]
    MalformedPairs {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("{path}: {reason}")]
    MalformedXml { path: PathBuf, reason: String },

    #[error("{path}: feature missing required attribute `{attribute}`")]
    MissingAttribute { path: PathBuf, attribute: String },

    #[error("{doc}: span [{start}, {end}) exceeds document length {doc_len}")]
    SpanOutOfBounds {
        doc: String,
        start: usize,
        end: usize,
        doc_len: usize,
    },

    #[error("no vector record for document `{doc}` chunk {chunk}")]
    MissingVector { doc: String, chunk: usize },

    #[error(
        "vector for document `{doc}` chunk {chunk} has dimension {got}, expected {expected}"
    )]
    VectorDimension {
        doc: String,
        chunk: usize,
        got: usize,
        expected: usize,
    },

    #[error("vector for document `{doc}` chunk {chunk} is not usable: {reason}")]
    BadVector {
        doc: String,
        chunk: usize,
        reason: String,
    },

    #[error("{0}")]
    MissingInput(String),

    #[error("pair ({source_doc}, {suspicious_doc}) discarded: {reason}")]
    PairUnsatisfiable {
        source_doc: String,
        suspicious_doc: String,
        reason: String,
    },

    #[error("paraphrase provider: {0}")]
    Paraphrase(String),

    #[error("{0}")]
    Config(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for errors caused by absent or unreadable inputs, which the CLI
    /// reports with a distinct exit code.
    pub fn is_missing_input(&self) -> bool {
        match self {
            Error::MissingInput(_) => true,
            Error::Io { source, .. } => source.kind() == std::io::ErrorKind::NotFound,
            _ => false,
        }
    }
}
