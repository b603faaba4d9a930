use std::path::PathBuf;

use thiserror::Error;

/// Failures while decoding an `EMBD` file.
#[derive(Debug, Error)]
pub enum FormatError {
    #[error("bad magic bytes {found:?}, expected \"EMBD\"")]
    BadMagic { found: [u8; 4] },
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),
    #[error("unknown dtype tag {0}")]
    UnknownDType(u8),
    #[error("truncated payload: expected {expected} bytes, found {found}")]
    Truncated { expected: u64, found: u64 },
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("{0} trailing bytes after label block")]
    TrailingBytes(u64),
}

impl FormatError {
    pub fn name(&self) -> &'static str {
        match self {
            FormatError::BadMagic { .. } => "BadMagic",
            FormatError::UnsupportedVersion(_) => "UnsupportedVersion",
            FormatError::UnknownDType(_) => "UnknownDType",
            FormatError::Truncated { .. } => "Truncated",
            FormatError::NonFinite { .. } => "NonFinite",
            FormatError::TrailingBytes(_) => "TrailingBytes",
        }
    }
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("file not found: {0}")]
    NotFound(PathBuf),
    #[error("{path}: {source}")]
    Format {
        path: PathBuf,
        #[source]
        source: FormatError,
    },
    #[error("JSON error in {path}: {message}")]
    Json { path: PathBuf, message: String },
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("shape mismatch: expected {expected:?}, found {found:?}")]
    ShapeMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("modality count mismatch: expected {expected}, found {found}")]
    ModalityCountMismatch { expected: usize, found: usize },
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
    #[error("degenerate interaction vector in {term} term (zero norm)")]
    DegenerateInteraction { term: &'static str },
    #[error("invalid configuration `{key}`: {message}")]
    Config { key: String, message: String },
    #[error("class {class} has {available} samples, {required} required")]
    InsufficientData {
        class: usize,
        available: usize,
        required: usize,
    },
    #[error("divergence at iteration {iteration} in {term}")]
    Divergence { iteration: usize, term: String },
    #[error("query {query} has no relevant gallery item")]
    InvalidRelevance { query: usize },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        let path = path.into();
        if source.kind() == std::io::ErrorKind::NotFound {
            Error::NotFound(path)
        } else {
            Error::Io { path, source }
        }
    }

    pub fn config(key: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            key: key.into(),
            message: message.into(),
        }
    }

    /// Stable short name used in machine-readable error output.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Io { .. } => "Io",
            Error::NotFound(_) => "NotFound",
            Error::Format { source, .. } => source.name(),
            Error::Json { .. } => "Json",
            Error::DimensionMismatch { .. } => "DimensionMismatch",
            Error::ShapeMismatch { .. } => "ShapeMismatch",
            Error::ModalityCountMismatch { .. } => "ModalityCountMismatch",
            Error::InvalidDataset(_) => "InvalidDataset",
            Error::DegenerateInteraction { .. } => "DegenerateInteraction",
            Error::Config { .. } => "ConfigError",
            Error::InsufficientData { .. } => "InsufficientData",
            Error::Divergence { .. } => "DivergenceError",
            Error::InvalidRelevance { .. } => "InvalidRelevance",
        }
    }

    /// Process exit code: 1 I/O or format, 2 configuration, 3 numerical divergence.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { .. }
            | Error::NotFound(_)
            | Error::Format { .. }
            | Error::Json { .. }
            | Error::InvalidDataset(_) => 1,
            Error::Divergence { .. } => 3,
            _ => 2,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
