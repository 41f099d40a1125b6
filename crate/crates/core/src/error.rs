use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the workbench engine.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty dataset")]
    EmptyDataset,

    #[error("duplicate document ids: {}", .0.join(", "))]
    DuplicateIds(Vec<String>),

    #[error("missing required column or key `{0}`")]
    MissingField(String),

    #[error("parse error in {path}: {message}")]
    Parse { path: String, message: String },

    #[error("invalid split: {0}")]
    InvalidSplit(String),

    #[error("empty vocabulary")]
    EmptyVocabulary,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("column mismatch: missing [{}], extra [{}]", .missing.join(", "), .extra.join(", "))]
    ColumnMismatch {
        missing: Vec<String>,
        extra: Vec<String>,
    },

    #[error("document `{0}` not found")]
    MissingDocument(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("dimension mismatch: expected {expected} features, got {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("unknown label `{0}`")]
    UnknownLabel(String),

    #[error("{0}")]
    Unsupported(String),

    #[error("nothing to explain")]
    NothingToExplain,

    #[error("pipeline `{0}` is not trained")]
    Untrained(String),

    #[error("not found: {0}")]
    NotFound(String),

    #[error("conflict: {0}")]
    Conflict(String),

    #[error("invalid configuration: {}", .0.iter().map(|e| format!("{}: {}", e.field, e.message)).collect::<Vec<_>>().join("; "))]
    Validation(Vec<crate::classifiers::FieldError>),

    #[error("pipeline `{id}` is {status}, not ready")]
    NotReady { id: String, status: String },

    #[error("format version mismatch in {path}: found {found}, expected {expected}; re-export the artifact with this version")]
    VersionMismatch {
        path: PathBuf,
        found: u32,
        expected: u32,
    },

    #[error("corrupt artifact {path}: {reason}")]
    Corrupt { path: PathBuf, reason: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable tag used in JSON error payloads.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::EmptyDataset => "empty_dataset",
            Error::DuplicateIds(_) => "duplicate_ids",
            Error::MissingField(_) => "missing_field",
            Error::Parse { .. } => "parse",
            Error::InvalidSplit(_) => "invalid_split",
            Error::EmptyVocabulary => "empty_vocabulary",
            Error::Config(_) => "config",
            Error::ColumnMismatch { .. } => "column_mismatch",
            Error::MissingDocument(_) => "missing_document",
            Error::InvalidInput(_) => "invalid_input",
            Error::DimensionMismatch { .. } => "dimension_mismatch",
            Error::UnknownLabel(_) => "unknown_label",
            Error::Unsupported(_) => "unsupported",
            Error::NothingToExplain => "nothing_to_explain",
            Error::Untrained(_) => "untrained",
            Error::NotFound(_) => "not_found",
            Error::Conflict(_) => "conflict",
            Error::Validation(_) => "validation",
            Error::NotReady { .. } => "not_ready",
            Error::VersionMismatch { .. } => "version_mismatch",
            Error::Corrupt { .. } => "corrupt",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
            Error::Csv(_) => "csv",
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
