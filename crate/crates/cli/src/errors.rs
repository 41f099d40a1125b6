//! Machine-readable error bodies shared by the CLI (`--json`) and the API.

use glassbox::{Error, FieldError};
use serde::Serialize;

#[derive(Debug, Serialize)]
pub struct ErrorDetail {
    pub kind: String,
    pub message: String,
    /// Pipeline status, for requests that need a ready pipeline.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub status: Option<String>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    pub fields: Vec<FieldError>,
}

#[derive(Debug, Serialize)]
pub struct ErrorBody {
    pub error: ErrorDetail,
}

impl ErrorBody {
    pub fn new(kind: &str, message: impl Into<String>) -> Self {
        Self {
            error: ErrorDetail {
                kind: kind.into(),
                message: message.into(),
                status: None,
                fields: Vec::new(),
            },
        }
    }
}

impl From<&Error> for ErrorBody {
    fn from(e: &Error) -> Self {
        let mut body = ErrorBody::new(e.kind(), e.to_string());
        match e {
            Error::Validation(fields) => body.error.fields = fields.clone(),
            Error::NotReady { status, .. } => body.error.status = Some(status.clone()),
            _ => {}
        }
        body
    }
}

/// HTTP status for an engine error.
pub fn http_status(e: &Error) -> u16 {
    match e {
        Error::NotFound(_) | Error::MissingDocument(_) => 404,
        Error::Conflict(_) | Error::NotReady { .. } | Error::Untrained(_) => 409,
        Error::VersionMismatch { .. } | Error::Corrupt { .. } | Error::Io { .. } => 500,
        _ => 422,
    }
}

/// Process exit code for an engine error.
pub fn exit_code(e: &Error) -> i32 {
    match http_status(e) {
        404 => 3,
        409 => 4,
        422 => 2,
        _ => 1,
    }
}
