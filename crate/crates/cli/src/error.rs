//! Error envelope shared by the HTTP API and the CLI.

use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use psm_core::persist::PersistError;
use psm_core::session::{gate_check, EventKind, SessionError};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ApiError {
    pub http_status: u16,
    pub code: String,
    pub message: String,
    pub details: Value,
}

impl ApiError {
    pub fn new(http_status: u16, code: impl Into<String>, message: impl Into<String>) -> Self {
        ApiError { http_status, code: code.into(), message: message.into(), details: json!({}) }
    }

    pub fn with_details(mut self, details: Value) -> Self {
        self.details = details;
        self
    }

    pub fn malformed(message: impl Into<String>) -> Self {
        ApiError::new(400, "MALFORMED_REQUEST", message)
    }

    pub fn not_found(session: &str) -> Self {
        ApiError::new(404, "SESSION_NOT_FOUND", format!("no session `{session}`"))
    }

    pub fn internal(code: &str, message: impl Into<String>) -> Self {
        ApiError::new(500, code, message)
    }
}

impl std::fmt::Display for ApiError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{} {}: {}", self.http_status, self.code, self.message)
    }
}

impl std::error::Error for ApiError {}

/// Status for each engine error. Gate denials are conflicts with the
/// session's state; malformed payloads are the client's fault; everything
/// the model refuses is unprocessable.
pub fn session_status(err: &SessionError) -> u16 {
    match err {
        SessionError::PhaseCoherence { .. } => 409,
        SessionError::Payload { .. } | SessionError::EmptyActor | SessionError::InvalidPolicy { .. } => 400,
        SessionError::Chain { .. } => 500,
        SessionError::IncompletePhase { .. }
        | SessionError::PhaseMismatch { .. }
        | SessionError::NotInImplementation(_)
        | SessionError::MinorCannotTargetGoal
        | SessionError::InvalidRevisionTarget(_)
        | SessionError::Model(_)
        | SessionError::Congruence(_)
        | SessionError::Network(_) => 422,
    }
}

impl From<SessionError> for ApiError {
    fn from(err: SessionError) -> Self {
        let details = match &err {
            SessionError::PhaseCoherence { phase, kind } => {
                let admitted: Vec<&str> =
                    EventKind::ALL.iter().filter(|k| gate_check(*phase, **k)).map(|k| k.as_str()).collect();
                json!({
                    "phase": phase,
                    "kind": kind,
                    "admitted": admitted,
                    "guidance": format!(
                        "{kind} belongs to a different phase. Finish or revise the {phase} phase first; it admits {}.",
                        admitted.join(", ")
                    ),
                })
            }
            SessionError::IncompletePhase { phase, unmet } => json!({ "phase": phase, "unmet": unmet }),
            SessionError::Payload { kind, path, .. } => json!({ "kind": kind, "path": path }),
            SessionError::Chain { seq, .. } => json!({ "seq": seq }),
            _ => json!({}),
        };
        ApiError::new(session_status(&err), err.code(), err.to_string()).with_details(details)
    }
}

impl From<PersistError> for ApiError {
    fn from(err: PersistError) -> Self {
        let details = match &err {
            PersistError::Parse { line, column, .. } => json!({ "line": line, "column": column }),
            PersistError::Schema { path, .. } => json!({ "path": path }),
            PersistError::Validation { violations } => json!({ "violations": violations }),
            PersistError::Chain { seq, .. } => json!({ "seq": seq }),
            PersistError::Replay { seq, source } => json!({ "seq": seq, "cause": source.code() }),
            PersistError::Io { .. } => json!({}),
        };
        let status = match err {
            PersistError::Parse { .. } | PersistError::Schema { .. } => 400,
            PersistError::Validation { .. } => 422,
            PersistError::Io { .. } | PersistError::Chain { .. } | PersistError::Replay { .. } => 500,
        };
        ApiError::new(status, err.code(), err.to_string()).with_details(details)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.http_status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        crate::http::canonical_response(status, &self)
    }
}
