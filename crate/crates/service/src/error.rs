use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;
use thiserror::Error;
use vocalcode::scheme::SchemeError;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("unknown session {0}")]
    UnknownSession(String),
    #[error("unknown queue item {0}")]
    UnknownItem(String),
    #[error("{0}")]
    Quota(String),
    #[error("{0}")]
    Sequencing(String),
    #[error("{0}")]
    Conflict(String),
    #[error("{0}")]
    BadRequest(String),
    #[error("audio unavailable: {0}")]
    Audio(String),
    #[error("annotation log: {0}")]
    Storage(String),
}

impl ServiceError {
    pub fn status(&self) -> StatusCode {
        match self {
            Self::UnknownSession(_) | Self::UnknownItem(_) => StatusCode::NOT_FOUND,
            Self::Quota(_) => StatusCode::TOO_MANY_REQUESTS,
            Self::Sequencing(_) | Self::Conflict(_) => StatusCode::CONFLICT,
            Self::BadRequest(_) => StatusCode::BAD_REQUEST,
            Self::Audio(_) | Self::Storage(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }

    pub fn code(&self) -> &'static str {
        match self {
            Self::UnknownSession(_) => "unknown_session",
            Self::UnknownItem(_) => "unknown_item",
            Self::Quota(_) => "play_budget_exhausted",
            Self::Sequencing(_) => "out_of_sequence",
            Self::Conflict(_) => "session_conflict",
            Self::BadRequest(_) => "bad_request",
            Self::Audio(_) => "audio_unavailable",
            Self::Storage(_) => "storage",
        }
    }
}

impl From<SchemeError> for ServiceError {
    fn from(e: SchemeError) -> Self {
        match &e {
            SchemeError::UnknownItem(item) => Self::UnknownItem(item.clone()),
            _ if e.is_quota() => Self::Quota(e.to_string()),
            _ if e.is_sequencing() => Self::Sequencing(e.to_string()),
            _ => Self::BadRequest(e.to_string()),
        }
    }
}

impl From<vocalcode::log::LogError> for ServiceError {
    fn from(e: vocalcode::log::LogError) -> Self {
        Self::Storage(e.to_string())
    }
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    code: &'a str,
    message: String,
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let body = ErrorBody { code: self.code(), message: self.to_string() };
        (self.status(), Json(body)).into_response()
    }
}
