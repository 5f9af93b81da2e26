use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use thiserror::Error;

use crate::session::TaskKind;

#[derive(Debug, Error)]
pub enum ApiError {
    #[error("no labeling session is loaded")]
    NoSession,
    #[error("unknown task {0}")]
    UnknownTask(String),
    #[error("label {label:?} is not valid for a {kind} task")]
    LabelMismatch { kind: TaskKind, label: String },
    #[error("no {0} tasks have been labeled yet")]
    NothingLabeled(TaskKind),
    #[error("{0}")]
    BadRequest(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Denoise(#[from] epigraph::denoise::DenoiseError),
    #[error(transparent)]
    Segment(#[from] epigraph::segment::SegmentError),
    #[error("I/O error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = ApiError> = std::result::Result<T, E>;

impl ApiError {
    pub fn status(&self) -> StatusCode {
        match self {
            ApiError::NoSession | ApiError::NothingLabeled(_) => StatusCode::CONFLICT,
            ApiError::UnknownTask(_) => StatusCode::NOT_FOUND,
            ApiError::LabelMismatch { .. } => StatusCode::UNPROCESSABLE_ENTITY,
            ApiError::BadRequest(_) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = serde_json::json!({ "error": self.to_string() });
        (self.status(), Json(body)).into_response()
    }
}
