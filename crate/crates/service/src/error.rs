use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::Serialize;

use axmc_core::Error;

/// Error body shared by every endpoint: `{code, message, field?}`.
#[derive(Debug, Serialize)]
pub struct ErrorBody {
    pub code: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub field: Option<String>,
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            body: ErrorBody {
                code,
                message: message.into(),
                field: None,
            },
        }
    }

    pub fn field(mut self, field: impl Into<String>) -> Self {
        self.body.field = Some(field.into());
        self
    }

    pub fn not_found(id: &str) -> Self {
        ApiError::new(
            StatusCode::NOT_FOUND,
            "not_found",
            format!("no session `{id}`"),
        )
    }

    pub fn conflict(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::CONFLICT, "invalid_status", message)
    }

    pub fn invalid(code: &'static str, message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, code, message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }

    /// Body decoding failure: malformed JSON is a 400, well-formed JSON of
    /// the wrong shape a 422 naming the offending field when serde does.
    pub fn from_json(e: &serde_json::Error) -> Self {
        if e.is_syntax() || e.is_eof() {
            return ApiError::new(StatusCode::BAD_REQUEST, "invalid_json", e.to_string());
        }
        let msg = e.to_string();
        let err = ApiError::invalid("invalid_body", msg.clone());
        match msg.split('`').nth(1) {
            Some(f) if msg.contains(" field `") => err.field(f),
            _ => err,
        }
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let msg = e.to_string();
        match e {
            Error::Io(_) | Error::Csv(_) | Error::Parse { .. } => {
                ApiError::new(StatusCode::BAD_REQUEST, "unreadable_dataset", msg).field("data")
            }
            Error::Schema(_)
            | Error::Cardinality { .. }
            | Error::DegenerateTarget(_)
            | Error::Input(_)
            | Error::GroupCoverage(_) => ApiError::invalid("invalid_data", msg).field("schema"),
            Error::InfeasibleBox(_) => ApiError::invalid("infeasible_box", msg).field("weight_box"),
            Error::Configuration(_) | Error::Argument(_) => {
                ApiError::invalid("invalid_config", msg)
            }
            Error::Status(_) => ApiError::conflict(msg),
            _ => ApiError::internal(msg),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

pub type ApiResult<T> = Result<T, ApiError>;
