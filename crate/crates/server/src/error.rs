use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use radex_core::extract::ExtractError;
use radex_core::fhir::FhirError;
use serde_json::{json, Value};
use thiserror::Error;

/// Startup and storage failures.
#[derive(Debug, Error)]
pub enum ServerError {
    #[error("invalid server configuration: {0}")]
    Config(String),
    #[error("artifact store: {0}")]
    Store(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// An HTTP error rendered as `{"error": {"code", "message", "detail"?}}`.
#[derive(Debug, Clone)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    pub detail: Option<Value>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        ApiError { status, code, message: message.into(), detail: None }
    }

    pub fn with_detail(mut self, detail: Value) -> Self {
        self.detail = Some(detail);
        self
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "malformed_request", message)
    }

    pub fn not_found(code: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, code, message)
    }

    pub fn unprocessable(code: &'static str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::UNPROCESSABLE_ENTITY, code, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut error = json!({ "code": self.code, "message": self.message });
        if let Some(d) = self.detail {
            error["detail"] = d;
        }
        (self.status, Json(json!({ "error": error }))).into_response()
    }
}

impl From<ServerError> for ApiError {
    fn from(e: ServerError) -> Self {
        ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "store_error", e.to_string())
    }
}

impl From<FhirError> for ApiError {
    fn from(e: FhirError) -> Self {
        let message = e.to_string();
        match e {
            FhirError::Malformed(_) => ApiError::new(StatusCode::BAD_REQUEST, "malformed_resource", message),
            FhirError::EmptyQuestionnaire => ApiError::new(StatusCode::BAD_REQUEST, "empty_questionnaire", message),
            FhirError::UnknownLinkId(id) => {
                ApiError::unprocessable("unknown_link_id", message).with_detail(json!({ "link_id": id }))
            }
            FhirError::SchemaMismatch { .. } => ApiError::unprocessable("schema_mismatch", message),
            FhirError::InvalidTemplate(_) => ApiError::unprocessable("invalid_template", message),
        }
    }
}

/// Remote extractor failures are upstream failures: 502 naming the endpoint.
impl From<ExtractError> for ApiError {
    fn from(e: ExtractError) -> Self {
        let message = e.to_string();
        match e {
            ExtractError::Unreachable { endpoint, .. } => ApiError::new(StatusCode::BAD_GATEWAY, "extractor_unreachable", message)
                .with_detail(json!({ "endpoint": endpoint })),
            ExtractError::ProtocolError { endpoint, .. } => {
                ApiError::new(StatusCode::BAD_GATEWAY, "extractor_protocol_error", message)
                    .with_detail(json!({ "endpoint": endpoint }))
            }
            ExtractError::Upstream { endpoint, status, code, message: upstream } => {
                ApiError::new(StatusCode::BAD_GATEWAY, "extractor_upstream_error", message).with_detail(json!({
                    "endpoint": endpoint,
                    "status": status,
                    "code": code,
                    "message": upstream,
                }))
            }
            ExtractError::InvalidSpans { endpoint, issues } => {
                ApiError::new(StatusCode::BAD_GATEWAY, "invalid_spans", message)
                    .with_detail(json!({ "endpoint": endpoint, "issues": issues }))
            }
            ExtractError::InvalidDescriptor(_) | ExtractError::InvalidPhraseBank(_) => {
                ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "extractor_misconfigured", message)
            }
        }
    }
}
