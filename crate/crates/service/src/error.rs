use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde::{Deserialize, Serialize};

use flowbench::compiler::CompileError;
use flowbench::gateway::{GatewayError, InvalidGraph};
use flowbench::runtime::RuntimeError;
use flowbench::sim::FixtureError;
use flowbench::trace::TraceError;
use flowbench::workflow::DocError;

/// Error body returned by every endpoint. `code` is the engine's machine
/// code verbatim.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, thiserror::Error)]
#[error("{status} {code}: {message}")]
pub struct ApiError {
    pub status: u16,
    pub code: String,
    pub message: String,
}

/// HTTP status for a machine code.
pub fn status_for(code: &str) -> StatusCode {
    match code {
        "NOT_FOUND" | "WORKFLOW_NOT_FOUND" | "SESSION_NOT_FOUND" | "FIXTURE_NOT_FOUND" | "OUT_OF_RANGE" => {
            StatusCode::NOT_FOUND
        }
        "REVISION_CONFLICT" | "WORKFLOW_EXISTS" | "ILLEGAL_TRANSITION" | "NOT_RUNNING" | "NOT_PAUSED"
        | "NOT_AWAITING" | "TRACE_SEALED" => StatusCode::CONFLICT,
        "GATEWAY_UNAVAILABLE" | "SCRIPT_EXHAUSTED" => StatusCode::BAD_GATEWAY,
        "BAD_REQUEST" => StatusCode::BAD_REQUEST,
        "INTERNAL" => StatusCode::INTERNAL_SERVER_ERROR,
        _ => StatusCode::UNPROCESSABLE_ENTITY,
    }
}

impl ApiError {
    pub fn new(code: &str, message: impl Into<String>) -> Self {
        ApiError {
            status: status_for(code).as_u16(),
            code: code.to_string(),
            message: message.into(),
        }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        ApiError::new("BAD_REQUEST", message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        ApiError::new("INTERNAL", message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        (status, Json(self)).into_response()
    }
}

impl From<RuntimeError> for ApiError {
    fn from(e: RuntimeError) -> Self {
        ApiError::new(e.code(), e.to_string())
    }
}

impl From<GatewayError> for ApiError {
    fn from(e: GatewayError) -> Self {
        ApiError::new(e.code.as_str(), e.message)
    }
}

impl From<InvalidGraph> for ApiError {
    fn from(e: InvalidGraph) -> Self {
        ApiError::new("INVALID_GRAPH", e.0.render())
    }
}

impl From<CompileError> for ApiError {
    fn from(e: CompileError) -> Self {
        match e {
            CompileError::InvalidGraph(g) => g.into(),
            CompileError::Gateway(g) => g.into(),
            other => ApiError::new(other.code(), other.to_string()),
        }
    }
}

impl From<DocError> for ApiError {
    fn from(e: DocError) -> Self {
        ApiError::new(e.code.as_str(), e.to_string())
    }
}

impl From<FixtureError> for ApiError {
    fn from(e: FixtureError) -> Self {
        ApiError::new(e.code.as_str(), e.to_string())
    }
}

impl From<TraceError> for ApiError {
    fn from(e: TraceError) -> Self {
        ApiError::new(e.code.as_str(), e.to_string())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use flowbench::gateway::GatewayErrorCode;
    use flowbench::trace::TraceErrorCode;

    #[test]
    fn statuses() {
        assert_eq!(ApiError::new("REVISION_CONFLICT", "").status, 409);
        assert_eq!(ApiError::new("WORKFLOW_NOT_FOUND", "").status, 404);
        assert_eq!(ApiError::new("MALFORMED_REGENERATION", "").status, 422);
        assert_eq!(ApiError::from(GatewayError::new(GatewayErrorCode::GatewayUnavailable, "x")).status, 502);
        assert_eq!(
            ApiError::from(TraceError {
                code: TraceErrorCode::OutOfRange,
                message: String::new()
            })
            .status,
            404
        );
    }

    #[test]
    fn runtime_codes_pass_through() {
        let e: ApiError = RuntimeError::NotPaused(flowbench::runtime::SessionState::Running).into();
        assert_eq!(e.code, "NOT_PAUSED");
        assert_eq!(e.status, 409);
    }
}
