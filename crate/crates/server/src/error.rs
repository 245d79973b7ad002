use arabiq_core::gateway::GatewayError;
use arabiq_core::pipeline::{PipelineError, QuizSet};
use arabiq_core::StoreError;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use serde_json::{json, Value};

/// JSON error body: `{"error": code, "message": text, ...extra}`.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: &'static str,
    pub message: String,
    pub extra: Option<Value>,
}

impl ApiError {
    pub fn new(status: StatusCode, code: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            code,
            message: message.into(),
            extra: None,
        }
    }

    pub fn bad_request(message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, "bad_request", message)
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", message)
    }

    pub fn unauthorized() -> Self {
        Self::new(
            StatusCode::UNAUTHORIZED,
            "unauthorized",
            "missing or wrong X-Admin-Token",
        )
    }

    pub fn too_large(limit: usize) -> Self {
        Self::new(
            StatusCode::PAYLOAD_TOO_LARGE,
            "payload_too_large",
            format!("images are limited to {limit} bytes"),
        )
    }

    pub fn with_extra(mut self, extra: Value) -> Self {
        self.extra = Some(extra);
        self
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.status.is_server_error() {
            tracing::error!(code = self.code, "{}", self.message);
        }
        let mut body = json!({"error": self.code, "message": self.message});
        if let (Some(Value::Object(extra)), Value::Object(map)) = (self.extra, &mut body) {
            map.extend(extra);
        }
        (self.status, Json(body)).into_response()
    }
}

impl From<StoreError> for ApiError {
    fn from(e: StoreError) -> Self {
        match e {
            StoreError::NotFound { .. } => Self::not_found(e.to_string()),
            StoreError::DuplicateSha(_) | StoreError::DuplicateId { .. } => {
                Self::new(StatusCode::CONFLICT, "duplicate", e.to_string())
            }
            StoreError::Invalid { .. } => Self::bad_request(e.to_string()),
            _ => Self::new(
                StatusCode::INTERNAL_SERVER_ERROR,
                "store_error",
                e.to_string(),
            ),
        }
    }
}

impl From<PipelineError> for ApiError {
    fn from(e: PipelineError) -> Self {
        match e {
            PipelineError::Gateway(GatewayError::InvalidRequest(m)) => Self::bad_request(m),
            PipelineError::Gateway(g) => {
                Self::new(StatusCode::BAD_GATEWAY, "provider_failure", g.to_string())
            }
            PipelineError::Store(s) => s.into(),
            PipelineError::AllQuizzesRejected(set) => {
                let msg = format!(
                    "no generated question passed the checks for image {}",
                    set.image_id
                );
                Self::new(StatusCode::CONFLICT, "all_quizzes_rejected", msg)
                    .with_extra(rejection_summary(&set))
            }
            PipelineError::UnknownImage(_)
            | PipelineError::UnknownQuiz(_)
            | PipelineError::UnknownSession(_) => Self::not_found(e.to_string()),
            PipelineError::InvalidLabel(_) => Self::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "invalid_label",
                e.to_string(),
            ),
            PipelineError::QuizNotDelivered(_) => {
                Self::new(StatusCode::CONFLICT, "quiz_not_delivered", e.to_string())
            }
        }
    }
}

/// Finding codes per rejected question. Option texts and answers stay out.
fn rejection_summary(set: &QuizSet) -> Value {
    let rejected: Vec<Value> = set
        .rejected
        .iter()
        .map(|r| {
            let mut codes: Vec<&str> = r.violations.iter().map(|v| v.code.as_str()).collect();
            if let Some(report) = &r.report {
                codes.extend(report.errors().map(|f| f.code.as_str()));
            }
            json!({"quiz_id": r.quiz_id, "codes": codes})
        })
        .collect();
    let diagnostics: Vec<&str> = set.diagnostics.iter().map(|d| d.code.as_str()).collect();
    json!({"quiz_set_id": set.id, "rejected": rejected, "diagnostics": diagnostics})
}
