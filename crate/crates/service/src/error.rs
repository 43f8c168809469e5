use axum::extract::rejection::{JsonRejection, QueryRejection};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use devscreen_core::casebase::CaseBaseError;
use devscreen_core::engine::EngineError;
use devscreen_core::scale::ScaleError;
use devscreen_core::similarity::SimilarityError;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

/// Body of every non-success response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    pub code: String,
    pub message: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub detail: Option<Value>,
}

#[derive(Debug)]
pub struct Failure {
    pub status: StatusCode,
    pub body: ApiError,
}

impl Failure {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Failure {
            status,
            body: ApiError {
                code: code.to_string(),
                message: message.into(),
                detail: None,
            },
        }
    }

    pub fn with_detail(mut self, detail: Value) -> Self {
        self.body.detail = Some(detail);
        self
    }

    pub fn session_not_found(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "SessionNotFound", format!("no session `{id}`"))
    }

    pub fn case_not_found(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "CaseNotFound", format!("no case `{id}`"))
    }

    pub fn storage(err: impl std::fmt::Display) -> Self {
        tracing::error!("case base write failed: {err}");
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "StorageError", err.to_string())
    }
}

impl IntoResponse for Failure {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

impl From<ScaleError> for Failure {
    fn from(e: ScaleError) -> Self {
        let message = e.to_string();
        match e {
            ScaleError::IncompleteSheet { missing } => {
                Failure::new(StatusCode::BAD_REQUEST, "IncompleteSheet", message)
                    .with_detail(json!({ "missing": missing }))
            }
            ScaleError::UnknownQuestion(id) => {
                Failure::new(StatusCode::BAD_REQUEST, "UnknownQuestion", message)
                    .with_detail(json!({ "question": id }))
            }
            ScaleError::NonPositiveAge(_) => {
                Failure::new(StatusCode::UNPROCESSABLE_ENTITY, "NonPositiveAge", message)
            }
            ScaleError::AgeOutOfRange(_) => {
                Failure::new(StatusCode::UNPROCESSABLE_ENTITY, "AgeOutOfRange", message)
            }
            ScaleError::InvalidBoneAge(_) => {
                Failure::new(StatusCode::UNPROCESSABLE_ENTITY, "InvalidBoneAge", message)
            }
            _ => Failure::new(StatusCode::BAD_REQUEST, "InvalidSheet", message),
        }
    }
}

impl From<EngineError> for Failure {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::Scale(e) => e.into(),
            EngineError::Similarity(SimilarityError::InvalidK) => {
                Failure::new(StatusCode::BAD_REQUEST, "InvalidK", "k must be at least 1")
            }
            EngineError::Similarity(e) => {
                Failure::new(StatusCode::UNPROCESSABLE_ENTITY, "InvalidFeatures", e.to_string())
            }
            EngineError::SessionClosed(id) => Failure::new(
                StatusCode::CONFLICT,
                "SessionClosed",
                format!("session `{id}` is closed"),
            ),
            EngineError::CaseBase(CaseBaseError::DuplicateId(id)) => Failure::new(
                StatusCode::CONFLICT,
                "DuplicateCaseId",
                format!("case id `{id}` already exists"),
            ),
            EngineError::CaseBase(e) => Failure::storage(e),
        }
    }
}

impl From<JsonRejection> for Failure {
    fn from(r: JsonRejection) -> Self {
        Failure::new(StatusCode::BAD_REQUEST, "MalformedBody", r.body_text())
    }
}

impl From<QueryRejection> for Failure {
    fn from(r: QueryRejection) -> Self {
        Failure::new(StatusCode::BAD_REQUEST, "InvalidQuery", r.body_text())
    }
}
