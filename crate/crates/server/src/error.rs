use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use serde::Serialize;

#[derive(Debug, Serialize)]
pub struct ErrorBody {
    pub error: &'static str,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub path: Option<String>,
}

#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
}

impl ApiError {
    pub fn new(status: StatusCode, error: &'static str, message: impl Into<String>) -> Self {
        Self {
            status,
            body: ErrorBody {
                error,
                message: message.into(),
                path: None,
            },
        }
    }

    pub fn bad_request(path: impl Into<String>, message: impl Into<String>) -> Self {
        let mut e = Self::new(StatusCode::BAD_REQUEST, "bad_request", message);
        e.body.path = Some(path.into());
        e
    }

    pub fn not_found(id: &str) -> Self {
        Self::new(StatusCode::NOT_FOUND, "not_found", format!("no model with id {id:?}"))
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message)
    }
}

impl From<pathmatrix::Error> for ApiError {
    fn from(e: pathmatrix::Error) -> Self {
        use pathmatrix::Error as E;
        let message = e.to_string();
        match e {
            E::Validation { path, .. } => Self::bad_request(format!("forest.{path}"), message),
            E::Parse { .. } | E::Schema(_) => Self::bad_request("dataset_csv", message),
            E::Ordering(_) => Self::new(StatusCode::BAD_REQUEST, "bad_ordering", message),
            E::Input(_) | E::Mismatch(_) => Self::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid_input", message),
            E::Training(_) => Self::new(StatusCode::UNPROCESSABLE_ENTITY, "training_failed", message),
            E::EmptyView => Self::new(StatusCode::UNPROCESSABLE_ENTITY, "empty_view", message),
            E::StaleChange(_) => Self::new(StatusCode::CONFLICT, "stale_change", message),
            E::Io { .. } | E::Defect(_) => Self::internal(message),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = serde_json::to_vec(&self.body).expect("error bodies serialise");
        (self.status, [("content-type", "application/json")], body).into_response()
    }
}
