use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use fairdraw_core::{CeremonyError, SpecError};
use thiserror::Error;

use crate::api::ErrorBody;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("{0}")]
    BadRequest(String),
    #[error("invalid draw spec: {0}")]
    InvalidSpec(#[from] SpecError),
    #[error("missing or invalid token")]
    Unauthorized,
    #[error("token does not authorize this operation")]
    Forbidden,
    #[error("no session {0:?}")]
    NotFound(String),
    #[error("session {0:?} already exists")]
    SessionExists(String),
    #[error("session {session:?} is quarantined: {reason}")]
    Quarantined { session: String, reason: String },
    #[error("predecessor {0:?} has not been aborted")]
    PredecessorNotAborted(String),
    #[error(transparent)]
    Ceremony(CeremonyError),
    #[error("storage failure: {0}")]
    Io(#[from] std::io::Error),
    #[error("entropy failure: {0}")]
    Entropy(String),
}

impl From<CeremonyError> for ServiceError {
    fn from(e: CeremonyError) -> Self {
        match e {
            CeremonyError::Config(spec) => ServiceError::InvalidSpec(spec),
            other => ServiceError::Ceremony(other),
        }
    }
}

impl ServiceError {
    pub fn code(&self) -> &'static str {
        match self {
            ServiceError::BadRequest(_) => "BadRequest",
            ServiceError::InvalidSpec(_) => "InvalidSpec",
            ServiceError::Unauthorized => "Unauthorized",
            ServiceError::Forbidden => "Forbidden",
            ServiceError::NotFound(_) => "NotFound",
            ServiceError::SessionExists(_) => "SessionExists",
            ServiceError::Quarantined { .. } => "Quarantined",
            ServiceError::PredecessorNotAborted(_) => "PredecessorNotAborted",
            ServiceError::Ceremony(e) => e.code(),
            ServiceError::Io(_) => "StorageFailure",
            ServiceError::Entropy(_) => "EntropyFailure",
        }
    }

    pub fn status(&self) -> StatusCode {
        match self {
            ServiceError::BadRequest(_) | ServiceError::InvalidSpec(_) => StatusCode::BAD_REQUEST,
            ServiceError::Unauthorized => StatusCode::UNAUTHORIZED,
            ServiceError::Forbidden => StatusCode::FORBIDDEN,
            ServiceError::NotFound(_) => StatusCode::NOT_FOUND,
            ServiceError::SessionExists(_)
            | ServiceError::Quarantined { .. }
            | ServiceError::PredecessorNotAborted(_) => StatusCode::CONFLICT,
            ServiceError::Ceremony(e) => match e {
                CeremonyError::InvalidOpening(_) | CeremonyError::OutOfRange { .. } => {
                    StatusCode::UNPROCESSABLE_ENTITY
                }
                CeremonyError::UnknownStakeholder(_) => StatusCode::FORBIDDEN,
                _ => StatusCode::CONFLICT,
            },
            ServiceError::Io(_) | ServiceError::Entropy(_) => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let body = ErrorBody {
            error: self.code().to_string(),
            message: self.to_string(),
        };
        (self.status(), Json(body)).into_response()
    }
}
