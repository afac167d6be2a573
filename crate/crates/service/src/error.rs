use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use hea_dvae::design::DesignError;
use hea_dvae::dvae::DvaeError;
use hea_dvae::elements::ElementError;
use hea_dvae::explain::ExplainError;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ErrorCode {
    BadFormula,
    UnknownElement,
    ModelNotLoaded,
    OutOfRange,
    Internal,
}

impl ErrorCode {
    pub fn status(self) -> StatusCode {
        match self {
            Self::BadFormula | Self::UnknownElement | Self::OutOfRange => StatusCode::BAD_REQUEST,
            Self::ModelNotLoaded => StatusCode::SERVICE_UNAVAILABLE,
            Self::Internal => StatusCode::INTERNAL_SERVER_ERROR,
        }
    }
}

/// Body of every non-2xx response.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ApiError {
    pub code: ErrorCode,
    pub message: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub detail: Option<serde_json::Value>,
}

impl ApiError {
    pub fn new(code: ErrorCode, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
            detail: None,
        }
    }

    pub fn with_detail(mut self, detail: serde_json::Value) -> Self {
        self.detail = Some(detail);
        self
    }

    pub fn out_of_range(message: impl Into<String>) -> Self {
        Self::new(ErrorCode::OutOfRange, message)
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(ErrorCode::Internal, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        if self.code == ErrorCode::Internal {
            log::error!("{}", self.message);
        }
        (self.code.status(), Json(self)).into_response()
    }
}

impl From<ElementError> for ApiError {
    fn from(e: ElementError) -> Self {
        match &e {
            ElementError::UnknownElement(sym) => {
                Self::new(ErrorCode::UnknownElement, e.to_string())
                    .with_detail(serde_json::json!({ "element": sym }))
            }
            _ => Self::new(ErrorCode::BadFormula, e.to_string()),
        }
    }
}

impl From<DvaeError> for ApiError {
    fn from(e: DvaeError) -> Self {
        match e {
            DvaeError::Element(inner) => inner.into(),
            DvaeError::PhaseOutOfRange(_) | DvaeError::LatentDimension { .. } => {
                Self::out_of_range(e.to_string())
            }
            other => Self::internal(other.to_string()),
        }
    }
}

impl From<DesignError> for ApiError {
    fn from(e: DesignError) -> Self {
        match e {
            DesignError::Model(inner) => inner.into(),
            DesignError::Element(inner) => inner.into(),
            DesignError::ZeroIterations => Self::out_of_range(e.to_string()),
            other => Self::internal(other.to_string()),
        }
    }
}

impl From<ExplainError> for ApiError {
    fn from(e: ExplainError) -> Self {
        match e {
            ExplainError::Model(inner) => inner.into(),
            other => Self::internal(other.to_string()),
        }
    }
}
