use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::Json;
use linkrisk_core::disclosure::DisclosureError;
use linkrisk_core::grouping::GroupingError;
use linkrisk_core::vulnerability::VulnerabilityError;
use serde::{Deserialize, Serialize};

/// JSON error body; `code` names the underlying error variant.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ApiError {
    pub status: StatusCode,
    pub body: ErrorBody,
}

/// Variant name from a derived `Debug` rendering.
fn variant_code<E: std::fmt::Debug>(e: &E) -> String {
    let dbg = format!("{e:?}");
    dbg.split(|c: char| !c.is_alphanumeric() && c != '_')
        .next()
        .unwrap_or_default()
        .to_string()
}

impl ApiError {
    pub fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self {
            status,
            body: ErrorBody {
                code: code.into(),
                message: message.into(),
            },
        }
    }

    fn from_module<E: std::fmt::Debug + std::fmt::Display>(status: StatusCode, e: &E) -> Self {
        Self::new(status, &variant_code(e), e.to_string())
    }

    pub fn bad_request(code: &str, message: impl Into<String>) -> Self {
        Self::new(StatusCode::BAD_REQUEST, code, message)
    }

    pub fn not_found(message: impl Into<String>) -> Self {
        Self::new(StatusCode::NOT_FOUND, "NotFound", message)
    }

    pub fn stale(current: u64, computed: u64) -> Self {
        Self::new(
            StatusCode::CONFLICT,
            "StaleDictionary",
            format!("computed at dictionary version {computed}, current version is {current}"),
        )
    }

    pub fn internal(message: impl Into<String>) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "Internal", message)
    }
}

impl From<DisclosureError> for ApiError {
    fn from(e: DisclosureError) -> Self {
        let status = match e {
            DisclosureError::EmptyKey
            | DisclosureError::InvalidKey { .. }
            | DisclosureError::MatchOutOfRange { .. } => StatusCode::BAD_REQUEST,
            _ => StatusCode::UNPROCESSABLE_ENTITY,
        };
        Self::from_module(status, &e)
    }
}

impl From<VulnerabilityError> for ApiError {
    fn from(e: VulnerabilityError) -> Self {
        Self::from_module(StatusCode::UNPROCESSABLE_ENTITY, &e)
    }
}

impl From<GroupingError> for ApiError {
    fn from(e: GroupingError) -> Self {
        Self::from_module(StatusCode::UNPROCESSABLE_ENTITY, &e)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn codes_mirror_variants() {
        let e: ApiError = DisclosureError::InvalidKey {
            attribute: "sex".into(),
            dataset: "b".into(),
        }
        .into();
        assert_eq!(e.status, StatusCode::BAD_REQUEST);
        assert_eq!(e.body.code, "InvalidKey");
        let e: ApiError = DisclosureError::TooFewMatches(1).into();
        assert_eq!(
            (e.status, e.body.code.as_str()),
            (StatusCode::UNPROCESSABLE_ENTITY, "TooFewMatches")
        );
        let e: ApiError = GroupingError::TooFewDatasets(2).into();
        assert_eq!(e.body.code, "TooFewDatasets");
    }
}
