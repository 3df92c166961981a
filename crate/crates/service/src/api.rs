//! HTTP routes. Grouping runs as a background job; every other endpoint
//! answers synchronously.

use std::collections::BTreeSet;
use std::sync::Arc;

use axum::extract::rejection::{JsonRejection, PathRejection, QueryRejection};
use axum::extract::{FromRequest, FromRequestParts, State};
use axum::http::StatusCode;
use axum::response::IntoResponse;
use axum::routing::{get, post};
use axum::Router;
use linkrisk_core::corpus::{CorpusFilter, DatasetMeta, Granularity};
use linkrisk_core::disclosure::RecordDetail;
use linkrisk_core::vulnerability::VulnerabilityProfile;
use serde::Deserialize;

use crate::error::ApiError;
use crate::state::{AppState, GroupingStart};
use crate::types::*;

type Shared = Arc<AppState>;

#[derive(FromRequest)]
#[from_request(via(axum::Json), rejection(ApiError))]
struct Json<T>(T);

impl<T: serde::Serialize> IntoResponse for Json<T> {
    fn into_response(self) -> axum::response::Response {
        axum::Json(self.0).into_response()
    }
}

#[derive(FromRequestParts)]
#[from_request(via(axum::extract::Path), rejection(ApiError))]
struct Path<T>(T);

#[derive(FromRequestParts)]
#[from_request(via(axum::extract::Query), rejection(ApiError))]
struct Query<T>(T);

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        ApiError::bad_request("InvalidBody", r.body_text())
    }
}

impl From<PathRejection> for ApiError {
    fn from(r: PathRejection) -> Self {
        ApiError::bad_request("InvalidPath", r.body_text())
    }
}

impl From<QueryRejection> for ApiError {
    fn from(r: QueryRejection) -> Self {
        ApiError::bad_request("InvalidQuery", r.body_text())
    }
}

pub fn router(state: Shared) -> Router {
    Router::new()
        .route("/corpus", get(corpus))
        .route("/session", get(session))
        .route("/dictionary", get(dictionary).put(put_dictionary))
        .route("/groupings", post(post_grouping))
        .route("/groupings/{id}", get(get_grouping))
        .route("/datasets/{id}/vulnerability", get(vulnerability))
        .route("/pairs", post(pairs))
        .route("/relevance", post(relevance))
        .route("/join", post(join))
        .route("/join/{id}/match/{n}", get(match_detail))
        .with_state(state)
}

#[derive(Debug, Default, Deserialize)]
struct CorpusQuery {
    tags: Option<String>,
    portals: Option<String>,
    granularity: Option<String>,
}

fn split_list(s: Option<&str>) -> BTreeSet<String> {
    s.unwrap_or_default()
        .split(',')
        .map(str::trim)
        .filter(|t| !t.is_empty())
        .map(String::from)
        .collect()
}

fn parse_granularity(s: &str) -> Result<Granularity, ApiError> {
    match s.trim().to_lowercase().as_str() {
        "individual" => Ok(Granularity::Individual),
        "aggregated" => Ok(Granularity::Aggregated),
        _ => Err(ApiError::bad_request(
            "InvalidFilter",
            format!("unknown granularity {s:?}"),
        )),
    }
}

async fn corpus(
    State(state): State<Shared>,
    Query(q): Query<CorpusQuery>,
) -> Result<Json<Vec<DatasetMeta>>, ApiError> {
    let filter = CorpusFilter {
        tags: split_list(q.tags.as_deref())
            .into_iter()
            .map(|t| t.to_lowercase())
            .collect(),
        portals: split_list(q.portals.as_deref()),
        granularity: q
            .granularity
            .as_deref()
            .filter(|g| !g.is_empty())
            .map(parse_granularity)
            .transpose()?,
    };
    Ok(Json(state.corpus(filter)))
}

async fn session(State(state): State<Shared>) -> Json<SessionState> {
    Json(state.session_state())
}

async fn dictionary(State(state): State<Shared>) -> Json<DictionaryView> {
    Json(state.dictionary())
}

async fn put_dictionary(
    State(state): State<Shared>,
    Json(update): Json<DictionaryUpdate>,
) -> Result<Json<DictionaryView>, ApiError> {
    Ok(Json(state.replace_dictionary(&update.attributes)?))
}

async fn post_grouping(
    State(state): State<Shared>,
    body: axum::body::Bytes,
) -> Result<impl IntoResponse, ApiError> {
    // an empty body means "all datasets under the active filters"
    let req: GroupingRequest = if body.iter().all(u8::is_ascii_whitespace) {
        GroupingRequest::default()
    } else {
        serde_json::from_slice(&body)
            .map_err(|e| ApiError::bad_request("InvalidBody", e.to_string()))?
    };
    let view = match state.start_grouping(req)? {
        GroupingStart::Existing(job) => job.view(),
        GroupingStart::New(work) => {
            let view = work.view();
            let worker = state.clone();
            tokio::task::spawn_blocking(move || worker.run_grouping(*work));
            view
        }
    };
    Ok((StatusCode::ACCEPTED, Json(view)))
}

async fn get_grouping(
    State(state): State<Shared>,
    Path(id): Path<String>,
) -> Result<Json<JobView>, ApiError> {
    Ok(Json(state.grouping(&id)?))
}

#[derive(Debug, Default, Deserialize)]
struct VulnerabilityQuery {
    threshold: Option<usize>,
}

async fn vulnerability(
    State(state): State<Shared>,
    Path(id): Path<String>,
    Query(q): Query<VulnerabilityQuery>,
) -> Result<Json<VulnerabilityProfile>, ApiError> {
    Ok(Json(state.vulnerability(&id, q.threshold)?))
}

async fn pairs(
    State(state): State<Shared>,
    Json(req): Json<PairsRequest>,
) -> Result<Json<PairsResponse>, ApiError> {
    Ok(Json(state.pairs(req)?))
}

async fn relevance(
    State(state): State<Shared>,
    Json(req): Json<RelevanceRequest>,
) -> Result<Json<RelevanceResponse>, ApiError> {
    Ok(Json(state.relevance(req)?))
}

async fn join(
    State(state): State<Shared>,
    Json(req): Json<JoinRequest>,
) -> Result<Json<JoinResponse>, ApiError> {
    Ok(Json(state.join(req)?))
}

async fn match_detail(
    State(state): State<Shared>,
    Path((id, n)): Path<(String, usize)>,
) -> Result<Json<RecordDetail>, ApiError> {
    Ok(Json(state.match_detail(&id, n)?))
}
