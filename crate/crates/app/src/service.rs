//! JSON-over-HTTP query service.
//!
//! `GET /search?q=..&k=..&ranker=..`, `POST /match`, `GET /concept/{id}`,
//! `GET /healthz`. Every endpoint except `/healthz` answers 503 until the
//! index has finished loading.

use std::collections::HashMap;
use std::path::PathBuf;
use std::sync::{Arc, RwLock};

use axum::extract::{Path, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use crate::config::RankerKind;
use crate::error::AppError;
use crate::index::{hits_to_array, LoadedIndex};

const DEFAULT_K: usize = 10;

#[derive(Clone)]
pub struct ServiceState {
    index: Arc<RwLock<Option<Arc<LoadedIndex>>>>,
    default_ranker: Option<RankerKind>,
}

impl ServiceState {
    pub fn loading(default_ranker: Option<RankerKind>) -> Self {
        Self {
            index: Arc::new(RwLock::new(None)),
            default_ranker,
        }
    }

    pub fn ready(index: LoadedIndex, default_ranker: Option<RankerKind>) -> Self {
        let state = Self::loading(default_ranker);
        state.install(index);
        state
    }

    pub fn install(&self, index: LoadedIndex) {
        *self.index.write().expect("index lock") = Some(Arc::new(index));
    }

    fn get(&self) -> Result<Arc<LoadedIndex>, ApiError> {
        self.index
            .read()
            .expect("index lock")
            .clone()
            .ok_or_else(|| ApiError(StatusCode::SERVICE_UNAVAILABLE, AppError::new("app.NotReady", "index is loading")))
    }
}

struct ApiError(StatusCode, AppError);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, [(header::CONTENT_TYPE, "application/json")], self.1.to_json()).into_response()
    }
}

impl From<AppError> for ApiError {
    fn from(e: AppError) -> Self {
        let status = if e.is_usage() || e.code == "ranker.InvalidK" || e.code == "ranker.EmptyQueryConcept" {
            StatusCode::BAD_REQUEST
        } else {
            StatusCode::INTERNAL_SERVER_ERROR
        };
        Self(status, e)
    }
}

fn bad_request(message: impl Into<String>) -> ApiError {
    ApiError(StatusCode::BAD_REQUEST, AppError::usage(message))
}

fn json_body(body: String) -> Response {
    ([(header::CONTENT_TYPE, "application/json")], body).into_response()
}

fn parse_k(raw: Option<&str>) -> Result<usize, ApiError> {
    let k = match raw {
        None => DEFAULT_K,
        Some(s) => s.parse().map_err(|_| bad_request(format!("k must be a positive integer, got `{s}`")))?,
    };
    if k == 0 {
        return Err(bad_request("k must be at least 1"));
    }
    Ok(k)
}

fn parse_ranker(raw: Option<&str>, default: Option<RankerKind>) -> Result<Option<RankerKind>, ApiError> {
    match raw {
        None => Ok(default),
        Some(s) => s.parse().map(Some).map_err(bad_request),
    }
}

async fn search(
    State(state): State<ServiceState>,
    Query(params): Query<HashMap<String, String>>,
) -> Result<Response, ApiError> {
    let index = state.get()?;
    let q = params.get("q").ok_or_else(|| bad_request("missing query parameter q"))?;
    let k = parse_k(params.get("k").map(String::as_str))?;
    let kind = parse_ranker(params.get("ranker").map(String::as_str), state.default_ranker)?;
    let hits = index.search(kind, q, k)?;
    Ok(json_body(hits_to_array(&hits)))
}

#[derive(Deserialize)]
struct MatchRequest {
    labels: Vec<String>,
    k: Option<usize>,
    ranker: Option<String>,
}

async fn match_labels(State(state): State<ServiceState>, body: axum::body::Bytes) -> Result<Response, ApiError> {
    let index = state.get()?;
    let req: MatchRequest =
        serde_json::from_slice(&body).map_err(|e| bad_request(format!("invalid request body: {e}")))?;
    if req.labels.is_empty() {
        return Err(bad_request("labels must not be empty"));
    }
    let k = match req.k {
        Some(0) => return Err(bad_request("k must be at least 1")),
        Some(k) => k,
        None => DEFAULT_K,
    };
    let kind = parse_ranker(req.ranker.as_deref(), state.default_ranker)?;
    let hits = index.match_labels(kind, &req.labels, k)?;
    Ok(json_body(hits_to_array(&hits)))
}

#[derive(Serialize)]
struct ConceptView<'a> {
    id: &'a str,
    labels: &'a [String],
    parent_ids: Vec<&'a str>,
    child_ids: Vec<String>,
}

async fn concept(State(state): State<ServiceState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let index = state.get()?;
    let graph = &index.graph;
    let c = graph
        .concept(&id)
        .map_err(|e| ApiError(StatusCode::NOT_FOUND, e.into()))?;
    let view = ConceptView {
        id: &c.id,
        labels: &c.labels,
        parent_ids: graph.parents(&id).expect("known id").iter().map(String::as_str).collect(),
        child_ids: graph.children(&id).expect("known id").into_iter().collect(),
    };
    Ok(Json(view).into_response())
}

async fn healthz(State(state): State<ServiceState>) -> Response {
    let loaded = state.index.read().expect("index lock").clone();
    match loaded {
        None => (
            StatusCode::SERVICE_UNAVAILABLE,
            Json(serde_json::json!({"status": "loading"})),
        )
            .into_response(),
        Some(index) => {
            let fingerprints: serde_json::Map<String, serde_json::Value> = index
                .fingerprints()
                .into_iter()
                .map(|(k, v)| (k.to_string(), v.into()))
                .collect();
            Json(serde_json::json!({
                "status": "ok",
                "concepts": index.graph.len(),
                "fingerprints": fingerprints,
            }))
            .into_response()
        }
    }
}

pub fn router(state: ServiceState) -> Router {
    Router::new()
        .route("/search", get(search))
        .route("/match", post(match_labels))
        .route("/concept/{id}", get(concept))
        .route("/healthz", get(healthz))
        .with_state(state)
}

/// Binds first, then loads the index in the background so `/healthz`
/// reports progress.
pub async fn serve(index_dir: PathBuf, bind: &str, default_ranker: Option<RankerKind>) -> Result<(), AppError> {
    let listener = tokio::net::TcpListener::bind(bind)
        .await
        .map_err(|e| AppError::new("app.Io", format!("cannot bind {bind}: {e}")))?;
    let state = ServiceState::loading(default_ranker);
    let loader = state.clone();
    tokio::task::spawn_blocking(move || match LoadedIndex::load(&index_dir) {
        Ok(index) => {
            log::info!("index loaded from {}", index_dir.display());
            loader.install(index);
        }
        Err(e) => {
            eprintln!("{}", e.to_json());
            std::process::exit(i32::from(e.exit_code()));
        }
    });
    log::info!("listening on {bind}");
    axum::serve(listener, router(state))
        .await
        .map_err(|e| AppError::new("app.Io", format!("server error: {e}")))
}

pub fn serve_blocking(index_dir: PathBuf, bind: &str, default_ranker: Option<RankerKind>) -> Result<(), AppError> {
    tokio::runtime::Builder::new_multi_thread()
        .enable_all()
        .build()
        .map_err(|e| AppError::new("app.Io", format!("cannot start runtime: {e}")))?
        .block_on(serve(index_dir, bind, default_ranker))
}
