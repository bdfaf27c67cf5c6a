//! HTTP front end over one in-memory tree.
//!
//! Reads run concurrently against an immutable snapshot. Mutations queue on a
//! single writer, are journaled before they become visible, and then replace
//! the snapshot in one pointer swap, so a query sees either the old tree or
//! the new one.

pub mod journal;
pub mod replay_server;

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex, RwLock};

use axum::extract::rejection::JsonRejection;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Serialize;
use serde_json::{json, Value};
use sxq_core::response::{run_query, ErrorBody, MutateRequest, QueryError, QueryRequest, QueryResponse};
use sxq_core::scorer::{build_scorer, Scorer, ScorerError, ScorerSpec};
use sxq_core::tree::{
    load_memory, to_document_value, DocumentError, MemoryTree, MutationError, NodeId, SUMMARY_ATTRIBUTE,
};
use tower_http::cors::CorsLayer;

pub use journal::{read_journal, replay, Journal, JournalError};

/// Scorers live as long as the service so their caches are shared across
/// requests.
#[derive(Default)]
pub struct ScorerRegistry {
    scorers: Mutex<HashMap<ScorerSpec, Arc<dyn Scorer>>>,
}

impl ScorerRegistry {
    pub fn get(&self, spec: &ScorerSpec) -> Result<Arc<dyn Scorer>, ScorerError> {
        let mut map = self.scorers.lock().expect("registry lock");
        if let Some(s) = map.get(spec) {
            return Ok(s.clone());
        }
        let s = build_scorer(spec)?;
        map.insert(spec.clone(), s.clone());
        Ok(s)
    }
}

pub struct AppState {
    memory: RwLock<Arc<MemoryTree>>,
    writer: tokio::sync::Mutex<()>,
    journal: Mutex<Option<Journal>>,
    scorers: ScorerRegistry,
}

#[derive(Debug, thiserror::Error)]
pub enum StartError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Document { path: PathBuf, source: DocumentError },
    #[error(transparent)]
    Journal(#[from] JournalError),
}

#[derive(Debug, thiserror::Error)]
pub enum MutateError {
    #[error(transparent)]
    Mutation(#[from] MutationError),
    #[error(transparent)]
    Journal(#[from] JournalError),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct MutateOutcome {
    pub version: NodeId,
    pub revision: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VersionInfo {
    pub id: NodeId,
    pub summary: Option<String>,
}

impl AppState {
    pub fn new(tree: MemoryTree, journal: Option<Journal>) -> Self {
        AppState {
            memory: RwLock::new(Arc::new(tree)),
            writer: tokio::sync::Mutex::new(()),
            journal: Mutex::new(journal),
            scorers: ScorerRegistry::default(),
        }
    }

    /// Loads `memory_file`, replays `journal_file` on top of it if present,
    /// and keeps appending to that journal.
    pub fn load(memory_file: &Path, journal_file: Option<&Path>) -> Result<Self, StartError> {
        let text = std::fs::read_to_string(memory_file).map_err(|source| StartError::Read {
            path: memory_file.to_path_buf(),
            source,
        })?;
        let mut tree = load_memory(&text).map_err(|source| StartError::Document {
            path: memory_file.to_path_buf(),
            source,
        })?;
        let journal = match journal_file {
            Some(path) => {
                tree = replay(tree, &read_journal(path)?)?;
                Some(Journal::open(path)?)
            }
            None => None,
        };
        Ok(AppState::new(tree, journal))
    }

    pub fn snapshot(&self) -> Arc<MemoryTree> {
        self.memory.read().expect("memory lock").clone()
    }

    pub fn scorers(&self) -> &ScorerRegistry {
        &self.scorers
    }

    /// Blocking; evaluation may call out to model servers.
    pub fn query(&self, request: &QueryRequest) -> Result<QueryResponse, QueryError> {
        let tree = self.snapshot();
        let scorer = self.scorers.get(&request.scorer.clone().with_env_defaults())?;
        run_query(&tree, request, scorer.as_ref())
    }

    pub async fn mutate(self: &Arc<Self>, request: MutateRequest) -> Result<MutateOutcome, MutateError> {
        let _writer = self.writer.lock().await;
        let state = self.clone();
        tokio::task::spawn_blocking(move || {
            let current = state.snapshot();
            let next = request.spec.apply(&current, &request.summary)?;
            if let Some(j) = state.journal.lock().expect("journal lock").as_mut() {
                j.append(&request)?;
            }
            let version = next
                .children(next.root_id())
                .expect("root exists")
                .last()
                .expect("a version was just added")
                .clone();
            let revision = next.revision();
            *state.memory.write().expect("memory lock") = Arc::new(next);
            Ok(MutateOutcome { version, revision })
        })
        .await
        .expect("mutation task panicked")
    }

    pub fn versions(&self) -> Vec<VersionInfo> {
        let tree = self.snapshot();
        tree.children(tree.root_id())
            .expect("root exists")
            .iter()
            .map(|id| VersionInfo {
                id: id.clone(),
                summary: tree
                    .node(id)
                    .ok()
                    .and_then(|n| n.attributes.get(SUMMARY_ATTRIBUTE).cloned()),
            })
            .collect()
    }
}

pub struct ApiError(StatusCode, ErrorBody);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(self.1)).into_response()
    }
}

impl From<JsonRejection> for ApiError {
    fn from(r: JsonRejection) -> Self {
        ApiError(StatusCode::BAD_REQUEST, ErrorBody::new("invalid-request", r.body_text()))
    }
}

pub fn query_status(e: &QueryError) -> StatusCode {
    match e {
        QueryError::Syntax(_) => StatusCode::UNPROCESSABLE_ENTITY,
        QueryError::InvalidRequest(_) | QueryError::Scorer(ScorerError::Config(_)) => StatusCode::BAD_REQUEST,
        QueryError::Scorer(_) => StatusCode::BAD_GATEWAY,
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/memory", get(memory))
        .route("/schema", get(schema))
        .route("/versions", get(versions))
        .route("/healthz", get(healthz))
        .route("/query", post(query))
        .route("/mutate", post(mutate))
        .layer(CorsLayer::permissive())
        .with_state(state)
}

pub async fn serve(state: Arc<AppState>, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!(addr = %listener.local_addr()?, "listening");
    axum::serve(listener, router(state)).await
}

async fn memory(State(state): State<Arc<AppState>>) -> Json<Value> {
    Json(to_document_value(&state.snapshot()))
}

async fn schema(State(state): State<Arc<AppState>>) -> Json<Value> {
    Json(json!(state.snapshot().schema()))
}

async fn versions(State(state): State<Arc<AppState>>) -> Json<Vec<VersionInfo>> {
    Json(state.versions())
}

async fn healthz(State(state): State<Arc<AppState>>) -> Json<Value> {
    Json(json!({"status": "ok", "revision": state.snapshot().revision()}))
}

async fn query(
    State(state): State<Arc<AppState>>,
    body: Result<Json<QueryRequest>, JsonRejection>,
) -> Result<Json<QueryResponse>, ApiError> {
    let Json(request) = body?;
    tokio::task::spawn_blocking(move || state.query(&request))
        .await
        .expect("query task panicked")
        .map(Json)
        .map_err(|e| ApiError(query_status(&e), ErrorBody::from(&e)))
}

async fn mutate(
    State(state): State<Arc<AppState>>,
    body: Result<Json<MutateRequest>, JsonRejection>,
) -> Result<Json<MutateOutcome>, ApiError> {
    let Json(request) = body?;
    state.mutate(request).await.map(Json).map_err(|e| match e {
        MutateError::Mutation(MutationError::Schema(v)) => {
            ApiError(StatusCode::UNPROCESSABLE_ENTITY, ErrorBody::schema(v))
        }
        MutateError::Mutation(m) => ApiError(StatusCode::BAD_REQUEST, ErrorBody::new("mutation", m.to_string())),
        MutateError::Journal(j) => {
            tracing::error!(error = %j, "journal write failed");
            ApiError(StatusCode::INTERNAL_SERVER_ERROR, ErrorBody::new("journal", j.to_string()))
        }
    })
}
