//! A stand-in model server answering the embedding and NLI protocols from
//! recorded outputs. Handy for exercising the HTTP scorer clients without a
//! real model.

use std::sync::Arc;

use axum::extract::State;
use axum::http::StatusCode;
use axum::routing::post;
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::{json, Value};
use sxq_core::scorer::{EmbeddingBackend, NliBackend, ReplayEmbedder, ReplayNli};

struct Recorded {
    embeddings: ReplayEmbedder,
    nli: ReplayNli,
}

#[derive(Deserialize)]
struct EmbedBody {
    model: String,
    input: Vec<String>,
}

#[derive(Deserialize)]
struct NliBody {
    model: String,
    premise: String,
    hypothesis: String,
}

/// `POST /embed` and `POST /nli`. Unrecorded inputs get a 404.
pub fn replay_router(embeddings: ReplayEmbedder, nli: ReplayNli) -> Router {
    Router::new()
        .route("/embed", post(embed))
        .route("/nli", post(classify))
        .with_state(Arc::new(Recorded { embeddings, nli }))
}

async fn embed(
    State(r): State<Arc<Recorded>>,
    Json(body): Json<EmbedBody>,
) -> Result<Json<Value>, (StatusCode, String)> {
    r.embeddings
        .embed(&body.model, &body.input)
        .map(|e| Json(json!({ "embeddings": e })))
        .map_err(|e| (StatusCode::NOT_FOUND, e.to_string()))
}

async fn classify(
    State(r): State<Arc<Recorded>>,
    Json(body): Json<NliBody>,
) -> Result<Json<Value>, (StatusCode, String)> {
    r.nli
        .classify(&body.model, &body.premise, &body.hypothesis)
        .map(|p| Json(json!(p)))
        .map_err(|e| (StatusCode::NOT_FOUND, e.to_string()))
}
