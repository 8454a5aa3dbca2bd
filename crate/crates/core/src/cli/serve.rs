//! Read-only HTTP retrieval over a saved index and checkpoint.
//!
//! - `GET /healthz` returns `{status, n_products, d, checkpoint_step, corpus_hash}`.
//! - `GET /retrieve?query=...&k=...&category=...` returns
//!   `[{product_id, score}, ...]` ranked as [`EmbeddingIndex::retrieve_topk`].

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::Path;
use std::sync::Arc;

use axum::extract::{Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::get;
use axum::{Json, Router};
use serde::{Deserialize, Serialize};

use crate::encoder::{load_checkpoint, EncoderParams};
use crate::error::{Error, Result};
use crate::retrieval::{embed_query, EmbeddingIndex};
use crate::text::Vocabulary;

/// Default result count when `k` is absent.
pub const DEFAULT_SERVE_K: usize = 10;

pub struct ServeState {
    pub index: EmbeddingIndex,
    pub params: EncoderParams,
    pub vocab: Vocabulary,
    pub checkpoint_step: usize,
}

impl ServeState {
    pub fn load(index_path: &Path, checkpoint_path: &Path, vocab_path: &Path) -> Result<Self> {
        let index = EmbeddingIndex::load(index_path)?;
        let (header, params) = load_checkpoint(checkpoint_path)?;
        let vocab = Vocabulary::load(vocab_path)?;
        if header.vocab_fingerprint != vocab.fingerprint() {
            return Err(Error::Artifact {
                path: checkpoint_path.to_path_buf(),
                message: format!("does not match vocabulary {}", vocab_path.display()),
            });
        }
        if header.dim != index.dim() {
            return Err(Error::DimensionMismatch { expected: index.dim(), actual: header.dim });
        }
        Ok(ServeState { index, params, vocab, checkpoint_step: header.step })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Health {
    pub status: String,
    pub n_products: usize,
    pub d: usize,
    pub checkpoint_step: usize,
    pub corpus_hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hit {
    pub product_id: String,
    pub score: f64,
}

fn bad_request(message: impl Into<String>) -> Response {
    (StatusCode::BAD_REQUEST, Json(serde_json::json!({ "error": message.into() }))).into_response()
}

async fn healthz(State(state): State<Arc<ServeState>>) -> Json<Health> {
    Json(Health {
        status: "ok".into(),
        n_products: state.index.len(),
        d: state.index.dim(),
        checkpoint_step: state.checkpoint_step,
        corpus_hash: state.index.corpus_hash().to_string(),
    })
}

async fn retrieve(State(state): State<Arc<ServeState>>, Query(params): Query<HashMap<String, String>>) -> Response {
    let query = match params.get("query").map(|q| q.trim()) {
        Some(q) if !q.is_empty() => q,
        _ => return bad_request("`query` is required and must be nonblank"),
    };
    let k = match params.get("k") {
        None => DEFAULT_SERVE_K,
        Some(raw) => match raw.trim().parse::<i64>() {
            Ok(k) if k > 0 => k as usize,
            Ok(_) => return bad_request("`k` must be positive"),
            Err(_) => return bad_request(format!("`k` is not an integer: {raw}")),
        },
    };
    let category = params.get("category").map(String::as_str).filter(|c| !c.is_empty());
    let result = embed_query(&state.params, &state.vocab, query)
        .and_then(|v| state.index.retrieve_topk(&v.0, k, category));
    match result {
        Ok(hits) => {
            let body: Vec<Hit> = hits.into_iter().map(|(product_id, score)| Hit { product_id, score }).collect();
            Json(body).into_response()
        }
        Err(e) => (StatusCode::INTERNAL_SERVER_ERROR, Json(serde_json::json!({ "error": e.to_string() })))
            .into_response(),
    }
}

pub fn router(state: Arc<ServeState>) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/retrieve", get(retrieve))
        .with_state(state)
}

/// Serves until the process is stopped.
pub async fn serve(state: ServeState, port: u16) -> Result<()> {
    let addr = SocketAddr::from(([127, 0, 0, 1], port));
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(Arc::new(state))).await?;
    Ok(())
}
