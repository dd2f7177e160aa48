// SPDX-License-Identifier: Apache-2.0

use std::future::Future;
use std::sync::Arc;
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use tokio::net::TcpListener;

use super::{ApiError, AppState, ChatRequest, FeedbackRequest, ServiceError};
use crate::retrieval::parse_corpus;

pub const IDEMPOTENCY_HEADER: &str = "idempotency-key";

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = match &self {
            ApiError::BadRequest(_) => StatusCode::BAD_REQUEST,
            ApiError::NotFound(_) => StatusCode::NOT_FOUND,
            ApiError::Internal(_) => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (status, Json(serde_json::json!({ "error": self.to_string() }))).into_response()
    }
}

fn parse_body<T: for<'de> Deserialize<'de>>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::BadRequest(format!("malformed body: {e}")))
}

async fn chat(State(s): State<Arc<AppState>>, body: Bytes) -> Result<impl IntoResponse, ApiError> {
    s.metrics.count_request("/v1/chat");
    let req: ChatRequest = match parse_body(&body) {
        Ok(r) => r,
        Err(e) => return Err(s.chat_malformed(e.to_string())),
    };
    Ok(Json(s.chat(&req)?))
}

#[derive(Debug, Deserialize)]
struct FeedQuery {
    budget: Option<usize>,
}

async fn feed(
    State(s): State<Arc<AppState>>,
    Path(user_id): Path<String>,
    Query(q): Query<FeedQuery>,
) -> Result<impl IntoResponse, ApiError> {
    s.metrics.count_request("/v1/feed");
    Ok(Json(s.feed(&user_id, q.budget)?))
}

async fn feedback(State(s): State<Arc<AppState>>, headers: HeaderMap, body: Bytes) -> Result<impl IntoResponse, ApiError> {
    s.metrics.count_request("/v1/feedback");
    let req: FeedbackRequest = parse_body(&body)?;
    let key = match headers.get(IDEMPOTENCY_HEADER) {
        Some(v) => Some(
            v.to_str()
                .map_err(|_| ApiError::BadRequest("idempotency key is not visible ASCII".into()))?
                .to_string(),
        ),
        None => None,
    };
    Ok(Json(s.feedback(&req, key.as_deref())?))
}

async fn ingest(State(s): State<Arc<AppState>>, body: Bytes) -> Result<impl IntoResponse, ApiError> {
    s.metrics.count_request("/v1/ingest");
    let text = std::str::from_utf8(&body).map_err(|e| ApiError::BadRequest(e.to_string()))?;
    let manifest = s.orchestrator.manifest.snapshot();
    let docs = parse_corpus(text, Some(&manifest)).map_err(|e| ApiError::BadRequest(e.to_string()))?;
    let count = docs.len();
    let generation = s.ingest(docs)?;
    Ok(Json(serde_json::json!({ "documents": count, "generation": generation })))
}

async fn pregen(State(s): State<Arc<AppState>>) -> Result<impl IntoResponse, ApiError> {
    s.metrics.count_request("/v1/pregen");
    let report = tokio::task::spawn_blocking(move || s.run_pregen_cycle())
        .await
        .map_err(|e| ApiError::Internal(e.to_string()))?;
    Ok(Json(report))
}

async fn metrics(State(s): State<Arc<AppState>>) -> impl IntoResponse {
    s.metrics.count_request("/metrics");
    ([(header::CONTENT_TYPE, "text/plain; version=0.0.4")], s.metrics_text())
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/v1/chat", post(chat))
        .route("/v1/feed/{user_id}", get(feed))
        .route("/v1/feedback", post(feedback))
        .route("/v1/ingest", post(ingest))
        .route("/v1/pregen", post(pregen))
        .route("/metrics", get(metrics))
        .with_state(state)
}

/// Resolves on Ctrl-C or SIGTERM.
pub async fn shutdown_signal() {
    let ctrl_c = async {
        let _ = tokio::signal::ctrl_c().await;
    };
    #[cfg(unix)]
    let term = async {
        match tokio::signal::unix::signal(tokio::signal::unix::SignalKind::terminate()) {
            Ok(mut s) => {
                s.recv().await;
            }
            Err(_) => std::future::pending::<()>().await,
        }
    };
    #[cfg(not(unix))]
    let term = std::future::pending::<()>();
    tokio::select! {
        _ = ctrl_c => {},
        _ = term => {},
    }
}

/// Runs one pre-generation cycle, then serves until `shutdown` resolves,
/// re-running pre-generation on the configured interval. Logs are flushed and
/// the arm snapshot written before returning.
pub async fn serve(
    state: Arc<AppState>,
    listener: TcpListener,
    shutdown: impl Future<Output = ()> + Send + 'static,
) -> Result<(), ServiceError> {
    let first = {
        let s = state.clone();
        tokio::task::spawn_blocking(move || s.run_pregen_cycle())
            .await
            .map_err(|e| ServiceError::Runtime(e.to_string()))?
    };
    tracing::info!(emitted = first.emitted(), users = first.users.len(), "initial pregen cycle");

    let period = Duration::from_secs(state.config.pregen_interval_secs);
    let scheduler = {
        let s = state.clone();
        tokio::spawn(async move {
            let mut tick = tokio::time::interval_at(tokio::time::Instant::now() + period, period);
            tick.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
            loop {
                tick.tick().await;
                let s = s.clone();
                match tokio::task::spawn_blocking(move || s.run_pregen_cycle()).await {
                    Ok(r) => tracing::info!(emitted = r.emitted(), "pregen cycle"),
                    Err(e) => tracing::error!(error = %e, "pregen cycle panicked"),
                }
            }
        })
    };

    tracing::info!(addr = %listener.local_addr().map(|a| a.to_string()).unwrap_or_default(), "listening");
    let result = axum::serve(listener, router(state.clone()))
        .with_graceful_shutdown(shutdown)
        .await
        .map_err(|e| ServiceError::Runtime(e.to_string()));
    scheduler.abort();
    state.shutdown()?;
    result
}
