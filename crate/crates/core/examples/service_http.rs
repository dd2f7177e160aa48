// SPDX-License-Identifier: Apache-2.0

//! Opens the service on the demo dataset in a temporary directory and drives
//! its HTTP API in process: chat, pre-generation, feed, feedback, metrics.
//! `groundpilot serve` runs the same router on a socket.
//!
//! ```text
//! cargo run --example service_http
//! ```

use std::sync::Arc;

use axum::body::Body;
use axum::http::{Method, Request};
use axum::Router;
use groundpilot::demo;
use groundpilot::service::{router, AppState};
use http_body_util::BodyExt;
use tower::ServiceExt;

/// Sends one request and returns the status and body, with JSON cut to 400 characters.
async fn call(app: &Router, method: Method, uri: &str, body: &str) -> String {
    let req = Request::builder()
        .method(method)
        .uri(uri)
        .header("idempotency-key", format!("example-{uri}"))
        .body(Body::from(body.to_string()))
        .expect("valid request");
    let resp = app.clone().oneshot(req).await.expect("infallible");
    let status = resp.status();
    let bytes = resp.into_body().collect().await.expect("body").to_bytes();
    let text = String::from_utf8_lossy(&bytes);
    let limit = if text.starts_with('{') { 400 } else { usize::MAX };
    let cut: String = text.chars().take(limit).collect();
    let more = if cut.len() < text.len() { " ..." } else { "" };
    format!("{status} {cut}{more}")
}

#[tokio::main]
async fn main() -> anyhow::Result<()> {
    let dir = tempfile::tempdir()?;
    let config = demo::write_config(dir.path())?;
    let state = Arc::new(AppState::open(config)?);
    let app = router(state.clone());

    let chat = r#"{"user_id":"u001","component_id":"portfolio_analysis","query":"how are my holdings doing"}"#;
    println!("POST /v1/chat\n{}\n", call(&app, Method::POST, "/v1/chat", chat).await);
    println!("POST /v1/pregen\n{}\n", call(&app, Method::POST, "/v1/pregen", "").await);

    let feed = call(&app, Method::GET, "/v1/feed/u001?budget=2", "").await;
    println!("GET /v1/feed/u001?budget=2\n{feed}\n");
    if let Some((_, trace)) = state.last_trace("u001") {
        let top = &trace.final_order[0];
        let fb = format!(r#"{{"user_id":"u001","card_id":"{top}","event":"click"}}"#);
        println!("POST /v1/feedback\n{}\n", call(&app, Method::POST, "/v1/feedback", &fb).await);
    }

    println!("GET /metrics\n{}", call(&app, Method::GET, "/metrics", "").await);
    state.shutdown()?;
    Ok(())
}
