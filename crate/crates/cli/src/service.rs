//! HTTP front end: `POST /analyze` and `GET /healthz`.

use std::sync::Arc;

use axum::extract::rejection::JsonRejection;
use axum::extract::State;
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use base64::engine::general_purpose::STANDARD;
use base64::Engine;
use brandcheck::clients::content_hash;
use brandcheck::pipeline::analyze;
use brandcheck::{validate_sample, PipelineConfig, RawSample};
use serde::Deserialize;
use serde_json::json;
use tokio::sync::Semaphore;

use crate::run::{AnalyzeResponse, Backend};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct AnalyzeRequest {
    /// Selects the scenario in replay mode; derived from the payload if absent.
    #[serde(default)]
    pub id: Option<String>,
    pub url: String,
    pub html: String,
    /// Base64-encoded PNG.
    #[serde(default)]
    pub screenshot: Option<String>,
    /// Base64-encoded PNG.
    #[serde(default)]
    pub logo: Option<String>,
}

pub struct AppState {
    pub backend: Backend,
    pub pipeline: PipelineConfig,
    pub permits: Semaphore,
}

impl AppState {
    pub fn new(backend: Backend, pipeline: PipelineConfig, concurrency: usize) -> Self {
        Self {
            backend,
            pipeline,
            permits: Semaphore::new(concurrency),
        }
    }
}

struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(json!({ "error": self.1 }))).into_response()
    }
}

fn bad_request(msg: impl Into<String>) -> ApiError {
    ApiError(StatusCode::BAD_REQUEST, msg.into())
}

fn decode(field: &str, v: Option<String>) -> Result<Option<Vec<u8>>, ApiError> {
    v.filter(|s| !s.is_empty())
        .map(|s| STANDARD.decode(s.trim()).map_err(|e| bad_request(format!("{field}: invalid base64: {e}"))))
        .transpose()
}

pub fn request_id(req: &AnalyzeRequest) -> String {
    if let Some(id) = req.id.as_deref().filter(|s| !s.trim().is_empty()) {
        return id.to_string();
    }
    let mut bytes = req.url.as_bytes().to_vec();
    bytes.push(0);
    bytes.extend_from_slice(req.html.as_bytes());
    format!("req-{}", &content_hash(&bytes)[..16])
}

async fn analyze_handler(
    State(state): State<Arc<AppState>>,
    payload: Result<Json<AnalyzeRequest>, JsonRejection>,
) -> Result<Json<AnalyzeResponse>, ApiError> {
    let Json(req) = payload.map_err(|e| bad_request(e.body_text()))?;
    let raw = RawSample {
        id: request_id(&req),
        screenshot: decode("screenshot", req.screenshot)?,
        logo_crop: decode("logo", req.logo)?,
        url: req.url,
        html: req.html,
        label: None,
        true_brand: Vec::new(),
    };
    let sample = validate_sample(raw).map_err(|e| bad_request(e.to_string()))?;

    let _permit = state.permits.acquire().await.expect("semaphore is never closed");
    let st = Arc::clone(&state);
    let joined = tokio::task::spawn_blocking(move || {
        let out = analyze(&sample, &st.pipeline, st.backend.clients(), st.backend.gateways());
        out.map(|o| AnalyzeResponse::new(&sample, &o))
    })
    .await
    .map_err(|e| ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string()))?;
    match joined {
        Ok(resp) => Ok(Json(resp)),
        Err(e) if e.is_outage() => Err(ApiError(StatusCode::SERVICE_UNAVAILABLE, e.to_string())),
        Err(e) => Err(ApiError(StatusCode::INTERNAL_SERVER_ERROR, e.to_string())),
    }
}

async fn healthz(State(state): State<Arc<AppState>>) -> Json<serde_json::Value> {
    Json(json!({
        "status": "ok",
        "mode": state.backend.mode.to_string(),
        "cassette": state.backend.cassette_status(),
    }))
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/analyze", post(analyze_handler))
        .route("/healthz", get(healthz))
        .with_state(state)
}

/// Serves until the process is stopped.
pub async fn serve(listener: tokio::net::TcpListener, state: Arc<AppState>) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}
