use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, Multipart, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::NaiveDate;
use groundline_core::eval::{run_suite, EvalEnv, Suite, Variant};
use groundline_core::fixtures;
use groundline_core::pipeline::{GuardPipeline, PipelineConfig, PipelineError};
use groundline_core::store::{ingest_csv, IngestOptions};
use serde::Deserialize;
use serde_json::{json, Value as JsonValue};
use tower_http::cors::CorsLayer;
use tower_http::services::{ServeDir, ServeFile};

use crate::state::AppState;

const UPLOAD_LIMIT: usize = 64 * 1024 * 1024;

#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub status: StatusCode,
    pub code: String,
    pub message: String,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> ApiError {
        ApiError { status, code: code.into(), message: message.into() }
    }

    fn bad_request(code: &str, message: impl Into<String>) -> ApiError {
        ApiError::new(StatusCode::BAD_REQUEST, code, message)
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let body = json!({ "status": self.status.as_u16(), "code": self.code, "message": self.message });
        (self.status, Json(body)).into_response()
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    let mut app = Router::new()
        .route("/api/health", get(health))
        .route("/api/datasets", get(list_datasets).post(upload_dataset))
        .route("/api/ask", post(ask))
        .route("/api/semantic-model", get(semantic_model))
        .route("/api/eval/run", post(eval_run))
        .layer(DefaultBodyLimit::max(UPLOAD_LIMIT));
    if let Some(dir) = &state.config.static_dir {
        let index = dir.join("index.html");
        app = app.fallback_service(ServeDir::new(dir).fallback(ServeFile::new(index)));
    }
    if state.config.dev {
        app = app.layer(CorsLayer::permissive());
    }
    app.with_state(state)
}

async fn health() -> Json<JsonValue> {
    Json(json!({ "status": "ok" }))
}

async fn list_datasets(State(state): State<Arc<AppState>>) -> Json<JsonValue> {
    let snapshot = state.registry.snapshot();
    let list: Vec<JsonValue> = snapshot
        .iter()
        .map(|d| json!({ "name": d.name, "columns": d.schema.columns, "metadata": d.metadata }))
        .collect();
    Json(JsonValue::Array(list))
}

async fn upload_dataset(State(state): State<Arc<AppState>>, mut form: Multipart) -> Result<Json<JsonValue>, ApiError> {
    let mut file: Option<(Option<String>, Bytes)> = None;
    let mut name = None;
    let mut label = None;
    while let Some(field) = form.next_field().await.map_err(|e| ApiError::bad_request("BAD_MULTIPART", e.to_string()))? {
        let bad = |e: axum::extract::multipart::MultipartError| ApiError::bad_request("BAD_MULTIPART", e.to_string());
        match field.name() {
            Some("file") => {
                let filename = field.file_name().map(str::to_string);
                file = Some((filename, field.bytes().await.map_err(bad)?));
            }
            Some("name") => name = Some(field.text().await.map_err(bad)?),
            Some("source_label") => label = Some(field.text().await.map_err(bad)?),
            _ => {}
        }
    }
    let Some((filename, bytes)) = file else {
        return Err(ApiError::bad_request("MISSING_FILE", "multipart field \"file\" is required"));
    };
    let name = name
        .filter(|n| !n.trim().is_empty())
        .or_else(|| filename.as_deref().map(|f| f.rsplit_once('.').map_or(f, |(stem, _)| stem).to_string()))
        .ok_or_else(|| ApiError::bad_request("MISSING_NAME", "give a dataset name or a file name"))?;
    let opts = IngestOptions {
        source_label: label.filter(|l| !l.is_empty()),
        ingested_at: state.ingest_clock(),
        ..IngestOptions::default()
    };
    let dataset = ingest_csv(&bytes, &name, &opts).map_err(|e| ApiError::bad_request(e.code(), e.to_string()))?;
    let mut body = serde_json::to_value(&dataset.metadata).expect("metadata serializes");
    body["name"] = json!(dataset.name);
    body["columns"] = json!(dataset.schema.columns);
    body["warnings"] = json!(dataset.warnings);
    let replaced = state.registry.register(dataset);
    body["replaced"] = json!(replaced);
    tracing::info!("registered dataset {name} (replaced: {replaced})");
    Ok(Json(body))
}

fn parse_body<T: for<'de> Deserialize<'de>>(body: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request("BAD_REQUEST", e.to_string()))
}

/// Overlay `overrides` onto `base`; unknown keys are rejected.
fn merged_config(base: PipelineConfig, overrides: Option<JsonValue>) -> Result<PipelineConfig, ApiError> {
    let Some(overrides) = overrides else { return Ok(base) };
    let JsonValue::Object(over) = overrides else {
        return Err(ApiError::bad_request("BAD_CONFIG", "config_overrides must be an object"));
    };
    let mut merged = serde_json::to_value(base).expect("config serializes");
    for (k, v) in over {
        merged[k] = v;
    }
    serde_json::from_value(merged).map_err(|e| ApiError::bad_request("BAD_CONFIG", e.to_string()))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AskRequest {
    query: String,
    #[serde(default)]
    datasets: Vec<String>,
    #[serde(default)]
    now: Option<NaiveDate>,
    #[serde(default)]
    config_overrides: Option<JsonValue>,
    #[serde(default)]
    seed: Option<u64>,
}

async fn ask(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Response, ApiError> {
    let req: AskRequest = parse_body(&body)?;
    let config = merged_config(state.config.pipeline, req.config_overrides)?;
    let store = state
        .registry
        .snapshot()
        .scoped(&req.datasets)
        .map_err(|name| ApiError::bad_request("UNKNOWN_DATASET", format!("dataset {name:?} is not registered")))?;
    let now = req.now.unwrap_or_else(|| state.today());
    let seed = req.seed.unwrap_or(state.config.seed);
    let worker = state.clone();
    let result = tokio::task::spawn_blocking(move || {
        let pipeline = GuardPipeline::new(worker.provider(seed), config).with_timing(worker.config.timing);
        let model = worker.model().unwrap_or_default();
        pipeline.answer_query(&req.query, &store, &model, &worker.rules, now)
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "INTERNAL", e.to_string()))?;
    match result {
        Ok(envelope) => Ok(Json(envelope).into_response()),
        Err(PipelineError::Credential(var)) => Err(ApiError::new(
            StatusCode::SERVICE_UNAVAILABLE,
            "PROVIDER_UNAVAILABLE",
            format!("provider credential missing: set {var}"),
        )),
    }
}

async fn semantic_model(State(state): State<Arc<AppState>>) -> Result<Json<JsonValue>, ApiError> {
    match state.model() {
        Some(m) => Ok(Json(serde_json::to_value(&m).expect("model serializes"))),
        None => Err(ApiError::new(StatusCode::NOT_FOUND, "NO_MODEL", "no semantic model is loaded")),
    }
}

#[derive(Deserialize)]
#[serde(untagged)]
enum SuiteRef {
    Named(String),
    Inline(Suite),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct EvalRequest {
    suite: SuiteRef,
    #[serde(default)]
    variant: Option<String>,
    #[serde(default)]
    config_overrides: Option<JsonValue>,
    #[serde(default)]
    seed: Option<u64>,
}

async fn eval_run(State(state): State<Arc<AppState>>, body: Bytes) -> Result<Response, ApiError> {
    let req: EvalRequest = parse_body(&body)?;
    let suite = match req.suite {
        SuiteRef::Inline(s) => s,
        SuiteRef::Named(name) if name == "mixed" => fixtures::mixed_suite(),
        SuiteRef::Named(name) => fixtures::suite(&name)
            .ok_or_else(|| ApiError::bad_request("UNKNOWN_SUITE", format!("no bundled suite named {name:?}")))?,
    };
    let config = merged_config(state.config.pipeline, req.config_overrides)?;
    let variant = Variant::new(req.variant.unwrap_or_else(|| "configured".into()), config);
    let seed = req.seed.unwrap_or(state.config.seed);
    let worker = state.clone();
    let report = tokio::task::spawn_blocking(move || {
        let env = EvalEnv {
            store: worker.registry.snapshot(),
            model: worker.model().unwrap_or_default(),
            rules: worker.rules.clone(),
        };
        let provider_for = |s: u64| worker.provider(s);
        run_suite(&suite, &[variant], &[seed], &env, &provider_for).remove(0)
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "INTERNAL", e.to_string()))?;
    Ok(Json(report).into_response())
}
