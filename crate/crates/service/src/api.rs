//! HTTP routes over a [`RunManager`].

use std::path::PathBuf;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::{header, HeaderValue, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use codhy_core::evaluation::{bundled_scenarios, Scenario};
use codhy_core::ingestion::{FieldError, RunConfig};
use serde::Serialize;

use crate::manager::{LookupError, RunManager, SubmitError};

pub struct AppState {
    pub manager: RunManager,
    pub scenarios: Vec<Scenario>,
}

impl AppState {
    pub fn new(manager: RunManager) -> Self {
        Self {
            manager,
            scenarios: bundled_scenarios(),
        }
    }
}

fn json<T: Serialize>(status: StatusCode, body: &T) -> Response {
    let bytes = serde_json::to_vec(body).expect("response serializes");
    (status, [(header::CONTENT_TYPE, "application/json")], bytes).into_response()
}

#[derive(Serialize)]
struct ErrorBody<'a> {
    error: &'a str,
    #[serde(skip_serializing_if = "Option::is_none")]
    stage: Option<codhy_core::pipeline::Stage>,
    #[serde(skip_serializing_if = "Vec::is_empty")]
    fields: Vec<FieldError>,
    #[serde(skip_serializing_if = "Option::is_none")]
    retry_after_secs: Option<u64>,
}

fn error(message: &str) -> ErrorBody<'_> {
    ErrorBody {
        error: message,
        stage: None,
        fields: Vec::new(),
        retry_after_secs: None,
    }
}

fn lookup_error(err: LookupError) -> Response {
    let msg = err.to_string();
    match err {
        LookupError::NotFound(_) => json(StatusCode::NOT_FOUND, &error(&msg)),
        LookupError::NotReady { stage, .. } => {
            let body = ErrorBody {
                stage: Some(stage),
                ..error(&msg)
            };
            json(StatusCode::CONFLICT, &body)
        }
        LookupError::Absent(_) => json(StatusCode::CONFLICT, &error(&msg)),
    }
}

async fn submit(State(app): State<Arc<AppState>>, body: Bytes) -> Response {
    let config: RunConfig = match serde_json::from_slice(&body) {
        Ok(c) => c,
        Err(e) => {
            let body = ErrorBody {
                fields: vec![FieldError {
                    field: "body".into(),
                    message: e.to_string(),
                }],
                ..error("malformed run configuration")
            };
            return json(StatusCode::BAD_REQUEST, &body);
        }
    };
    match app.manager.submit(config) {
        Ok(run_id) => json(StatusCode::ACCEPTED, &serde_json::json!({ "run_id": run_id })),
        Err(SubmitError::Invalid(fields)) => {
            let body = ErrorBody {
                fields,
                ..error("invalid run configuration")
            };
            json(StatusCode::BAD_REQUEST, &body)
        }
        Err(SubmitError::QueueFull { retry_after }) => {
            let secs = retry_after.as_secs().max(1);
            let body = ErrorBody {
                retry_after_secs: Some(secs),
                ..error("run queue is full")
            };
            let mut resp = json(StatusCode::SERVICE_UNAVAILABLE, &body);
            resp.headers_mut().insert(header::RETRY_AFTER, HeaderValue::from(secs));
            resp
        }
        Err(SubmitError::Closed) => json(
            StatusCode::SERVICE_UNAVAILABLE,
            &error("run manager is shut down"),
        ),
    }
}

async fn status(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> Response {
    match app.manager.status(&id) {
        Ok(s) => json(StatusCode::OK, &s),
        Err(e) => lookup_error(e),
    }
}

async fn report(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> Response {
    match app.manager.report(&id) {
        Ok(r) => {
            let name = format!(
                "inline; filename=\"codhy_report_{}.json\"",
                r.created_at.format("%Y%m%dT%H%M%SZ")
            );
            let mut resp = (StatusCode::OK, [(header::CONTENT_TYPE, "application/json")], r.to_canonical_json())
                .into_response();
            if let Ok(v) = HeaderValue::from_str(&name) {
                resp.headers_mut().insert(header::CONTENT_DISPOSITION, v);
            }
            resp
        }
        Err(e) => lookup_error(e),
    }
}

async fn graph(State(app): State<Arc<AppState>>, Path(id): Path<String>) -> Response {
    match app.manager.graph(&id) {
        Ok(g) => json(StatusCode::OK, &g),
        Err(e) => lookup_error(e),
    }
}

async fn providers(State(app): State<Arc<AppState>>) -> Response {
    let engine = app.manager.engine();
    json(
        StatusCode::OK,
        &serde_json::json!({
            "providers": engine.providers.ids(),
            "sources": engine.adapters.ids(),
        }),
    )
}

async fn scenarios(State(app): State<Arc<AppState>>) -> Response {
    json(StatusCode::OK, &serde_json::json!({ "scenarios": app.scenarios }))
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/api/runs", post(submit))
        .route("/api/runs/{id}", get(status))
        .route("/api/runs/{id}/report", get(report))
        .route("/api/runs/{id}/graph", get(graph))
        .route("/api/providers", get(providers))
        .route("/api/scenarios", get(scenarios))
        .with_state(state)
}

/// The API plus, when given, a directory of built web assets at `/`.
pub fn app(state: Arc<AppState>, static_dir: Option<PathBuf>) -> Router {
    let api = router(state);
    match static_dir {
        Some(dir) => api.fallback_service(tower_http::services::ServeDir::new(dir)),
        None => api,
    }
}
