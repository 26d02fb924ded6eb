//! The benchmark HTTP service.
//!
//! `GET /v1/spaces`, `POST /v1/evaluate`, `GET /v1/health`. Handlers share
//! nothing mutable; each evaluation runs on the blocking pool.

use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::State;
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use serde::Serialize;

use coilopt::interface::{
    builtin_spaces, evaluate_request, EvaluateRequest, FieldError, ServiceError, SpaceInfo, VERSION,
};
use coilopt::mfbo::DesignSpace;
use coilopt::rtd::DEFAULT_ALPHA;
use coilopt::surrogate::SurrogateEvaluator;

pub struct ServiceState {
    pub spaces: Vec<(String, DesignSpace)>,
    pub evaluator: SurrogateEvaluator,
    /// Used when a request carries no seed.
    pub seed: u64,
    pub alpha: f64,
}

impl ServiceState {
    pub fn new(seed: u64) -> Self {
        Self {
            spaces: builtin_spaces(),
            evaluator: SurrogateEvaluator::default(),
            seed,
            alpha: DEFAULT_ALPHA,
        }
    }
}

fn json<T: Serialize>(status: StatusCode, value: &T) -> Response {
    let body = serde_json::to_vec(value).expect("response bodies serialise");
    (status, [(header::CONTENT_TYPE, "application/json")], body).into_response()
}

fn error(err: ServiceError) -> Response {
    let status = StatusCode::from_u16(err.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
    json(status, &err.body)
}

async fn spaces(State(state): State<Arc<ServiceState>>) -> Response {
    let list: Vec<SpaceInfo> = state.spaces.iter().map(|(id, s)| SpaceInfo::new(id, s)).collect();
    json(StatusCode::OK, &list)
}

async fn health() -> Response {
    json(StatusCode::OK, &serde_json::json!({ "status": "ok", "version": VERSION }))
}

fn body_error(message: impl ToString) -> ServiceError {
    ServiceError::bad_request(vec![FieldError {
        field: "body".into(),
        message: message.to_string(),
    }])
}

/// Parses a request body, reporting the JSON path of the offending field.
/// A missing field is reported under its own name.
pub fn parse_request(body: &[u8]) -> Result<EvaluateRequest, ServiceError> {
    let value: serde_json::Value = serde_json::from_slice(body).map_err(body_error)?;
    if !value.is_object() {
        return Err(body_error("expected a JSON object"));
    }
    serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        let message = e.into_inner().to_string();
        let missing = message
            .strip_prefix("missing field `")
            .and_then(|rest| rest.split('`').next())
            .map(String::from);
        let field = match (missing, path.as_str()) {
            (Some(name), ".") => name,
            (Some(name), parent) => format!("{parent}.{name}"),
            (None, ".") => "body".into(),
            (None, _) => path,
        };
        ServiceError::bad_request(vec![FieldError { field, message }])
    })
}

async fn evaluate(State(state): State<Arc<ServiceState>>, body: Bytes) -> Response {
    let req = match parse_request(&body) {
        Ok(r) => r,
        Err(e) => return error(e),
    };
    let outcome = tokio::task::spawn_blocking(move || {
        evaluate_request(&state.evaluator, &state.spaces, &req, state.seed, state.alpha)
    })
    .await;
    match outcome {
        Ok(Ok(resp)) => json(StatusCode::OK, &resp),
        Ok(Err(e)) => error(e),
        Err(join) => json(
            StatusCode::INTERNAL_SERVER_ERROR,
            &serde_json::json!({ "error": "solver-failure", "message": join.to_string() }),
        ),
    }
}

pub fn router(state: Arc<ServiceState>) -> Router {
    Router::new()
        .route("/v1/spaces", get(spaces))
        .route("/v1/health", get(health))
        .route("/v1/evaluate", post(evaluate))
        .with_state(state)
}

/// Serves until the listener fails.
pub async fn serve(listener: tokio::net::TcpListener, state: Arc<ServiceState>) -> std::io::Result<()> {
    axum::serve(listener, router(state)).await
}
