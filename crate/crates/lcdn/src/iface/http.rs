//! The flow-dispatcher HTTP service. All admissions funnel through one
//! mutex, so requests are embedded strictly one by one regardless of
//! connection concurrency.

use std::net::SocketAddr;
use std::sync::{Arc, Mutex};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{delete, get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::admission::{AdmissionError, ControllerConfig, NetworkState};
use crate::devicemodel::ProfileRegistry;
use crate::sim::{self, Scenario};
use crate::topology::{ingest_lldp, NeighborReport};

use super::config_records::emit_config;
use super::snapshot::snapshot_state;
use super::wire::{EmbedResultWire, FlowRequestWire};

/// Shared service state; `None` until a topology has been ingested.
#[derive(Clone, Default)]
pub struct AppState {
    inner: Arc<Mutex<Option<NetworkState>>>,
    config: Arc<ControllerConfig>,
}

impl AppState {
    pub fn empty(config: ControllerConfig) -> AppState {
        AppState {
            inner: Arc::new(Mutex::new(None)),
            config: Arc::new(config),
        }
    }

    pub fn with_state(state: NetworkState) -> AppState {
        let config = state.config().clone();
        AppState {
            inner: Arc::new(Mutex::new(Some(state))),
            config: Arc::new(config),
        }
    }
}

pub fn router(app: AppState) -> Router {
    Router::new()
        .route("/flows", post(post_flow).get(get_flows))
        .route("/flows/{id}", delete(delete_flow))
        .route("/topology", get(get_topology))
        .route("/state", get(get_state))
        .route("/configs", get(get_configs))
        .route("/lldp", post(post_lldp))
        .route("/simulate", post(post_simulate))
        .with_state(app)
}

/// Binds and serves until the process ends.
pub async fn serve(bind: SocketAddr, app: AppState) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(bind).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(app)).await
}

enum ApiError {
    Uninitialized,
    NotFound(String),
    Conflict(String),
    BadRequest(String),
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let (status, message) = match self {
            ApiError::Uninitialized => (
                StatusCode::SERVICE_UNAVAILABLE,
                "topology not ingested yet".to_string(),
            ),
            ApiError::NotFound(m) => (StatusCode::NOT_FOUND, m),
            ApiError::Conflict(m) => (StatusCode::CONFLICT, m),
            ApiError::BadRequest(m) => (StatusCode::BAD_REQUEST, m),
        };
        (status, Json(json!({ "error": message }))).into_response()
    }
}

fn admission_error_response(err: AdmissionError) -> ApiError {
    match err {
        AdmissionError::DuplicateFlowId(id) => {
            ApiError::Conflict(format!("flow id {id} already embedded"))
        }
        AdmissionError::UnknownFlow(id) => ApiError::NotFound(format!("unknown flow {id}")),
        other => ApiError::BadRequest(other.to_string()),
    }
}

async fn post_flow(
    State(app): State<AppState>,
    body: Result<Json<FlowRequestWire>, JsonRejection>,
) -> Result<Response, ApiError> {
    let Json(body) = body.map_err(|e| ApiError::BadRequest(e.body_text()))?;
    let mut guard = app.inner.lock().expect("service mutex");
    let state = guard.as_mut().ok_or(ApiError::Uninitialized)?;
    let fallback = format!("flow-{}", state.flows().len() + 1);
    let request = body.into_request(fallback);
    let flow_id = request.id.clone();
    let result = state.embed(request).map_err(admission_error_response)?;
    let wire = EmbedResultWire::from_result(&flow_id, &result);
    if result.accepted {
        Ok((StatusCode::CREATED, Json(wire)).into_response())
    } else {
        Ok((StatusCode::CONFLICT, Json(wire)).into_response())
    }
}

async fn get_flows(State(app): State<AppState>) -> Result<Response, ApiError> {
    let guard = app.inner.lock().expect("service mutex");
    let state = guard.as_ref().ok_or(ApiError::Uninitialized)?;
    let flows: Vec<serde_json::Value> = state
        .flows()
        .values()
        .map(|f| {
            json!({
                "id": f.request.id,
                "src": f.request.src,
                "dst": f.request.dst,
                "rate_bps": f.request.rate_bps,
                "burst_bytes": f.request.burst_bytes,
                "deadline_us": f.request.deadline_s * 1e6,
                "class_q": f.class_q,
                "vlan_id": f.vlan_id,
                "delay_bound_us": f.delay_bound_s * 1e6,
                "management": f.management,
                "path": f.path,
            })
        })
        .collect();
    Ok(Json(flows).into_response())
}

async fn delete_flow(
    State(app): State<AppState>,
    Path(id): Path<String>,
) -> Result<Response, ApiError> {
    let mut guard = app.inner.lock().expect("service mutex");
    let state = guard.as_mut().ok_or(ApiError::Uninitialized)?;
    state.remove(&id).map_err(admission_error_response)?;
    Ok(StatusCode::NO_CONTENT.into_response())
}

async fn get_topology(State(app): State<AppState>) -> Result<Response, ApiError> {
    let guard = app.inner.lock().expect("service mutex");
    let state = guard.as_ref().ok_or(ApiError::Uninitialized)?;
    Ok(Json(state.topology().clone()).into_response())
}

async fn get_state(State(app): State<AppState>) -> Result<Response, ApiError> {
    let guard = app.inner.lock().expect("service mutex");
    let state = guard.as_ref().ok_or(ApiError::Uninitialized)?;
    Ok(Json(snapshot_state(state)).into_response())
}

async fn get_configs(State(app): State<AppState>) -> Result<Response, ApiError> {
    let guard = app.inner.lock().expect("service mutex");
    let state = guard.as_ref().ok_or(ApiError::Uninitialized)?;
    let (switches, hosts) = emit_config(state);
    Ok(Json(json!({ "switches": switches, "hosts": hosts })).into_response())
}

#[derive(Debug, Deserialize)]
struct LldpBody {
    reports: Vec<NeighborReport>,
    #[serde(default)]
    default_profile: Option<String>,
}

#[derive(Debug, Serialize)]
struct LldpSummary {
    nodes: usize,
    links: usize,
    management_flows: usize,
}

async fn post_lldp(
    State(app): State<AppState>,
    body: Result<Json<LldpBody>, JsonRejection>,
) -> Result<Response, ApiError> {
    let Json(body) = body.map_err(|e| ApiError::BadRequest(e.body_text()))?;
    let config = (*app.config).clone();
    let profile = body
        .default_profile
        .unwrap_or_else(|| config.default_profile.clone());
    let topo =
        ingest_lldp(&body.reports, &profile).map_err(|e| ApiError::BadRequest(e.to_string()))?;
    let state = NetworkState::initialize(topo, ProfileRegistry::builtin(), config)
        .map_err(|e| ApiError::BadRequest(e.to_string()))?;
    let summary = LldpSummary {
        nodes: state.topology().nodes().count(),
        links: state.topology().links().len(),
        management_flows: state.flows().len(),
    };
    *app.inner.lock().expect("service mutex") = Some(state);
    Ok(Json(summary).into_response())
}

async fn post_simulate(
    State(app): State<AppState>,
    scenario: Result<Json<Scenario>, JsonRejection>,
) -> Result<Response, ApiError> {
    let Json(scenario) = scenario.map_err(|e| ApiError::BadRequest(e.body_text()))?;
    // Clone the state out so long simulations do not block admissions.
    let state = {
        let guard = app.inner.lock().expect("service mutex");
        guard.as_ref().ok_or(ApiError::Uninitialized)?.clone()
    };
    let report =
        sim::run(&state, &scenario).map_err(|e| ApiError::BadRequest(e.to_string()))?;
    Ok(Json(report).into_response())
}
