//! Local JSON API over a single project file.
//!
//! Reads are served from memory. Writes carry the revision they were based
//! on; a stale revision gets `409`. Accepted writes bump the revision and are
//! persisted before they become visible.

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use riskchain_core::ingest::{save_project, NamedProfileTable, SCHEMA_VERSION};
use riskchain_core::simengine::DEFAULT_TRIALS;
use riskchain_core::{
    build_report, evaluate_whatif, simulate, Error, PairSpec, Project, RiskResult, Scenario,
    SimulationConfig, Violation, WhatIfRequest, NOTIONAL_DISCLAIMER,
};

/// Requests above this many trials are rejected.
pub const MAX_TRIALS: usize = 1_000_000;

pub struct Store {
    pub project: Project,
    /// Where accepted writes go; `None` keeps everything in memory.
    pub path: Option<PathBuf>,
}

pub type AppState = Arc<RwLock<Store>>;

pub fn state(project: Project, path: Option<PathBuf>) -> AppState {
    Arc::new(RwLock::new(Store { project, path }))
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    kind: &'static str,
    message: String,
    path: Option<String>,
    violations: Vec<Violation>,
}

impl ApiError {
    fn new(status: StatusCode, kind: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            kind,
            message: message.into(),
            path: None,
            violations: Vec::new(),
        }
    }

    fn conflict(current: u64, sent: u64) -> Self {
        ApiError::new(
            StatusCode::CONFLICT,
            "conflict",
            format!("revision {sent} is stale; current revision is {current}"),
        )
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let message = e.to_string();
        match e {
            Error::NotFound(_) => ApiError::new(StatusCode::NOT_FOUND, "not_found", message),
            Error::Io(_) => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "io", message),
            Error::Invalid { path, message } => ApiError {
                path: Some(path),
                ..ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid", message)
            },
            Error::Violations(violations) => ApiError {
                violations,
                ..ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid", message)
            },
            _ => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "invalid", message),
        }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let mut body = json!({ "error": self.kind, "message": self.message });
        if let Some(path) = self.path {
            body["path"] = json!(path);
        }
        if !self.violations.is_empty() {
            body["violations"] = json!(self.violations);
        }
        (self.status, Json(body)).into_response()
    }
}

type ApiResult<T> = std::result::Result<Json<T>, ApiError>;

/// Parses a request body, reporting the JSON path of the first bad field.
fn parse_body<T: DeserializeOwned>(bytes: &[u8]) -> std::result::Result<T, ApiError> {
    let mut de = serde_json::Deserializer::from_slice(bytes);
    serde_path_to_error::deserialize(&mut de).map_err(|e| {
        let path = e.path().to_string();
        ApiError {
            path: Some(if path == "." { "$".into() } else { path }),
            ..ApiError::new(StatusCode::BAD_REQUEST, "bad_request", e.into_inner().to_string())
        }
    })
}

fn check_trials(n: usize) -> std::result::Result<(), ApiError> {
    if n > MAX_TRIALS {
        return Err(ApiError {
            path: Some("n_trials".into()),
            ..ApiError::new(
                StatusCode::UNPROCESSABLE_ENTITY,
                "invalid",
                format!("n_trials must be at most {MAX_TRIALS}"),
            )
        });
    }
    Ok(())
}

fn snapshot(state: &AppState) -> Project {
    state.read().expect("store lock poisoned").project.clone()
}

async fn blocking<T: Send + 'static>(
    f: impl FnOnce() -> riskchain_core::Result<T> + Send + 'static,
) -> std::result::Result<T, ApiError> {
    tokio::task::spawn_blocking(f)
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
        .map_err(ApiError::from)
}

/// Applies `edit` to a copy of the project if `revision` is current, then
/// validates, persists and publishes the copy.
fn commit(
    state: &AppState,
    revision: u64,
    edit: impl FnOnce(&mut Project) -> std::result::Result<(), ApiError>,
) -> std::result::Result<u64, ApiError> {
    let mut store = state.write().expect("store lock poisoned");
    if store.project.revision != revision {
        return Err(ApiError::conflict(store.project.revision, revision));
    }
    let mut next = store.project.clone();
    edit(&mut next)?;
    next.revision += 1;
    next.validate()?;
    if let Some(path) = &store.path {
        save_project(&next, path)?;
    }
    store.project = next;
    Ok(store.project.revision)
}

async fn health() -> Json<Value> {
    Json(json!({ "status": "ok", "schema_version": SCHEMA_VERSION }))
}

async fn get_project(State(state): State<AppState>) -> Json<Value> {
    let project = snapshot(&state);
    Json(json!({ "revision": project.revision, "project": project }))
}

#[derive(Serialize)]
struct PairView {
    revision: u64,
    pair: PairSpec,
    baseline: Scenario,
    ai: Scenario,
}

async fn list_pairs(State(state): State<AppState>) -> Json<Value> {
    let project = snapshot(&state);
    Json(json!({ "revision": project.revision, "pairs": project.pairs }))
}

async fn get_pair(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<PairView> {
    let project = snapshot(&state);
    let pair = project
        .pair(&id)
        .ok_or_else(|| Error::NotFound(format!("unknown pair id '{id}'")))?
        .clone();
    let lookup = |sid: &str| {
        project
            .scenario(sid)
            .cloned()
            .ok_or_else(|| Error::NotFound(format!("unknown scenario id '{sid}'")))
    };
    Ok(Json(PairView {
        revision: project.revision,
        baseline: lookup(&pair.baseline)?,
        ai: lookup(&pair.ai)?,
        pair,
    }))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PutPair {
    revision: u64,
    pair: PairSpec,
}

async fn put_pair(State(state): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Value> {
    let req: PutPair = parse_body(&body)?;
    if req.pair.id != id {
        return Err(Error::invalid("pair.id", format!("must equal the path id '{id}'")).into());
    }
    let revision = commit(&state, req.revision, |p| {
        match p.pairs.iter_mut().find(|x| x.id == id) {
            Some(slot) => *slot = req.pair,
            None => p.pairs.push(req.pair),
        }
        Ok(())
    })?;
    Ok(Json(json!({ "revision": revision })))
}

async fn get_scenario(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Value> {
    let project = snapshot(&state);
    let scenario = project
        .scenario(&id)
        .ok_or_else(|| Error::NotFound(format!("unknown scenario id '{id}'")))?;
    Ok(Json(json!({ "revision": project.revision, "scenario": scenario })))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PutScenario {
    revision: u64,
    scenario: Scenario,
}

async fn put_scenario(State(state): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Value> {
    let req: PutScenario = parse_body(&body)?;
    if req.scenario.id != id {
        return Err(Error::invalid("scenario.id", format!("must equal the path id '{id}'")).into());
    }
    let revision = commit(&state, req.revision, |p| {
        match p.scenarios.iter_mut().find(|x| x.id == id) {
            Some(slot) => *slot = req.scenario,
            None => p.scenarios.push(req.scenario),
        }
        Ok(())
    })?;
    Ok(Json(json!({ "revision": revision })))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulateRequest {
    scenario_id: String,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_trials")]
    n_trials: usize,
}

fn default_trials() -> usize {
    DEFAULT_TRIALS
}

async fn post_simulate(State(state): State<AppState>, body: Bytes) -> ApiResult<Value> {
    let req: SimulateRequest = parse_body(&body)?;
    check_trials(req.n_trials)?;
    let project = snapshot(&state);
    let value = blocking(move || {
        let config = SimulationConfig::new(req.n_trials, req.seed)
            .map_err(|e| Error::invalid("n_trials", e.to_string()))?;
        let scenario = project.resolve_scenario(&req.scenario_id)?;
        let trials = simulate(&scenario, &config)?;
        let mean = trials.mean_overall().clamp(0.0, 1.0);
        let risk = RiskResult::new(
            scenario.variant,
            riskchain_core::Probability::new(mean)?,
            &scenario.consequence,
        )?;
        Ok(json!({
            "disclaimer": NOTIONAL_DISCLAIMER,
            "scenario_id": scenario.id,
            "config": config,
            "risk": risk,
            "summary": trials.summary()?,
        }))
    })
    .await?;
    Ok(Json(value))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ReportRequest {
    pair_id: String,
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_trials")]
    n_trials: usize,
}

async fn post_report(State(state): State<AppState>, body: Bytes) -> ApiResult<Value> {
    let req: ReportRequest = parse_body(&body)?;
    check_trials(req.n_trials)?;
    let project = snapshot(&state);
    let bundle = blocking(move || {
        let config = SimulationConfig::new(req.n_trials, req.seed)
            .map_err(|e| Error::invalid("n_trials", e.to_string()))?;
        build_report(&project, &req.pair_id, &config)
    })
    .await?;
    Ok(Json(json!(bundle)))
}

async fn post_whatif(State(state): State<AppState>, body: Bytes) -> ApiResult<Value> {
    let req: WhatIfRequest = parse_body(&body)?;
    check_trials(req.n_trials)?;
    let project = snapshot(&state);
    let response = blocking(move || evaluate_whatif(&project, &req)).await?;
    Ok(Json(json!(response)))
}

async fn get_profile(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Value> {
    let project = snapshot(&state);
    let profile = project
        .profile(&id)
        .ok_or_else(|| Error::NotFound(format!("unknown profile id '{id}'")))?;
    Ok(Json(json!({ "revision": project.revision, "profile": profile })))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct PutProfile {
    revision: u64,
    profile: NamedProfileTable,
}

async fn put_profile(State(state): State<AppState>, Path(id): Path<String>, body: Bytes) -> ApiResult<Value> {
    let req: PutProfile = parse_body(&body)?;
    if req.profile.id != id {
        return Err(Error::invalid("profile.id", format!("must equal the path id '{id}'")).into());
    }
    let revision = commit(&state, req.revision, |p| {
        match p.profiles.iter_mut().find(|x| x.id == id) {
            Some(slot) => *slot = req.profile,
            None => p.profiles.push(req.profile),
        }
        Ok(())
    })?;
    Ok(Json(json!({ "revision": revision })))
}

async fn get_workflow(State(state): State<AppState>, Path(id): Path<String>) -> ApiResult<Value> {
    let project = snapshot(&state);
    let workflow = project
        .workflow(&id)
        .ok_or_else(|| Error::NotFound(format!("unknown workflow id '{id}'")))?;
    Ok(Json(json!({ "revision": project.revision, "workflow": workflow })))
}

async fn fallback() -> ApiError {
    ApiError::new(StatusCode::NOT_FOUND, "not_found", "no such route")
}

pub fn router(state: AppState) -> Router {
    let api = Router::new()
        .route("/health", get(health))
        .route("/project", get(get_project))
        .route("/pairs", get(list_pairs))
        .route("/pairs/{id}", get(get_pair).put(put_pair))
        .route("/scenarios/{id}", get(get_scenario).put(put_scenario))
        .route("/simulate", post(post_simulate))
        .route("/report", post(post_report))
        .route("/whatif", post(post_whatif))
        .route("/qualitative/{id}", get(get_profile).put(put_profile))
        .route("/workflows/{id}", get(get_workflow));
    Router::new().nest("/api", api).fallback(fallback).with_state(state)
}

/// Serves until Ctrl-C.
pub async fn serve(state: AppState, addr: SocketAddr) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
