/*
Copyright 2026 The softhand Authors

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
*/

//! HTTP service for interactive design sessions.
//!
//! Each session accepts one mutation or solve at a time; a second request
//! while one is running gets 409. Solves from different sessions run in
//! parallel up to the worker limit.

use std::collections::BTreeMap;
use std::path::PathBuf;
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use axum::body::Bytes;
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use chrono::Utc;
use serde::{Deserialize, Serialize};
use softhand::coupling::CouplingModel;
use softhand::grasp::GraspSolution;
use softhand::solver::{SolveOptions, SolveStatus};
use tokio::sync::Semaphore;

use crate::files::{TaskFile, VariantSpec};
use crate::pipeline::solve_spec;
use crate::scene::{build_scene, SceneDocument};
use crate::session::{DesignSession, SessionStore, SessionSummary};
use crate::{Diagnostic, StudioError};

#[derive(Debug, Clone)]
pub struct ServiceConfig {
    pub data_dir: PathBuf,
    /// Maximum number of solves running at once.
    pub workers: usize,
    /// Seed for solve requests that do not name one.
    pub default_seed: u64,
}

/// Error response: a status code and a [`Diagnostic`] body.
#[derive(Debug)]
pub struct ApiError {
    pub status: StatusCode,
    pub diagnostic: Diagnostic,
}

impl From<StudioError> for ApiError {
    fn from(e: StudioError) -> Self {
        let status = match &e {
            StudioError::Unknown { .. } => StatusCode::NOT_FOUND,
            StudioError::Duplicate { .. } => StatusCode::CONFLICT,
            StudioError::Io { .. } => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::BAD_REQUEST,
        };
        ApiError { status, diagnostic: e.diagnostic() }
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.diagnostic)).into_response()
    }
}

fn busy(id: &str) -> ApiError {
    ApiError {
        status: StatusCode::CONFLICT,
        diagnostic: Diagnostic {
            kind: "Busy".into(),
            message: format!("session {id} is being modified or solved"),
            paths: Vec::new(),
        },
    }
}

fn parse_body<T: serde::de::DeserializeOwned>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| StudioError::parse("request body", e).into())
}

struct Slot {
    busy: AtomicBool,
    session: Mutex<DesignSession>,
}

/// Clears the busy flag when dropped.
struct BusyGuard(Arc<Slot>);

impl Drop for BusyGuard {
    fn drop(&mut self) {
        self.0.busy.store(false, Ordering::Release);
    }
}

struct AppState {
    store: SessionStore,
    sessions: RwLock<BTreeMap<String, Arc<Slot>>>,
    workers: Arc<Semaphore>,
    default_seed: u64,
}

type Shared = Arc<AppState>;

impl AppState {
    fn slot(&self, id: &str) -> Result<Arc<Slot>, ApiError> {
        self.sessions
            .read()
            .expect("session map lock")
            .get(id)
            .cloned()
            .ok_or_else(|| StudioError::Unknown { what: "session", name: id.into() }.into())
    }

    /// Marks the session busy, or fails with 409 if it already is.
    fn claim(&self, id: &str) -> Result<BusyGuard, ApiError> {
        let slot = self.slot(id)?;
        if slot.busy.compare_exchange(false, true, Ordering::AcqRel, Ordering::Acquire).is_err() {
            return Err(busy(id));
        }
        Ok(BusyGuard(slot))
    }

    fn snapshot(&self, id: &str) -> Result<DesignSession, ApiError> {
        Ok(self.slot(id)?.session.lock().expect("session lock").clone())
    }

    /// Applies `f` to a copy of the session, persists it and only then makes
    /// it visible.
    fn mutate<T>(
        &self,
        guard: &BusyGuard,
        f: impl FnOnce(&mut DesignSession) -> Result<T, StudioError>,
    ) -> Result<T, ApiError> {
        let mut session = guard.0.session.lock().expect("session lock");
        let mut next = session.clone();
        let out = f(&mut next)?;
        self.store.save(&next)?;
        *session = next;
        Ok(out)
    }
}

/// Builds the router, loading any sessions already stored under the data
/// directory.
pub fn app(config: &ServiceConfig) -> Result<Router, StudioError> {
    let store = SessionStore::open(&config.data_dir)?;
    let sessions = store
        .load_all()?
        .into_iter()
        .map(|s| (s.id.clone(), Arc::new(Slot { busy: AtomicBool::new(false), session: Mutex::new(s) })))
        .collect();
    let state = Arc::new(AppState {
        store,
        sessions: RwLock::new(sessions),
        workers: Arc::new(Semaphore::new(config.workers.max(1))),
        default_seed: config.default_seed,
    });
    Ok(Router::new()
        .route("/api/designs", post(create_design).get(list_designs))
        .route("/api/designs/{id}", get(get_design))
        .route("/api/designs/{id}/status", get(design_status))
        .route("/api/designs/{id}/variants", post(add_variant))
        .route("/api/designs/{id}/tasks", post(add_task))
        .route("/api/designs/{id}/solve", post(solve))
        .route("/api/designs/{id}/report", get(report))
        .route("/api/designs/{id}/scenes/{solve_id}", get(scene))
        .with_state(state))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CreateDesign {
    #[serde(default)]
    pub name: Option<String>,
    pub urdf: String,
    #[serde(default)]
    pub coupling: Option<CouplingModel>,
    #[serde(default)]
    pub options: Option<SolveOptions>,
}

async fn create_design(State(state): State<Shared>, body: Bytes) -> Result<Response, ApiError> {
    let req: CreateDesign = parse_body(&body)?;
    let id = uuid::Uuid::new_v4().simple().to_string();
    let name = req.name.unwrap_or_else(|| id.clone());
    let session =
        DesignSession::new(id.clone(), name, req.urdf, req.coupling, req.options.unwrap_or_default(), Utc::now())?;
    state.store.save(&session)?;
    let body = Json(&session).into_response();
    let slot = Arc::new(Slot { busy: AtomicBool::new(false), session: Mutex::new(session) });
    state.sessions.write().expect("session map lock").insert(id, slot);
    Ok((StatusCode::CREATED, body).into_response())
}

async fn list_designs(State(state): State<Shared>) -> Json<Vec<SessionSummary>> {
    let slots: Vec<Arc<Slot>> = state.sessions.read().expect("session map lock").values().cloned().collect();
    let mut list: Vec<SessionSummary> =
        slots.iter().map(|s| s.session.lock().expect("session lock").summary()).collect();
    list.sort_by(|a, b| a.created.cmp(&b.created).then_with(|| a.id.cmp(&b.id)));
    Json(list)
}

async fn get_design(State(state): State<Shared>, Path(id): Path<String>) -> Result<Json<DesignSession>, ApiError> {
    Ok(Json(state.snapshot(&id)?))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SessionStatus {
    pub id: String,
    pub busy: bool,
    pub results: usize,
}

async fn design_status(State(state): State<Shared>, Path(id): Path<String>) -> Result<Json<SessionStatus>, ApiError> {
    let slot = state.slot(&id)?;
    let results = slot.session.lock().expect("session lock").results.len();
    Ok(Json(SessionStatus { id, busy: slot.busy.load(Ordering::Acquire), results }))
}

async fn add_variant(
    State(state): State<Shared>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<(StatusCode, Json<VariantSpec>), ApiError> {
    let guard = state.claim(&id)?;
    let spec: VariantSpec = parse_body(&body)?;
    let echo = spec.clone();
    state.mutate(&guard, |s| s.add_variant(spec, Utc::now()))?;
    Ok((StatusCode::CREATED, Json(echo)))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TaskCreated {
    pub name: String,
}

async fn add_task(
    State(state): State<Shared>,
    Path(id): Path<String>,
    body: Bytes,
) -> Result<(StatusCode, Json<TaskCreated>), ApiError> {
    let guard = state.claim(&id)?;
    let file: TaskFile = parse_body(&body)?;
    let spec = file.resolve(None)?;
    let name = spec.task.name.clone();
    state.mutate(&guard, |s| s.add_task(spec, Utc::now()))?;
    Ok((StatusCode::CREATED, Json(TaskCreated { name })))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveRequest {
    pub variant: String,
    pub task: String,
    #[serde(default)]
    pub seed: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveResponse {
    pub solve_id: String,
    pub solution: GraspSolution,
    pub scene: SceneDocument,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveFailure {
    pub kind: String,
    pub message: String,
    pub solve_id: String,
    pub solution: GraspSolution,
    pub scene: SceneDocument,
}

async fn solve(State(state): State<Shared>, Path(id): Path<String>, body: Bytes) -> Result<Response, ApiError> {
    let guard = state.claim(&id)?;
    let req: SolveRequest = parse_body(&body)?;
    let session = state.snapshot(&id)?;
    let model = session.variant_model(&req.variant)?;
    let spec = session.task(&req.task)?.clone();
    let coupling = session.coupling_for(&model)?;
    let mut options = session.options.clone();
    options.seed = req.seed.unwrap_or(state.default_seed);

    let _permit = state.workers.clone().acquire_owned().await.expect("semaphore is never closed");
    let variant = req.variant.clone();
    let (solution, scene) = tokio::task::spawn_blocking(move || {
        let solution = solve_spec(&model, &coupling, &spec, None, &options)?;
        let scene = build_scene(&model, &spec.task, &solution, &variant)?;
        Ok::<_, StudioError>((solution, scene))
    })
    .await
    .map_err(|e| StudioError::Invalid(format!("solver task failed: {e}")))??;

    let stored = solution.clone();
    let solve_id = state.mutate(&guard, |s| Ok(s.record(req.variant, req.task, stored, Utc::now())))?;
    if solution.status == SolveStatus::NumericalFailure {
        let failure = SolveFailure {
            kind: "NumericalFailure".into(),
            message: "the solver could not make progress".into(),
            solve_id,
            solution,
            scene,
        };
        return Ok((StatusCode::UNPROCESSABLE_ENTITY, Json(failure)).into_response());
    }
    Ok(Json(SolveResponse { solve_id, solution, scene }).into_response())
}

async fn report(
    State(state): State<Shared>,
    Path(id): Path<String>,
) -> Result<Json<crate::study::DesignReport>, ApiError> {
    Ok(Json(state.snapshot(&id)?.report()))
}

async fn scene(
    State(state): State<Shared>,
    Path((id, solve_id)): Path<(String, String)>,
) -> Result<Json<SceneDocument>, ApiError> {
    Ok(Json(state.snapshot(&id)?.scene(&solve_id)?))
}
