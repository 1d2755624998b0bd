//! Local HTTP service. Each run lives in `<runs_dir>/<id>/` and survives
//! restarts; `state.json` holds its phase and `result.json` the last
//! pipeline result.
//!
//! Routes:
//!   POST /runs                      {"csv": "..."} or {"path": "..."}, optional "config"
//!   GET  /runs/{id}                 phase, error, edges
//!   POST /runs/{id}/constraints     constraint set; reruns discovery
//!   GET  /runs/{id}/report?format=  md (default), json or csv; finalizes the run
//!   GET  /healthz

use crate::advisor::HttpAdvisor;
use crate::cli::now_utc;
use axum::extract::{Path as UrlPath, Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use causal_atlas::pipeline::{rerun_with_constraints, run_pipeline_with_progress, Phase, PipelineConfig, PipelineResult};
use causal_atlas::postprocess::ConstraintSet;
use causal_atlas::report::{pipeline_report, ReportFormat, ReportMeta};
use causal_atlas::selector::Advisor;
use causal_atlas::{Dataset, Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunState {
    pub id: String,
    pub phase: Phase,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub config: PipelineConfig,
    /// Constraint submissions so far.
    #[serde(default)]
    pub rounds: usize,
    pub created_at: String,
}

impl RunState {
    fn busy(&self) -> bool {
        !matches!(self.phase, Phase::AwaitingReview | Phase::Done | Phase::Failed)
    }
}

#[derive(Debug, Deserialize)]
pub struct CreateRun {
    #[serde(default)]
    pub csv: Option<String>,
    #[serde(default)]
    pub path: Option<PathBuf>,
    #[serde(default)]
    pub config: PipelineConfig,
}

#[derive(Debug, Serialize)]
pub struct RunView {
    #[serde(flatten)]
    pub state: RunState,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub result: Option<PipelineResult>,
}

#[derive(Debug, Deserialize)]
pub struct ReportQuery {
    #[serde(default)]
    pub format: Option<String>,
}

#[derive(Clone)]
pub struct AppState {
    root: PathBuf,
    advisor_endpoint: Option<String>,
    runs: Arc<Mutex<HashMap<String, RunState>>>,
}

fn write_json<T: Serialize>(path: &Path, v: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(v)?;
    s.push('\n');
    std::fs::write(path, s)?;
    Ok(())
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
}

impl AppState {
    /// Open `root`, reloading earlier runs. A run found mid-phase was cut
    /// off by a shutdown and is marked failed.
    pub fn open(root: PathBuf, advisor_endpoint: Option<String>) -> Result<Self> {
        std::fs::create_dir_all(&root)?;
        let mut runs = HashMap::new();
        for entry in std::fs::read_dir(&root)? {
            let dir = entry?.path();
            let Ok(mut st) = read_json::<RunState>(&dir.join("state.json")) else { continue };
            if st.busy() {
                st.phase = Phase::Failed;
                st.error = Some("interrupted by a service restart".into());
                write_json(&dir.join("state.json"), &st)?;
            }
            runs.insert(st.id.clone(), st);
        }
        log::info!("loaded {} runs from {}", runs.len(), root.display());
        Ok(AppState { root, advisor_endpoint, runs: Arc::new(Mutex::new(runs)) })
    }

    fn dir(&self, id: &str) -> PathBuf {
        self.root.join(id)
    }

    fn get(&self, id: &str) -> Option<RunState> {
        self.runs.lock().expect("run table").get(id).cloned()
    }

    fn put(&self, st: &RunState) {
        if let Err(e) = write_json(&self.dir(&st.id).join("state.json"), st) {
            log::error!("cannot persist state of run {}: {e}", st.id);
        }
        self.runs.lock().expect("run table").insert(st.id.clone(), st.clone());
    }

    fn set_phase(&self, id: &str, phase: Phase, error: Option<String>) {
        if let Some(mut st) = self.get(id) {
            st.phase = phase;
            st.error = error;
            self.put(&st);
        }
    }

    fn result(&self, id: &str) -> Option<PipelineResult> {
        read_json(&self.dir(id).join("result.json")).ok()
    }

    fn store_result(&self, id: &str, r: &PipelineResult) -> Result<()> {
        let dir = self.dir(id);
        write_json(&dir.join("profile.json"), &r.profile)?;
        write_json(&dir.join("trace.json"), &r.trace)?;
        write_json(&dir.join("graph.json"), &r.graph)?;
        write_json(&dir.join("confidence.json"), &r.confidence)?;
        write_json(&dir.join("result.json"), r)
    }

    /// Run `job` off the async executor and record its outcome.
    fn launch(&self, id: String, job: impl FnOnce(&dyn Fn(Phase), Option<&dyn Advisor>) -> Result<PipelineResult> + Send + 'static) {
        let app = self.clone();
        tokio::task::spawn_blocking(move || {
            let advisor = app.advisor_endpoint.as_deref().map(HttpAdvisor::new);
            let progress = |p: Phase| app.set_phase(&id, p, None);
            let outcome = job(&progress, advisor.as_ref().map(|a| a as &dyn Advisor)).and_then(|r| {
                app.store_result(&id, &r)?;
                Ok(r)
            });
            match outcome {
                Ok(r) => {
                    let phase = if r.uncertain.is_empty() { Phase::Done } else { Phase::AwaitingReview };
                    app.set_phase(&id, phase, None);
                }
                Err(e) => {
                    log::warn!("run {id} failed: {e}");
                    app.set_phase(&id, Phase::Failed, Some(e.to_string()));
                }
            }
        });
    }
}

pub struct ApiError(StatusCode, String);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.0, Json(serde_json::json!({ "error": self.1 }))).into_response()
    }
}

impl From<Error> for ApiError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Io(_) | Error::Serde(_) => StatusCode::INTERNAL_SERVER_ERROR,
            _ => StatusCode::BAD_REQUEST,
        };
        ApiError(code, e.to_string())
    }
}

fn not_found(id: &str) -> ApiError {
    ApiError(StatusCode::NOT_FOUND, format!("no run `{id}`"))
}

type ApiResult<T> = std::result::Result<T, ApiError>;

async fn create_run(State(app): State<AppState>, Json(req): Json<CreateRun>) -> ApiResult<(StatusCode, Json<RunState>)> {
    let csv = match (req.csv, req.path) {
        (Some(c), None) => c,
        (None, Some(p)) => std::fs::read_to_string(&p).map_err(|e| ApiError(StatusCode::BAD_REQUEST, format!("{}: {e}", p.display())))?,
        _ => return Err(ApiError(StatusCode::BAD_REQUEST, "give exactly one of `csv` and `path`".into())),
    };
    let data = Dataset::from_csv(&csv)?;
    req.config.constraints.resolve(&data.names())?;
    let id = uuid::Uuid::new_v4().simple().to_string();
    std::fs::create_dir_all(app.dir(&id)).map_err(Error::from)?;
    std::fs::write(app.dir(&id).join("dataset.csv"), data.to_csv()).map_err(Error::from)?;
    if !req.config.constraints.is_empty() {
        write_json(&app.dir(&id).join("constraints-0.json"), &req.config.constraints)?;
    }
    let st = RunState { id: id.clone(), phase: Phase::Pending, error: None, config: req.config, rounds: 0, created_at: now_utc() };
    app.put(&st);
    let cfg = st.config.clone();
    app.launch(id, move |progress, advisor| run_pipeline_with_progress(&data, &cfg, advisor, progress));
    Ok((StatusCode::ACCEPTED, Json(st)))
}

async fn get_run(State(app): State<AppState>, UrlPath(id): UrlPath<String>) -> ApiResult<Json<RunView>> {
    let state = app.get(&id).ok_or_else(|| not_found(&id))?;
    let result = if state.busy() { None } else { app.result(&id) };
    Ok(Json(RunView { state, result }))
}

async fn add_constraints(
    State(app): State<AppState>,
    UrlPath(id): UrlPath<String>,
    Json(extra): Json<ConstraintSet>,
) -> ApiResult<(StatusCode, Json<RunState>)> {
    let mut st = app.get(&id).ok_or_else(|| not_found(&id))?;
    if st.busy() {
        return Err(ApiError(StatusCode::CONFLICT, format!("run is {:?}; wait for it to finish", st.phase)));
    }
    let previous = app
        .result(&id)
        .ok_or_else(|| ApiError(StatusCode::CONFLICT, "run has no result to refine".into()))?;
    let data = Dataset::from_csv(&std::fs::read_to_string(app.dir(&id).join("dataset.csv")).map_err(Error::from)?)?;
    previous.constraints.union(&extra).resolve(&data.names())?;
    st.rounds += 1;
    write_json(&app.dir(&id).join(format!("constraints-{}.json", st.rounds)), &extra)?;
    st.phase = Phase::Pending;
    st.error = None;
    app.put(&st);
    let cfg = st.config.clone();
    app.launch(id, move |progress, _| rerun_with_constraints(&data, &previous, &cfg, &extra, progress));
    Ok((StatusCode::ACCEPTED, Json(st)))
}

async fn get_report(State(app): State<AppState>, UrlPath(id): UrlPath<String>, Query(q): Query<ReportQuery>) -> ApiResult<Response> {
    let format: ReportFormat = q.format.as_deref().unwrap_or("md").parse()?;
    let st = app.get(&id).ok_or_else(|| not_found(&id))?;
    match st.phase {
        Phase::AwaitingReview | Phase::Done => {}
        Phase::Failed => return Err(ApiError(StatusCode::CONFLICT, format!("run failed: {}", st.error.unwrap_or_default()))),
        p => return Err(ApiError(StatusCode::CONFLICT, format!("run is {p:?}; no report yet"))),
    }
    let result = app.result(&id).ok_or_else(|| ApiError(StatusCode::INTERNAL_SERVER_ERROR, "result missing".into()))?;
    let body = pipeline_report(&result, format, &ReportMeta::new(now_utc()))?;
    std::fs::write(app.dir(&id).join(format!("report.{}", format.extension())), &body).map_err(Error::from)?;
    if st.phase == Phase::AwaitingReview {
        app.set_phase(&id, Phase::Done, None);
    }
    let mime = match format {
        ReportFormat::Markdown => "text/markdown; charset=utf-8",
        ReportFormat::Json => "application/json",
        ReportFormat::Csv => "text/csv; charset=utf-8",
    };
    Ok(([(header::CONTENT_TYPE, mime)], body).into_response())
}

async fn healthz() -> &'static str {
    "ok"
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/healthz", get(healthz))
        .route("/runs", post(create_run))
        .route("/runs/{id}", get(get_run))
        .route("/runs/{id}/constraints", post(add_constraints))
        .route("/runs/{id}/report", get(get_report))
        .with_state(state)
}
