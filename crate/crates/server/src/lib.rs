//! HTTP service for PRIMMDebug.
//!
//! Sessions live in memory, one async mutex each, so requests for the same
//! session are serialised while different sessions proceed in parallel. In
//! research mode, sessions started with a participant id are written through
//! to one JSONL file each, and unfinished sessions are rebuilt from those
//! files on startup.

pub mod view;

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};
use std::time::{SystemTime, UNIX_EPOCH};

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path as UrlPath, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use primmdebug_core::challenge::IndexEntry;
use primmdebug_core::error::ChallengeError;
use primmdebug_core::prompts::ARTICULATION_RULE;
use primmdebug_core::replay::replay;
use primmdebug_core::runner::HarnessResult;
use primmdebug_core::session_log::{read_session_file, EventKind, SessionEvent, SessionWriter};
use primmdebug_core::stage::{advance, Transition};
use primmdebug_core::{
    Challenge, Config, Corpus, RunRequest, Runner, RunnerError, SessionState, Stage, TransitionError,
    TransitionEvent,
};
use serde::{Deserialize, Serialize};
use tokio::sync::Mutex;

use crate::view::{session_handle, HarnessView, RunOutcome, RunView, SessionHandle, SubmitOutcome};

/// Header carrying the optional research participant id.
pub const RESEARCH_ID_HEADER: &str = "x-research-id";

#[derive(Debug, Clone, Serialize)]
pub struct ApiError {
    #[serde(skip)]
    pub status: StatusCode,
    /// Machine-readable reason.
    pub error: &'static str,
    pub message: String,
    /// The articulation rule, on rejected responses.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub rule: Option<&'static str>,
}

impl ApiError {
    fn new(status: StatusCode, error: &'static str, message: impl Into<String>) -> Self {
        ApiError {
            status,
            error,
            message: message.into(),
            rule: None,
        }
    }

    fn internal(message: impl std::fmt::Display) -> Self {
        Self::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", message.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(&self)).into_response()
    }
}

impl From<TransitionError> for ApiError {
    fn from(e: TransitionError) -> Self {
        let status = match e {
            TransitionError::ArticulationRejected | TransitionError::OutOfRange { .. } => {
                StatusCode::UNPROCESSABLE_ENTITY
            }
            _ => StatusCode::CONFLICT,
        };
        let mut err = ApiError::new(status, e.code(), e.to_string());
        if e == TransitionError::ArticulationRejected {
            err.rule = Some(ARTICULATION_RULE);
        }
        err
    }
}

impl From<RunnerError> for ApiError {
    fn from(e: RunnerError) -> Self {
        match e {
            RunnerError::EmptyProgram => ApiError::new(StatusCode::UNPROCESSABLE_ENTITY, "empty_program", e.to_string()),
            _ => ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "runner_unavailable", e.to_string()),
        }
    }
}

impl From<JsonRejection> for ApiError {
    fn from(e: JsonRejection) -> Self {
        ApiError::new(StatusCode::BAD_REQUEST, "bad_request", e.body_text())
    }
}

#[derive(Debug, thiserror::Error)]
pub enum StartupError {
    #[error(transparent)]
    Challenges(#[from] ChallengeError),
    #[error(transparent)]
    Config(#[from] primmdebug_core::config::ConfigError),
    #[error("data directory {path}: {source}")]
    DataDir { path: PathBuf, source: std::io::Error },
}

fn now_ms() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_millis() as u64)
        .unwrap_or(0)
}

struct LiveSession {
    id: String,
    participant_id: Option<String>,
    challenge: Arc<Challenge>,
    state: SessionState,
    writer: Option<SessionWriter>,
    last_ms: u64,
}

impl LiveSession {
    fn handle(&self) -> SessionHandle {
        session_handle(&self.id, &self.state, &self.challenge, self.writer.is_some())
    }

    /// Logs the transition's events, then adopts its state. A failed write
    /// leaves the session where it was.
    fn commit(&mut self, t: Transition) -> Result<(), ApiError> {
        let ts_ms = now_ms().max(self.last_ms);
        if let Some(w) = self.writer.as_mut() {
            for kind in &t.events {
                w.append(&SessionEvent {
                    session_id: self.id.clone(),
                    participant_id: self.participant_id.clone(),
                    challenge_id: self.challenge.id.clone(),
                    ts_ms,
                    kind: kind.clone(),
                })
                .map_err(ApiError::internal)?;
            }
        }
        self.last_ms = ts_ms;
        self.state = t.state;
        Ok(())
    }
}

struct Inner {
    corpus: Corpus,
    runner: Runner,
    data_dir: PathBuf,
    research_mode: bool,
    sessions: RwLock<HashMap<String, Arc<Mutex<LiveSession>>>>,
}

/// Shared service state. Cheap to clone.
#[derive(Clone)]
pub struct AppState {
    inner: Arc<Inner>,
}

#[derive(Debug, Clone, Default, Serialize)]
pub struct RecoveryReport {
    pub resumed: Vec<String>,
    /// Files that could not be resumed, with the reason.
    pub skipped: Vec<(PathBuf, String)>,
}

impl AppState {
    pub fn new(corpus: Corpus, runner: Runner, data_dir: impl Into<PathBuf>, research_mode: bool) -> Self {
        AppState {
            inner: Arc::new(Inner {
                corpus,
                runner,
                data_dir: data_dir.into(),
                research_mode,
                sessions: RwLock::new(HashMap::new()),
            }),
        }
    }

    pub fn from_config(cfg: &Config) -> Result<Self, StartupError> {
        let corpus = Corpus::load(&cfg.challenge_dir)?;
        let runner = Runner::new(cfg.runner_config()?);
        Ok(Self::new(corpus, runner, &cfg.data_dir, cfg.research_mode))
    }

    pub fn corpus(&self) -> &Corpus {
        &self.inner.corpus
    }

    pub fn data_dir(&self) -> &Path {
        &self.inner.data_dir
    }

    pub fn session_count(&self) -> usize {
        self.inner.sessions.read().expect("session map poisoned").len()
    }

    fn session(&self, id: &str) -> Result<Arc<Mutex<LiveSession>>, ApiError> {
        self.inner
            .sessions
            .read()
            .expect("session map poisoned")
            .get(id)
            .cloned()
            .ok_or_else(|| ApiError::new(StatusCode::NOT_FOUND, "unknown_session", format!("no session {id:?}")))
    }

    fn insert(&self, live: LiveSession) {
        self.inner
            .sessions
            .write()
            .expect("session map poisoned")
            .insert(live.id.clone(), Arc::new(Mutex::new(live)));
    }

    /// Rebuilds unfinished logged sessions by replaying their files through
    /// the stage machine. Finished sessions are left on disk only.
    pub fn recover(&self) -> Result<RecoveryReport, StartupError> {
        let mut report = RecoveryReport::default();
        let dir = &self.inner.data_dir;
        let entries = match std::fs::read_dir(dir) {
            Ok(entries) => entries,
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(report),
            Err(source) => {
                return Err(StartupError::DataDir {
                    path: dir.clone(),
                    source,
                })
            }
        };
        let mut paths: Vec<PathBuf> = entries
            .filter_map(|e| e.ok().map(|e| e.path()))
            .filter(|p| p.extension().is_some_and(|x| x == "jsonl"))
            .collect();
        paths.sort();
        for path in paths {
            match self.resume(&path) {
                Ok(Some(id)) => report.resumed.push(id),
                Ok(None) => {}
                Err(msg) => report.skipped.push((path, msg)),
            }
        }
        Ok(report)
    }

    fn resume(&self, path: &Path) -> Result<Option<String>, String> {
        let events = read_session_file(path).map_err(|e| e.to_string())?;
        let Some(first) = events.first() else {
            return Err("empty log".into());
        };
        if events.iter().any(|e| matches!(e.kind, EventKind::SessionEnded { .. })) {
            return Ok(None);
        }
        let challenge = self
            .inner
            .corpus
            .get(&first.challenge_id)
            .ok_or_else(|| format!("unknown challenge {}", first.challenge_id))?;
        let r = replay(&events, challenge).map_err(|e| e.to_string())?;
        let writer = SessionWriter::open(path).map_err(|e| e.to_string())?;
        let id = first.session_id.clone();
        self.insert(LiveSession {
            id: id.clone(),
            participant_id: first.participant_id.clone(),
            challenge: Arc::new(challenge.clone()),
            state: r.state,
            writer: Some(writer),
            last_ms: events.last().map_or(0, |e| e.ts_ms),
        });
        Ok(Some(id))
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/api/challenges", get(list_challenges))
        .route("/api/sessions", post(start_session))
        .route("/api/sessions/{id}", get(get_session))
        .route("/api/sessions/{id}/events", post(submit_event))
        .route("/api/sessions/{id}/run", post(run_program))
        .with_state(state)
}

/// Binds and serves until the process is stopped.
pub async fn serve(cfg: &Config) -> Result<(), Box<dyn std::error::Error>> {
    let state = AppState::from_config(cfg)?;
    for w in &state.corpus().warnings {
        eprintln!("warning: {}: {}", w.path.display(), w.message);
    }
    if cfg.research_mode {
        let report = state.recover()?;
        for (path, why) in &report.skipped {
            eprintln!("warning: not resuming {}: {why}", path.display());
        }
        if !report.resumed.is_empty() {
            eprintln!("resumed {} session(s)", report.resumed.len());
        }
    }
    let listener = tokio::net::TcpListener::bind((cfg.bind.as_str(), cfg.port)).await?;
    eprintln!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(state)).await?;
    Ok(())
}

async fn list_challenges(State(state): State<AppState>) -> Json<Vec<IndexEntry>> {
    Json(state.corpus().index().entries)
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StartRequest {
    pub challenge_id: String,
    pub participant_id: Option<String>,
}

async fn start_session(
    State(state): State<AppState>,
    headers: HeaderMap,
    body: Result<Json<StartRequest>, JsonRejection>,
) -> Result<(StatusCode, Json<SessionHandle>), ApiError> {
    let Json(req) = body?;
    let challenge = state.corpus().get(&req.challenge_id).ok_or_else(|| {
        ApiError::new(
            StatusCode::NOT_FOUND,
            "unknown_challenge",
            format!("no challenge {:?}", req.challenge_id),
        )
    })?;
    let participant_id = req
        .participant_id
        .or_else(|| {
            headers
                .get(RESEARCH_ID_HEADER)
                .and_then(|v| v.to_str().ok())
                .map(str::to_string)
        })
        .filter(|p| !p.trim().is_empty());

    let id = uuid::Uuid::new_v4().simple().to_string();
    let opening = SessionState::start(challenge);
    let ts_ms = now_ms();
    let writer = match (&participant_id, state.inner.research_mode) {
        (Some(pid), true) => {
            let event = |kind: &EventKind| SessionEvent {
                session_id: id.clone(),
                participant_id: Some(pid.clone()),
                challenge_id: challenge.id.clone(),
                ts_ms,
                kind: kind.clone(),
            };
            let mut w = SessionWriter::create(state.data_dir(), &event(&opening.events[0])).map_err(ApiError::internal)?;
            for kind in &opening.events[1..] {
                w.append(&event(kind)).map_err(ApiError::internal)?;
            }
            Some(w)
        }
        _ => None,
    };
    let live = LiveSession {
        id: id.clone(),
        participant_id,
        challenge: Arc::new(challenge.clone()),
        state: opening.state,
        writer,
        last_ms: ts_ms,
    };
    let handle = live.handle();
    state.insert(live);
    Ok((StatusCode::CREATED, Json(handle)))
}

async fn get_session(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<Json<SessionHandle>, ApiError> {
    let live = state.session(&id)?;
    let live = live.lock().await;
    Ok(Json(live.handle()))
}

async fn submit_event(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    body: Result<Json<TransitionEvent>, JsonRejection>,
) -> Result<Json<SubmitOutcome>, ApiError> {
    let Json(event) = body?;
    if matches!(event, TransitionEvent::RunCompleted { .. }) {
        return Err(ApiError::new(
            StatusCode::BAD_REQUEST,
            "use_run_endpoint",
            "programs are run through POST /api/sessions/{id}/run",
        ));
    }
    let live = state.session(&id)?;
    let mut live = live.lock().await;
    let t = advance(&live.state, &event, &live.challenge)?;
    let hint_revealed = t.state.hints_shown > live.state.hints_shown;
    let line_correct = t.events.iter().find_map(|e| match e {
        EventKind::LineSelected { correct, .. } => Some(*correct),
        _ => None,
    });
    live.commit(t)?;
    let new_hint = hint_revealed
        .then(|| live.state.visible_hints(&live.challenge).last().map(|h| h.to_string()))
        .flatten();
    Ok(Json(SubmitOutcome {
        session: live.handle(),
        new_hint,
        line_correct,
    }))
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunBody {
    #[serde(default)]
    pub stdin_lines: Vec<String>,
}

async fn run_program(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    body: Option<Json<RunBody>>,
) -> Result<Json<RunOutcome>, ApiError> {
    let body = body.map(|Json(b)| b).unwrap_or_default();
    let live = state.session(&id)?;
    let mut live = live.lock().await;
    advance(&live.state, &TransitionEvent::RunRequested, &live.challenge)?;

    let challenge = Arc::clone(&live.challenge);
    let stage = live.state.stage;
    // The Run stage always uses the current test case.
    let stdin_lines = match challenge.test_cases.get(live.state.test_case_cursor) {
        Some(case) if stage == Stage::Run => case.inputs.clone(),
        _ => body.stdin_lines,
    };
    let request = RunRequest::new(live.state.working_program.clone(), stdin_lines);
    let runner = state.inner.runner.clone();
    let with_harness = stage == Stage::Test && !challenge.test_cases.is_empty();
    let job = {
        let request = request.clone();
        let challenge = Arc::clone(&challenge);
        move || -> Result<_, RunnerError> {
            let result = runner.run(&request)?;
            let harness: Option<HarnessResult> = if with_harness {
                Some(runner.evaluate_harness(&request.program, &challenge.test_cases)?)
            } else {
                None
            };
            Ok((result, harness))
        }
    };
    let (result, harness) = tokio::task::spawn_blocking(job).await.map_err(ApiError::internal)??;

    let t = advance(
        &live.state,
        &TransitionEvent::RunCompleted {
            snapshot: result.snapshot(&request),
            harness_passed: harness.as_ref().map(|h| h.all_passed),
        },
        &challenge,
    )?;
    live.commit(t)?;
    Ok(Json(RunOutcome {
        run: RunView::new(request.stdin_lines, result),
        harness: harness.map(HarnessView::from),
        session: live.handle(),
    }))
}

