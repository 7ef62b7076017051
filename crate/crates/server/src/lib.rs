//! HTTP service hosting human-tutored solving sessions.
//!
//! | Method | Path | Body / query |
//! |---|---|---|
//! | POST | `/sessions` | `{"problem_id", "model_name", "participant"}` |
//! | GET | `/sessions/{id}` | |
//! | POST | `/sessions/{id}/hints` | `{"text"}` |
//! | POST | `/sessions/{id}/generations` | |
//! | POST | `/sessions/{id}/abandon` | |
//! | GET | `/sessions/{id}/events` | `?since=N&timeout_ms=T` (long-poll) |
//! | GET | `/problems` | |
//! | GET | `/problems/{id}` | statement and samples only |
//! | GET | `/stats/solve-rate` | `?model=&participant=&problem=` |
//!
//! Errors are `{"code", "message"}` with a matching HTTP status. When a
//! token is configured every request needs `Authorization: Bearer <token>`.

pub mod session;
pub mod store;

use std::collections::BTreeMap;
use std::sync::Arc;
use std::time::Duration;

use axum::extract::{Path, Query, Request, State};
use axum::http::{header, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use cpbench::agent::Sampling;
use cpbench::corpus::{Corpus, Limits};
use cpbench::experiments::ModelRegistry;
use cpbench::judge::Judge;
use serde::{Deserialize, Serialize};
use tokio::sync::{watch, Mutex, RwLock};

pub use session::{
    solve_rate, Event, EventKind, Generation, ModelSolveRate, Session, SessionError, SessionFilter, SessionStatus,
    MAX_GENERATIONS,
};
pub use store::SessionStore;

/// Longest a long-poll request waits for new events.
pub const MAX_POLL_MS: u64 = 60_000;
const DEFAULT_POLL_MS: u64 = 25_000;

struct Slot {
    session: Mutex<Session>,
    /// Transcript length, bumped after every append.
    events: watch::Sender<usize>,
}

pub struct AppState {
    corpus: Arc<Corpus>,
    judge: Arc<Judge>,
    models: ModelRegistry,
    sampling: BTreeMap<String, Sampling>,
    store: SessionStore,
    token: Option<String>,
    sessions: RwLock<BTreeMap<String, Arc<Slot>>>,
}

impl AppState {
    /// Loads any sessions already in `store`.
    pub fn new(corpus: Corpus, judge: Judge, models: ModelRegistry, store: SessionStore) -> std::io::Result<Self> {
        let sessions = store
            .load_all()?
            .into_iter()
            .map(|s| {
                let (events, _) = watch::channel(s.transcript.len());
                (
                    s.session_id.clone(),
                    Arc::new(Slot {
                        session: Mutex::new(s),
                        events,
                    }),
                )
            })
            .collect();
        Ok(Self {
            corpus: Arc::new(corpus),
            judge: Arc::new(judge),
            models,
            sampling: BTreeMap::new(),
            store,
            token: None,
            sessions: RwLock::new(sessions),
        })
    }

    /// Requires `Authorization: Bearer <token>` on every request.
    pub fn with_token(mut self, token: Option<String>) -> Self {
        self.token = token.filter(|t| !t.is_empty());
        self
    }

    pub fn with_sampling(mut self, sampling: BTreeMap<String, Sampling>) -> Self {
        self.sampling = sampling;
        self
    }

    async fn slot(&self, id: &str) -> Result<Arc<Slot>, ApiError> {
        self.sessions
            .read()
            .await
            .get(id)
            .cloned()
            .ok_or_else(|| SessionError::UnknownSession(id.to_string()).into())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorBody {
    pub code: String,
    pub message: String,
}

#[derive(Debug)]
pub struct ApiError {
    status: StatusCode,
    body: ErrorBody,
}

impl ApiError {
    fn new(status: StatusCode, code: &str, message: impl Into<String>) -> Self {
        Self {
            status,
            body: ErrorBody {
                code: code.into(),
                message: message.into(),
            },
        }
    }
}

impl From<SessionError> for ApiError {
    fn from(e: SessionError) -> Self {
        let (status, code) = match &e {
            SessionError::UnknownProblem(_) => (StatusCode::NOT_FOUND, "unknown_problem"),
            SessionError::UnknownModel(_) => (StatusCode::NOT_FOUND, "unknown_model"),
            SessionError::UnknownSession(_) => (StatusCode::NOT_FOUND, "unknown_session"),
            SessionError::SessionClosed(_) => (StatusCode::CONFLICT, "session_closed"),
            SessionError::EmptyHint => (StatusCode::UNPROCESSABLE_ENTITY, "empty_hint"),
            SessionError::GenerationBudgetExhausted => (StatusCode::CONFLICT, "generation_budget_exhausted"),
            SessionError::Client(_) => (StatusCode::BAD_GATEWAY, "client_error"),
            SessionError::Judge(_) | SessionError::Store(_) => (StatusCode::INTERNAL_SERVER_ERROR, "internal"),
            SessionError::NoSessions => (StatusCode::NOT_FOUND, "no_sessions"),
        };
        Self::new(status, code, e.to_string())
    }
}

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        (self.status, Json(self.body)).into_response()
    }
}

type ApiResult<T> = Result<Json<T>, ApiError>;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CreateSession {
    pub problem_id: String,
    pub model_name: String,
    #[serde(default)]
    pub participant: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct HintBody {
    pub text: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenerationResponse {
    #[serde(flatten)]
    pub generation: Generation,
    pub session: Session,
}

#[derive(Debug, Clone, Default, Deserialize)]
pub struct EventsQuery {
    #[serde(default)]
    pub since: usize,
    pub timeout_ms: Option<u64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EventsResponse {
    pub events: Vec<Event>,
    /// Value of `since` for the next poll.
    pub next: usize,
    pub status: SessionStatus,
    pub generations_used: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Sample {
    pub input: String,
    pub output: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemView {
    pub problem_id: String,
    pub title: String,
    pub statement: String,
    pub limits: Limits,
    pub samples: Vec<Sample>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ProblemSummary {
    pub problem_id: String,
    pub title: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolveRateResponse {
    pub models: Vec<ModelSolveRate>,
}

async fn save(state: &AppState, session: &Session) -> Result<(), ApiError> {
    let store = state.store.clone();
    let snapshot = session.clone();
    tokio::task::spawn_blocking(move || store.save(&snapshot))
        .await
        .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?
        .map_err(|e| SessionError::Store(e).into())
}

async fn create_session(State(state): State<Arc<AppState>>, Json(body): Json<CreateSession>) -> ApiResult<Session> {
    if state.corpus.get(&body.problem_id).is_none() {
        return Err(SessionError::UnknownProblem(body.problem_id).into());
    }
    if !state.models.names().any(|m| m == body.model_name) {
        return Err(SessionError::UnknownModel(body.model_name).into());
    }
    let session = Session::new(
        uuid::Uuid::new_v4().to_string(),
        &body.problem_id,
        &body.model_name,
        &body.participant,
    );
    save(&state, &session).await?;
    let (events, _) = watch::channel(0);
    state.sessions.write().await.insert(
        session.session_id.clone(),
        Arc::new(Slot {
            session: Mutex::new(session.clone()),
            events,
        }),
    );
    log::info!("session {} opened on {}", session.session_id, session.problem_id);
    Ok(Json(session))
}

async fn get_session(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Session> {
    let slot = state.slot(&id).await?;
    let session = slot.session.lock().await.clone();
    Ok(Json(session))
}

async fn post_hint(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Json(body): Json<HintBody>,
) -> ApiResult<Session> {
    let slot = state.slot(&id).await?;
    let mut guard = slot.session.lock().await;
    let mut next = guard.clone();
    next.post_hint(&body.text)?;
    save(&state, &next).await?;
    *guard = next;
    slot.events.send_replace(guard.transcript.len());
    Ok(Json(guard.clone()))
}

async fn abandon(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<Session> {
    let slot = state.slot(&id).await?;
    let mut guard = slot.session.lock().await;
    let mut next = guard.clone();
    next.abandon()?;
    save(&state, &next).await?;
    *guard = next;
    slot.events.send_replace(guard.transcript.len());
    Ok(Json(guard.clone()))
}

async fn request_generation(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
) -> ApiResult<GenerationResponse> {
    let slot = state.slot(&id).await?;
    let mut guard = slot.session.lock().await;
    let mut next = guard.clone();
    let client = state
        .models
        .client(&next.model_name)
        .map_err(|_| SessionError::UnknownModel(next.model_name.clone()))?;
    let corpus = state.corpus.clone();
    let judge = state.judge.clone();
    let sampling = state.sampling.get(&next.model_name).cloned().unwrap_or_default();
    let (next, result) = tokio::task::spawn_blocking(move || {
        let result = match corpus.get(&next.problem_id) {
            Some(problem) => next.request_generation(problem, &*client, &judge, &sampling),
            None => Err(SessionError::UnknownProblem(next.problem_id.clone())),
        };
        (next, result)
    })
    .await
    .map_err(|e| ApiError::new(StatusCode::INTERNAL_SERVER_ERROR, "internal", e.to_string()))?;
    let generation = result?;
    save(&state, &next).await?;
    *guard = next;
    slot.events.send_replace(guard.transcript.len());
    Ok(Json(GenerationResponse {
        generation,
        session: guard.clone(),
    }))
}

async fn events(
    State(state): State<Arc<AppState>>,
    Path(id): Path<String>,
    Query(q): Query<EventsQuery>,
) -> ApiResult<EventsResponse> {
    let slot = state.slot(&id).await?;
    let mut rx = slot.events.subscribe();
    let wait = Duration::from_millis(q.timeout_ms.unwrap_or(DEFAULT_POLL_MS).min(MAX_POLL_MS));
    let open = |s: &Session| s.status == SessionStatus::Active;
    {
        let s = slot.session.lock().await;
        if s.transcript.len() <= q.since && open(&s) {
            drop(s);
            let _ = tokio::time::timeout(wait, rx.wait_for(|&n| n > q.since)).await;
        }
    }
    let s = slot.session.lock().await;
    let events = s.transcript.get(q.since..).map(<[Event]>::to_vec).unwrap_or_default();
    Ok(Json(EventsResponse {
        events,
        next: s.transcript.len(),
        status: s.status,
        generations_used: s.generations_used,
    }))
}

async fn list_problems(State(state): State<Arc<AppState>>) -> Json<Vec<ProblemSummary>> {
    Json(
        state
            .corpus
            .problems
            .iter()
            .map(|p| ProblemSummary {
                problem_id: p.problem_id.clone(),
                title: p.title.clone(),
            })
            .collect(),
    )
}

async fn get_problem(State(state): State<Arc<AppState>>, Path(id): Path<String>) -> ApiResult<ProblemView> {
    let p = state
        .corpus
        .get(&id)
        .ok_or_else(|| ApiError::from(SessionError::UnknownProblem(id.clone())))?;
    Ok(Json(ProblemView {
        problem_id: p.problem_id.clone(),
        title: p.title.clone(),
        statement: p.statement.clone(),
        limits: p.limits,
        samples: p
            .samples()
            .map(|t| Sample {
                input: String::from_utf8_lossy(&t.input).into_owned(),
                output: String::from_utf8_lossy(&t.expected_output).into_owned(),
            })
            .collect(),
    }))
}

async fn stats(State(state): State<Arc<AppState>>, Query(filter): Query<SessionFilter>) -> ApiResult<SolveRateResponse> {
    let slots: Vec<Arc<Slot>> = state.sessions.read().await.values().cloned().collect();
    let mut sessions = Vec::with_capacity(slots.len());
    for slot in slots {
        sessions.push(slot.session.lock().await.clone());
    }
    Ok(Json(SolveRateResponse {
        models: solve_rate(&sessions, &filter)?,
    }))
}

async fn require_token(State(state): State<Arc<AppState>>, req: Request, next: Next) -> Response {
    let Some(token) = &state.token else {
        return next.run(req).await;
    };
    let supplied = req
        .headers()
        .get(header::AUTHORIZATION)
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.strip_prefix("Bearer "));
    if supplied == Some(token.as_str()) {
        next.run(req).await
    } else {
        ApiError::new(StatusCode::UNAUTHORIZED, "unauthorized", "missing or wrong bearer token").into_response()
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/hints", post(post_hint))
        .route("/sessions/{id}/generations", post(request_generation))
        .route("/sessions/{id}/abandon", post(abandon))
        .route("/sessions/{id}/events", get(events))
        .route("/problems", get(list_problems))
        .route("/problems/{id}", get(get_problem))
        .route("/stats/solve-rate", get(stats))
        .layer(middleware::from_fn_with_state(state.clone(), require_token))
        .with_state(state)
}

/// Serves until the process is stopped.
pub async fn serve(listener: tokio::net::TcpListener, state: Arc<AppState>) -> std::io::Result<()> {
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, router(state)).await
}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/server.md")]
mod book_server {}
