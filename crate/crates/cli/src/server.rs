//! HTTP front end for [`SessionManager`].
//!
//! | route | |
//! |---|---|
//! | `GET /scenarios` | bundled scenario files |
//! | `POST /sessions` | new session |
//! | `POST /sessions/{id}/turn` | one human turn and the assistant's reply |
//! | `GET /sessions/{id}/belief` | current belief event |
//! | `GET /sessions/{id}/events?from=k` | server-sent events from log index `k` |
//!
//! Event stream messages carry the log index as their SSE id, so a client
//! resumes with `from` or `Last-Event-ID`.

use axum::extract::{Path, Query, State};
use axum::http::{HeaderMap, StatusCode};
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use clips_core::assistance::{AssistConfig, AssistMode};
use clips_core::inference::Mode;
use clips_core::service::{ScenarioSource, ServiceError, SessionConfig, SessionManager, WireAction};
use clips_core::utterance::UtteranceScorer;
use futures::Stream;
use serde::Deserialize;
use serde_json::json;
use std::convert::Infallible;
use std::sync::Arc;
use std::time::Duration;
use tokio::sync::watch;

#[derive(Clone)]
pub struct AppState {
    pub sessions: Arc<SessionManager>,
    /// Bumped after every accepted turn; event streams wait on it.
    changed: watch::Sender<u64>,
}

impl AppState {
    pub fn new(scorer: Arc<dyn UtteranceScorer>) -> AppState {
        AppState {
            sessions: Arc::new(SessionManager::new(scorer)),
            changed: watch::channel(0).0,
        }
    }
}

pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/scenarios", get(scenarios))
        .route("/sessions", post(create))
        .route("/sessions/{id}/turn", post(turn))
        .route("/sessions/{id}/belief", get(belief))
        .route("/sessions/{id}/events", get(events))
        .with_state(state)
}

pub async fn serve(addr: std::net::SocketAddr, scorer: Arc<dyn UtteranceScorer>) -> anyhow::Result<()> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    tracing::info!("listening on http://{}", listener.local_addr()?);
    axum::serve(listener, router(AppState::new(scorer))).await?;
    Ok(())
}

struct ApiError(ServiceError);

impl IntoResponse for ApiError {
    fn into_response(self) -> Response {
        let status = StatusCode::from_u16(self.0.status()).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
        let mut body = json!({"error": self.0.to_string()});
        if let ServiceError::IllegalAction { legal, .. } = &self.0 {
            body["legal"] = json!(legal);
        }
        (status, Json(body)).into_response()
    }
}

impl From<ServiceError> for ApiError {
    fn from(e: ServiceError) -> Self {
        ApiError(e)
    }
}

type ApiResult<T> = Result<T, ApiError>;

fn bad_request(msg: impl Into<String>) -> ApiError {
    ApiError(ServiceError::BadRequest(msg.into()))
}

async fn scenarios(State(st): State<AppState>) -> Json<serde_json::Value> {
    let list: Vec<_> = st
        .sessions
        .scenario_names()
        .iter()
        .filter_map(|n| st.sessions.scenario(n))
        .map(|s| json!({"name": s.name, "scenario": s.to_file()}))
        .collect();
    Json(json!(list))
}

#[derive(Deserialize, Default)]
#[serde(deny_unknown_fields)]
struct CreateBody {
    /// Bundled scenario name.
    scenario: Option<String>,
    /// Scenario file contents.
    scenario_file: Option<serde_json::Value>,
    /// Inference mode name.
    mode: Option<String>,
    /// Assistance mode name.
    assist: Option<String>,
    seed: Option<u64>,
    planner_budget: Option<usize>,
}

async fn create(
    State(st): State<AppState>,
    body: Option<Json<CreateBody>>,
) -> ApiResult<(StatusCode, Json<serde_json::Value>)> {
    let Json(body) = body.ok_or_else(|| bad_request("expected a JSON body"))?;
    let source = match (body.scenario, body.scenario_file) {
        (Some(n), None) => ScenarioSource::Name(n),
        (None, Some(f)) => ScenarioSource::Inline(f),
        _ => return Err(bad_request("give exactly one of 'scenario' or 'scenario_file'")),
    };
    let mut assist = AssistConfig::default();
    if let Some(a) = body.assist {
        assist.mode = AssistMode::parse(&a).ok_or_else(|| bad_request(format!("unknown assistance mode '{a}'")))?;
    }
    if let Some(seed) = body.seed {
        assist.seed = seed;
    }
    if let Some(b) = body.planner_budget {
        assist.planner_budget = b;
    }
    let inference = match body.mode {
        Some(m) => Mode::parse(&m).ok_or_else(|| bad_request(format!("unknown inference mode '{m}'")))?,
        None => Mode::default(),
    };
    let sessions = st.sessions.clone();
    let summary = tokio::task::spawn_blocking(move || sessions.create(&source, SessionConfig { assist, inference }))
        .await
        .map_err(|e| ApiError(ServiceError::Engine(e.to_string())))??;
    Ok((StatusCode::CREATED, Json(json!(summary))))
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct TurnBody {
    action: String,
    #[serde(default)]
    args: Vec<String>,
    utterance: Option<String>,
    /// Step the client believes the human is acting at.
    t: Option<u32>,
}

async fn turn(
    State(st): State<AppState>,
    Path(id): Path<String>,
    body: Result<Json<TurnBody>, axum::extract::rejection::JsonRejection>,
) -> ApiResult<Json<serde_json::Value>> {
    let Json(body) = body.map_err(|e| bad_request(e.body_text()))?;
    let sessions = st.sessions.clone();
    let action = WireAction {
        action: body.action,
        args: body.args,
    };
    let result =
        tokio::task::spawn_blocking(move || sessions.post_human_turn(&id, &action, body.utterance.as_deref(), body.t))
            .await
            .map_err(|e| ApiError(ServiceError::Engine(e.to_string())))??;
    st.changed.send_modify(|v| *v += 1);
    Ok(Json(json!(result)))
}

async fn belief(State(st): State<AppState>, Path(id): Path<String>) -> ApiResult<Json<serde_json::Value>> {
    Ok(Json(json!(st.sessions.belief(&id)?.record())))
}

#[derive(Deserialize)]
struct EventsQuery {
    from: Option<usize>,
}

async fn events(
    State(st): State<AppState>,
    Path(id): Path<String>,
    Query(q): Query<EventsQuery>,
    headers: HeaderMap,
) -> ApiResult<Sse<impl Stream<Item = Result<Event, Infallible>>>> {
    // Fail fast on unknown sessions rather than opening an empty stream.
    st.sessions.get(&id)?;
    let resume = headers
        .get("last-event-id")
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.parse::<usize>().ok())
        .map(|i| i + 1);
    let from = q.from.or(resume).unwrap_or(0);
    let rx = st.changed.subscribe();
    let stream = futures::stream::unfold(
        (from, rx, st.sessions.clone(), id),
        |(mut next, mut rx, sessions, id)| async move {
            loop {
                rx.mark_unchanged();
                let batch = sessions.events_from(&id, next).ok()?;
                if !batch.is_empty() {
                    next += batch.len();
                    let items: Vec<Result<Event, Infallible>> = batch
                        .into_iter()
                        .map(|(i, e)| Ok(Event::default().id(i.to_string()).event("trace").data(e.to_json())))
                        .collect();
                    return Some((futures::stream::iter(items), (next, rx, sessions, id)));
                }
                rx.changed().await.ok()?;
            }
        },
    );
    Ok(Sse::new(futures::StreamExt::flatten(stream)).keep_alive(KeepAlive::new().interval(Duration::from_secs(15))))
}
