//! HTTP API over a [`Store`]. Bodies are canonical JSON; errors use the
//! [`ApiError`] envelope.

use std::collections::{HashMap, VecDeque};
use std::convert::Infallible;
use std::sync::Arc;

use axum::body::Bytes;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::sse::{Event as SseEvent, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::Router;
use futures::stream::{self, Stream};
use psm_core::canonical;
use psm_core::layout::{compute_layout, to_svg, LayoutConfig};
use psm_core::session::{Event, EventKind};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use tokio::sync::broadcast::error::RecvError;
use tokio::sync::broadcast::Receiver;

use crate::analysis::{self, Analysis, Inputs, Params};
use crate::error::ApiError;
use crate::store::{LiveSession, Store};

/// Largest page served by `GET /sessions/{id}/events`.
pub const MAX_PAGE: usize = 500;

pub type AppState = Arc<Store>;

pub fn router(store: Arc<Store>) -> Router {
    Router::new()
        .route("/sessions", post(create_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/events", post(post_event).get(list_events))
        .route("/sessions/{id}/stream", get(stream_events))
        .route("/sessions/{id}/analysis/{kind}", get(get_analysis))
        .route("/sessions/{id}/layout", get(get_layout))
        .route("/sessions/{id}/layout.svg", get(get_layout_svg))
        .with_state(store)
}

pub fn canonical_response<T: Serialize>(status: StatusCode, body: &T) -> Response {
    match canonical::to_string(body) {
        Ok(text) => (status, [(header::CONTENT_TYPE, "application/json")], text).into_response(),
        Err(e) => (StatusCode::INTERNAL_SERVER_ERROR, e.to_string()).into_response(),
    }
}

fn parse_body<T: for<'de> Deserialize<'de>>(body: &Bytes) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::malformed(format!("request body: {e}")))
}

#[derive(Debug, Default, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct CreateRequest {
    id: Option<String>,
}

async fn create_session(State(store): State<AppState>, body: Bytes) -> Result<Response, ApiError> {
    let request: CreateRequest = if body.iter().all(u8::is_ascii_whitespace) { CreateRequest::default() } else { parse_body(&body)? };
    let live = store.create(request.id.as_deref())?;
    Ok(canonical_response(StatusCode::CREATED, &live.current().snapshot()))
}

async fn get_session(State(store): State<AppState>, Path(id): Path<String>) -> Result<Response, ApiError> {
    let session = store.get(&id)?.current();
    Ok(canonical_response(StatusCode::OK, &session.snapshot()))
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct EventRequest {
    kind: String,
    actor: String,
    #[serde(default)]
    payload: Value,
}

async fn post_event(State(store): State<AppState>, Path(id): Path<String>, body: Bytes) -> Result<Response, ApiError> {
    let live = store.get(&id)?;
    let request: EventRequest = parse_body(&body)?;
    let kind: EventKind = serde_json::from_value(Value::String(request.kind.clone()))
        .map_err(|_| ApiError::malformed(format!("unknown event kind `{}`", request.kind)))?;
    let (event, warnings) = live.submit(&request.actor, kind, &request.payload).await?;
    let phase = live.current().phase();
    Ok(canonical_response(StatusCode::CREATED, &json!({ "event": *event, "phase": phase, "warnings": warnings })))
}

fn parse_number<T: std::str::FromStr>(query: &HashMap<String, String>, key: &str) -> Result<Option<T>, ApiError> {
    query
        .get(key)
        .map(|raw| raw.parse().map_err(|_| ApiError::malformed(format!("query parameter `{key}` = `{raw}` is not valid"))))
        .transpose()
}

async fn list_events(
    State(store): State<AppState>,
    Path(id): Path<String>,
    Query(query): Query<HashMap<String, String>>,
) -> Result<Response, ApiError> {
    let session = store.get(&id)?.current();
    let from: u64 = parse_number(&query, "from")?.unwrap_or(1).max(1);
    let limit: usize = parse_number(&query, "limit")?.unwrap_or(MAX_PAGE).clamp(1, MAX_PAGE);
    let log = session.log();
    let start = usize::try_from(from - 1).unwrap_or(usize::MAX).min(log.len());
    let page = &log[start..(start + limit).min(log.len())];
    let next_from = page.last().map_or(from, |e| e.seq + 1);
    Ok(canonical_response(
        StatusCode::OK,
        &json!({ "events": page, "nextFrom": next_from, "headSeq": session.head_seq() }),
    ))
}

/// First seq a stream should deliver: one past `Last-Event-ID` when the
/// client is reconnecting, else `from`, else 1.
fn stream_start(headers: &HeaderMap, query: &HashMap<String, String>) -> Result<u64, ApiError> {
    if let Some(raw) = headers.get("last-event-id") {
        let text = raw.to_str().map_err(|_| ApiError::malformed("Last-Event-ID is not text"))?;
        let last: u64 = text.trim().parse().map_err(|_| ApiError::malformed(format!("Last-Event-ID `{text}` is not a seq")))?;
        return Ok(last + 1);
    }
    Ok(parse_number(query, "from")?.unwrap_or(1).max(1))
}

struct Cursor {
    live: Arc<LiveSession>,
    rx: Receiver<Arc<Event>>,
    pending: VecDeque<Arc<Event>>,
    next: u64,
}

impl Cursor {
    fn refill(&mut self) {
        let session = self.live.current();
        let start = usize::try_from(self.next - 1).unwrap_or(usize::MAX).min(session.log().len());
        self.pending.extend(session.log()[start..].iter().cloned().map(Arc::new));
    }

    /// Next event in seq order, without gaps or repeats.
    async fn next_event(&mut self) -> Option<Arc<Event>> {
        loop {
            if let Some(event) = self.pending.pop_front() {
                if event.seq < self.next {
                    continue;
                }
                self.next = event.seq + 1;
                return Some(event);
            }
            match self.rx.recv().await {
                Ok(event) if event.seq < self.next => continue,
                Ok(event) if event.seq == self.next => self.pending.push_back(event),
                // Missed something (lag, or a send that raced the subscription).
                Ok(_) | Err(RecvError::Lagged(_)) => self.refill(),
                Err(RecvError::Closed) => return None,
            }
        }
    }
}

/// Server-sent events, one canonical event per message with `id` = seq.
pub fn event_stream(live: Arc<LiveSession>, from: u64) -> impl Stream<Item = Result<SseEvent, Infallible>> {
    // Subscribe before reading the backlog so nothing falls in between.
    let rx = live.subscribe();
    let mut cursor = Cursor { live, rx, pending: VecDeque::new(), next: from };
    cursor.refill();
    stream::unfold(cursor, |mut cursor| async move {
        let event = cursor.next_event().await?;
        let message = SseEvent::default().id(event.seq.to_string()).event("event").data(event.to_canonical());
        Some((Ok(message), cursor))
    })
}

async fn stream_events(
    State(store): State<AppState>,
    Path(id): Path<String>,
    headers: HeaderMap,
    Query(query): Query<HashMap<String, String>>,
) -> Result<Response, ApiError> {
    let live = store.get(&id)?;
    let from = stream_start(&headers, &query)?;
    Ok(Sse::new(event_stream(live, from)).keep_alive(KeepAlive::default()).into_response())
}

fn analysis_params(query: &HashMap<String, String>) -> Result<Params, ApiError> {
    let defaults = Params::default();
    let measure = match query.get("measure") {
        Some(raw) => raw.parse().map_err(|e: String| ApiError::malformed(e))?,
        None => defaults.measure,
    };
    Ok(Params {
        epsilon: parse_number(query, "epsilon")?.unwrap_or(defaults.epsilon),
        measure,
        h_crit: parse_number(query, "hCrit")?.unwrap_or(defaults.h_crit),
    })
}

async fn get_analysis(
    State(store): State<AppState>,
    Path((id, kind)): Path<(String, String)>,
    Query(query): Query<HashMap<String, String>>,
) -> Result<Response, ApiError> {
    let kind: Analysis = kind.parse()?;
    let session = store.get(&id)?.current();
    let params = analysis_params(&query)?;
    let document = analysis::document(kind, Inputs::of_session(&session), &params)?;
    Ok(canonical_response(StatusCode::OK, &document))
}

fn layout_config(query: &HashMap<String, String>) -> Result<LayoutConfig, ApiError> {
    let d = LayoutConfig::default();
    LayoutConfig::new(
        parse_number(query, "goalRadius")?.unwrap_or(d.goal_radius),
        parse_number(query, "ringThickness")?.unwrap_or(d.ring_thickness),
        parse_number(query, "startAngleDeg")?.unwrap_or(d.start_angle_deg),
    )
    .map_err(|e| ApiError::malformed(e.to_string()))
}

async fn get_layout(
    State(store): State<AppState>,
    Path(id): Path<String>,
    Query(query): Query<HashMap<String, String>>,
) -> Result<Response, ApiError> {
    let session = store.get(&id)?.current();
    let config = layout_config(&query)?;
    let sectors = compute_layout(session.model(), &config);
    Ok(canonical_response(StatusCode::OK, &json!({ "config": config, "sectors": sectors })))
}

async fn get_layout_svg(
    State(store): State<AppState>,
    Path(id): Path<String>,
    Query(query): Query<HashMap<String, String>>,
) -> Result<Response, ApiError> {
    let session = store.get(&id)?.current();
    let config = layout_config(&query)?;
    let svg = to_svg(&compute_layout(session.model(), &config), &config);
    let disposition = format!("inline; filename=\"{}.svg\"", session.id());
    Ok((
        StatusCode::OK,
        [(header::CONTENT_TYPE, "image/svg+xml".to_string()), (header::CONTENT_DISPOSITION, disposition)],
        svg,
    )
        .into_response())
}

/// Binds and serves until Ctrl-C.
pub async fn serve(store: Arc<Store>, bind: &str) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(bind).await?;
    eprintln!("psm: serving {} on http://{}", store.dir().display(), listener.local_addr()?);
    axum::serve(listener, router(store))
        .with_graceful_shutdown(async {
            let _ = tokio::signal::ctrl_c().await;
        })
        .await
}
