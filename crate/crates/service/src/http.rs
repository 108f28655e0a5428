use std::collections::VecDeque;
use std::convert::Infallible;
use std::sync::Arc;
use std::time::Duration;

use axum::extract::rejection::JsonRejection;
use axum::extract::{Path, Query, State};
use axum::http::{header, HeaderMap, StatusCode};
use axum::response::sse::{Event as SseEvent, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures::Stream;
use serde::Deserialize;
use tokio::sync::watch;

use crate::api::{AbortRequest, CommitRequest, CreateRequest, RevealRequest, WARNING_HEADER};
use crate::error::ServiceError;
use crate::registry::{Registry, SessionCell};

pub const TRANSCRIPT_CONTENT_TYPE: &str = "application/x-ndjson";

pub fn router(registry: Arc<Registry>) -> Router {
    Router::new()
        .route("/v1/ceremonies", post(create))
        .route("/v1/ceremonies/{id}", get(state))
        .route("/v1/ceremonies/{id}/me", get(whoami))
        .route("/v1/ceremonies/{id}/commitments", post(commit))
        .route("/v1/ceremonies/{id}/reveals", post(reveal))
        .route("/v1/ceremonies/{id}/abort", post(abort))
        .route("/v1/ceremonies/{id}/transcript", get(transcript))
        .route("/v1/ceremonies/{id}/events", get(events))
        .with_state(registry)
}

fn bearer(headers: &HeaderMap) -> Option<&str> {
    headers
        .get(header::AUTHORIZATION)?
        .to_str()
        .ok()?
        .strip_prefix("Bearer ")
        .map(str::trim)
}

fn body<T>(payload: Result<Json<T>, JsonRejection>) -> Result<T, ServiceError> {
    payload
        .map(|Json(v)| v)
        .map_err(|e| ServiceError::BadRequest(e.body_text()))
}

type AppState = State<Arc<Registry>>;

async fn create(State(reg): AppState, payload: Result<Json<CreateRequest>, JsonRejection>) -> Response {
    match async { reg.create(body(payload)?).await }.await {
        Ok(created) => (StatusCode::CREATED, Json(created)).into_response(),
        Err(e) => e.into_response(),
    }
}

async fn state(State(reg): AppState, Path(id): Path<String>) -> Response {
    reg.snapshot(&id).await.map(Json).into_response()
}

async fn whoami(State(reg): AppState, Path(id): Path<String>, headers: HeaderMap) -> Response {
    reg.whoami(&id, bearer(&headers)).await.map(Json).into_response()
}

async fn commit(
    State(reg): AppState,
    Path(id): Path<String>,
    headers: HeaderMap,
    payload: Result<Json<CommitRequest>, JsonRejection>,
) -> Response {
    async {
        let req = body(payload)?;
        reg.submit_commitment(&id, bearer(&headers), &req.digest).await
    }
    .await
    .map(Json)
    .into_response()
}

async fn reveal(
    State(reg): AppState,
    Path(id): Path<String>,
    headers: HeaderMap,
    payload: Result<Json<RevealRequest>, JsonRejection>,
) -> Response {
    async {
        let req = body(payload)?;
        reg.submit_reveal(&id, bearer(&headers), req.value, &req.mask).await
    }
    .await
    .map(Json)
    .into_response()
}

async fn abort(
    State(reg): AppState,
    Path(id): Path<String>,
    headers: HeaderMap,
    payload: Result<Json<AbortRequest>, JsonRejection>,
) -> Response {
    async {
        let req = body(payload)?;
        reg.abort(&id, bearer(&headers), req).await
    }
    .await
    .map(Json)
    .into_response()
}

async fn transcript(State(reg): AppState, Path(id): Path<String>) -> Response {
    match reg.transcript(&id).await {
        Ok((bytes, warning)) => {
            let mut resp = ([(header::CONTENT_TYPE, TRANSCRIPT_CONTENT_TYPE)], bytes).into_response();
            if let Some(w) = warning.and_then(|w| w.parse().ok()) {
                resp.headers_mut().insert(WARNING_HEADER, w);
            }
            resp
        }
        Err(e) => e.into_response(),
    }
}

#[derive(Debug, Deserialize)]
struct EventsQuery {
    from_seq: Option<u64>,
}

/// Server-sent events: one `id: <seq>` event per record, starting at
/// `from_seq` (or after `Last-Event-ID`), ending once the transcript closes.
async fn events(
    State(reg): AppState,
    Path(id): Path<String>,
    Query(q): Query<EventsQuery>,
    headers: HeaderMap,
) -> Response {
    let resume = headers
        .get("last-event-id")
        .and_then(|v| v.to_str().ok())
        .and_then(|v| v.trim().parse::<u64>().ok())
        .map(|seq| seq + 1);
    let from = resume.or(q.from_seq).unwrap_or(0);
    let cell = match reg.cell(&id) {
        Ok(c) => c,
        Err(e) => return e.into_response(),
    };
    // Refuse quarantined sessions up front rather than mid-stream.
    if let Err(e) = cell.records_from(usize::MAX).await {
        return e.into_response();
    }
    Sse::new(record_stream(cell, from as usize))
        .keep_alive(KeepAlive::new().interval(Duration::from_secs(15)))
        .into_response()
}

struct Subscription {
    cell: Arc<SessionCell>,
    rx: watch::Receiver<usize>,
    next: usize,
    buf: VecDeque<SseEvent>,
    done: bool,
}

fn record_stream(cell: Arc<SessionCell>, from: usize) -> impl Stream<Item = Result<SseEvent, Infallible>> {
    let sub = Subscription {
        rx: cell.watch(),
        cell,
        next: from,
        buf: VecDeque::new(),
        done: false,
    };
    futures::stream::unfold(sub, |mut sub| async move {
        loop {
            if let Some(ev) = sub.buf.pop_front() {
                return Some((Ok(ev), sub));
            }
            if sub.done {
                return None;
            }
            // Mark the current length seen before reading, so an append that
            // lands after the read still wakes `changed()`.
            sub.rx.borrow_and_update();
            let Ok((batch, closed)) = sub.cell.records_from(sub.next).await else {
                return None;
            };
            if batch.is_empty() {
                if closed {
                    return None;
                }
                if sub.rx.changed().await.is_err() {
                    return None;
                }
                continue;
            }
            sub.next += batch.len();
            sub.done = closed;
            sub.buf.extend(batch.into_iter().map(|r| {
                SseEvent::default()
                    .id(r.seq.to_string())
                    .event(r.kind)
                    .data(r.line)
            }));
        }
    })
}
