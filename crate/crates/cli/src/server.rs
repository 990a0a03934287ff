//! Local session service: HTTP endpoints plus a websocket that streams
//! events to any number of readers.

use std::path::PathBuf;
use std::sync::{Arc, Mutex, MutexGuard};

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Query, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use offcut_core::inventory::InventoryFilter;
use offcut_core::{export, persist, Document, Event, ScrapId, Session};
use serde::{Deserialize, Serialize};
use serde_json::json;
use tokio::sync::broadcast;

const CHANNEL_CAPACITY: usize = 256;

/// Messages sent on `/session`.
#[derive(Debug, Clone, Serialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    /// Full state; `seq` is the last applied command.
    Snapshot {
        seq: u64,
        document: Document,
    },
    Event(Event),
}

impl ServerMessage {
    /// Parses a message read from `/session`.
    pub fn from_json(text: &str) -> serde_json::Result<ServerMessage> {
        #[derive(Deserialize)]
        struct Snapshot {
            seq: u64,
            document: Document,
        }
        let mut value: serde_json::Value = serde_json::from_str(text)?;
        let tag = value.as_object_mut().and_then(|o| o.remove("type"));
        match tag.as_ref().and_then(|t| t.as_str()) {
            Some("snapshot") => {
                let s: Snapshot = serde_json::from_value(value)?;
                Ok(ServerMessage::Snapshot { seq: s.seq, document: s.document })
            }
            Some("event") => Ok(ServerMessage::Event(serde_json::from_value(value)?)),
            _ => Err(serde::de::Error::custom("expected a message with type snapshot or event")),
        }
    }
}

struct Shared {
    session: Session,
    path: Option<PathBuf>,
}

pub struct AppState {
    shared: Mutex<Shared>,
    events: broadcast::Sender<String>,
}

impl AppState {
    /// `path`, when set, is rewritten after every command.
    pub fn new(session: Session, path: Option<PathBuf>) -> Arc<AppState> {
        let (events, _) = broadcast::channel(CHANNEL_CAPACITY);
        Arc::new(AppState { shared: Mutex::new(Shared { session, path }), events })
    }

    fn lock(&self) -> MutexGuard<'_, Shared> {
        self.shared.lock().unwrap_or_else(|e| e.into_inner())
    }

    /// Applies one command, saves, and broadcasts the event while still
    /// holding the writer lock so every reader sees events in seq order.
    pub fn apply(&self, body: &str) -> Event {
        let mut shared = self.lock();
        let event = shared.session.apply_json(body);
        if let Some(path) = &shared.path {
            if let Err(e) = persist::save(&shared.session, path) {
                eprintln!("warning: could not save {}: {e}", path.display());
            }
        }
        let text = serde_json::to_string(&ServerMessage::Event(event.clone())).expect("events serialize");
        let _ = self.events.send(text);
        event
    }

    fn snapshot_and_subscribe(&self) -> (String, broadcast::Receiver<String>) {
        let shared = self.lock();
        let msg = ServerMessage::Snapshot {
            seq: shared.session.history().len() as u64,
            document: shared.session.document().clone(),
        };
        (serde_json::to_string(&msg).expect("documents serialize"), self.events.subscribe())
    }

    pub fn document(&self) -> Document {
        self.lock().session.document().clone()
    }
}

pub fn router(state: Arc<AppState>) -> Router {
    Router::new()
        .route("/inventory", get(inventory))
        .route("/document", get(document))
        .route("/usage", get(usage))
        .route("/command", post(command))
        .route("/session", get(session_socket))
        .route("/export/cutlist", get(export_cutlist))
        .route("/export/svg", get(export_svg))
        .route("/export/overlay", get(export_overlay))
        .with_state(state)
}

fn error_response(status: StatusCode, e: &offcut_core::Error) -> Response {
    (status, Json(json!({ "kind": e.kind(), "message": e.to_string() }))).into_response()
}

async fn inventory(State(state): State<Arc<AppState>>) -> Response {
    Json(state.document().query_inventory(&InventoryFilter::default())).into_response()
}

async fn document(State(state): State<Arc<AppState>>) -> Response {
    let shared = state.lock();
    Json(json!({ "seq": shared.session.history().len(), "document": shared.session.document() })).into_response()
}

async fn usage(State(state): State<Arc<AppState>>) -> Response {
    Json(state.document().usage_report()).into_response()
}

async fn command(State(state): State<Arc<AppState>>, body: String) -> Response {
    Json(state.apply(&body)).into_response()
}

#[derive(Debug, Deserialize)]
struct ScrapQuery {
    scrap: u64,
}

async fn export_cutlist(State(state): State<Arc<AppState>>) -> Response {
    match export::cut_list_csv(&state.document()) {
        Ok(csv) => ([(header::CONTENT_TYPE, "text/csv; charset=utf-8")], csv).into_response(),
        Err(e) => error_response(StatusCode::INTERNAL_SERVER_ERROR, &e),
    }
}

fn svg_response(result: offcut_core::Result<String>) -> Response {
    match result {
        Ok(svg) => ([(header::CONTENT_TYPE, "image/svg+xml")], svg).into_response(),
        Err(e) => error_response(StatusCode::NOT_FOUND, &e),
    }
}

async fn export_svg(State(state): State<Arc<AppState>>, Query(q): Query<ScrapQuery>) -> Response {
    svg_response(export::plan_svg_document(&state.document(), ScrapId(q.scrap)))
}

async fn export_overlay(State(state): State<Arc<AppState>>, Query(q): Query<ScrapQuery>) -> Response {
    svg_response(export::overlay_svg(&state.document(), ScrapId(q.scrap)))
}

async fn session_socket(State(state): State<Arc<AppState>>, ws: WebSocketUpgrade) -> Response {
    ws.on_upgrade(move |socket| stream_session(socket, state))
}

async fn stream_session(mut socket: WebSocket, state: Arc<AppState>) {
    let (snapshot, mut rx) = state.snapshot_and_subscribe();
    if socket.send(Message::Text(snapshot.into())).await.is_err() {
        return;
    }
    loop {
        tokio::select! {
            broadcasted = rx.recv() => match broadcasted {
                Ok(text) => {
                    if socket.send(Message::Text(text.into())).await.is_err() {
                        return;
                    }
                }
                Err(broadcast::error::RecvError::Lagged(_)) => {
                    let (snapshot, fresh) = state.snapshot_and_subscribe();
                    rx = fresh;
                    if socket.send(Message::Text(snapshot.into())).await.is_err() {
                        return;
                    }
                }
                Err(broadcast::error::RecvError::Closed) => return,
            },
            incoming = socket.recv() => match incoming {
                Some(Ok(Message::Text(text))) => {
                    let state = state.clone();
                    let body = text.to_string();
                    // the resulting event reaches this client through the broadcast
                    let _ = tokio::task::spawn_blocking(move || state.apply(&body)).await;
                }
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => return,
                Some(Ok(_)) => {}
            },
        }
    }
}

pub async fn serve(state: Arc<AppState>, port: u16) -> std::io::Result<()> {
    let listener = tokio::net::TcpListener::bind(("127.0.0.1", port)).await?;
    println!("offcut session listening on http://{}", listener.local_addr()?);
    serve_on(listener, state, async {
        let _ = tokio::signal::ctrl_c().await;
    })
    .await
}

/// Serves on an already bound listener until `shutdown` completes.
pub async fn serve_on(
    listener: tokio::net::TcpListener,
    state: Arc<AppState>,
    shutdown: impl std::future::Future<Output = ()> + Send + 'static,
) -> std::io::Result<()> {
    axum::serve(listener, router(state)).with_graceful_shutdown(shutdown).await
}
