//! Hosts participatory sessions: one single-writer task per session, a
//! WebSocket stream of JSON frames per client, and plain HTTP control
//! endpoints.
//!
//! Routes:
//! - `POST /sessions` creates a session from the served scenario
//! - `GET /sessions/{id}` reports status
//! - `POST /sessions/{id}/step` advances one tick (manual-clock sessions)
//! - `POST /sessions/{id}/cycle` runs the refinement cycle
//! - `GET /sessions/{id}/log` downloads the trajectory log
//! - `GET /sessions/{id}/ws` opens the client frame stream

use std::collections::BTreeMap;
use std::future::Future;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::body::Bytes;
use axum::extract::ws::rejection::WebSocketUpgradeRejection;
use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::{Path, State};
use axum::http::{header, StatusCode};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use futures_util::{SinkExt, StreamExt};
use serde::Deserialize;
use serde_json::json;
use tokio::net::TcpListener;
use tokio::sync::{broadcast, mpsc, oneshot, watch};
use wayward_core::io::format_log;
use wayward_core::irl::{IrlConfig, IrlError};
use wayward_core::session::{
    ConnectionId, CycleOutcome, ServerMessage, Session, SessionError, SessionStatus, Subscriber,
};
use wayward_core::sim::{Scenario, TickSnapshot};
use wayward_core::trajectory::TrajectoryLog;

pub use wayward_core::session::DEFAULT_TICK_INTERVAL_MS;

type Reply<T> = oneshot::Sender<T>;

enum Command {
    Frame { connection: ConnectionId, text: String, reply: Reply<Vec<ServerMessage>> },
    Disconnect(ConnectionId),
    Status(Reply<SessionStatus>),
    Step(Reply<Option<u64>>),
    Cycle { config: IrlConfig, reply: Reply<Result<CycleOutcome, SessionError>> },
    Log(Reply<TrajectoryLog>),
    Stop(Reply<TrajectoryLog>),
}

#[derive(Clone)]
struct SessionHandle {
    commands: mpsc::Sender<Command>,
    snapshots: watch::Receiver<TickSnapshot>,
    notices: broadcast::Sender<ServerMessage>,
}

struct Inner {
    scenario: Scenario,
    default_interval: Duration,
    sessions: Mutex<BTreeMap<String, SessionHandle>>,
    next_session: AtomicU64,
    next_connection: AtomicU64,
}

/// Shared server state; cheap to clone.
#[derive(Clone)]
pub struct Server {
    inner: Arc<Inner>,
}

impl Server {
    /// `tick_interval` of zero gives manual-clock sessions advanced only via
    /// the step endpoint.
    pub fn new(scenario: Scenario, tick_interval: Duration) -> Self {
        Server {
            inner: Arc::new(Inner {
                scenario,
                default_interval: tick_interval,
                sessions: Mutex::new(BTreeMap::new()),
                next_session: AtomicU64::new(1),
                next_connection: AtomicU64::new(1),
            }),
        }
    }

    /// Starts a new independent session and its clock task. Must be called
    /// inside a tokio runtime.
    pub fn create_session(&self, tick_interval: Option<Duration>) -> Result<String, SessionError> {
        let session = Session::new(self.inner.scenario.clone())?;
        let id = self.inner.next_session.fetch_add(1, Ordering::Relaxed).to_string();
        let (commands, rx) = mpsc::channel(256);
        let (snap_tx, snapshots) = watch::channel(session.latest_snapshot().clone());
        let (notices, _) = broadcast::channel(64);
        let interval = tick_interval.unwrap_or(self.inner.default_interval);
        tokio::spawn(session_loop(session, rx, snap_tx, notices.clone(), interval));
        self.inner.sessions.lock().expect("lock").insert(id.clone(), SessionHandle { commands, snapshots, notices });
        Ok(id)
    }

    fn handle(&self, id: &str) -> Result<SessionHandle, SessionError> {
        self.inner.sessions.lock().expect("lock").get(id).cloned().ok_or(SessionError::UnknownSession)
    }

    pub fn session_ids(&self) -> Vec<String> {
        self.inner.sessions.lock().expect("lock").keys().cloned().collect()
    }

    async fn request<T>(&self, id: &str, make: impl FnOnce(Reply<T>) -> Command) -> Result<T, SessionError> {
        let handle = self.handle(id)?;
        let (tx, rx) = oneshot::channel();
        handle.commands.send(make(tx)).await.map_err(|_| SessionError::UnknownSession)?;
        rx.await.map_err(|_| SessionError::UnknownSession)
    }

    pub async fn status(&self, id: &str) -> Result<SessionStatus, SessionError> {
        self.request(id, Command::Status).await
    }

    /// Advances a session one tick; `None` while refinement pauses it.
    pub async fn step(&self, id: &str) -> Result<Option<u64>, SessionError> {
        self.request(id, Command::Step).await
    }

    pub async fn run_cycle(&self, id: &str, config: IrlConfig) -> Result<CycleOutcome, SessionError> {
        self.request(id, |reply| Command::Cycle { config, reply }).await?
    }

    pub async fn log(&self, id: &str) -> Result<TrajectoryLog, SessionError> {
        self.request(id, Command::Log).await
    }

    /// Stops every session and returns its final log, by session id.
    pub async fn stop_all(&self) -> Vec<(String, TrajectoryLog)> {
        let handles: Vec<(String, SessionHandle)> =
            std::mem::take(&mut *self.inner.sessions.lock().expect("lock")).into_iter().collect();
        let mut logs = Vec::new();
        for (id, handle) in handles {
            let (tx, rx) = oneshot::channel();
            if handle.commands.send(Command::Stop(tx)).await.is_ok() {
                if let Ok(log) = rx.await {
                    logs.push((id, log));
                }
            }
        }
        logs
    }

    pub fn router(&self) -> Router {
        Router::new()
            .route("/sessions", post(create_session))
            .route("/sessions/{id}", get(get_status))
            .route("/sessions/{id}/step", post(step_session))
            .route("/sessions/{id}/cycle", post(run_cycle))
            .route("/sessions/{id}/log", get(download_log))
            .route("/sessions/{id}/ws", get(open_socket))
            .with_state(self.clone())
    }

    /// Serves until `shutdown` resolves, then stops all sessions and
    /// returns their logs.
    pub async fn serve(
        self,
        listener: TcpListener,
        shutdown: impl Future<Output = ()> + Send + 'static,
    ) -> std::io::Result<Vec<(String, TrajectoryLog)>> {
        let logs = Arc::new(Mutex::new(Vec::new()));
        let stopper = self.clone();
        let sink = Arc::clone(&logs);
        axum::serve(listener, self.router())
            .with_graceful_shutdown(async move {
                shutdown.await;
                // closing sessions ends their sockets so the shutdown can finish
                *sink.lock().expect("lock") = stopper.stop_all().await;
            })
            .await?;
        let logs = std::mem::take(&mut *logs.lock().expect("lock"));
        Ok(logs)
    }
}

async fn session_loop(
    mut session: Session,
    mut commands: mpsc::Receiver<Command>,
    snapshots: watch::Sender<TickSnapshot>,
    notices: broadcast::Sender<ServerMessage>,
    interval: Duration,
) {
    let mut ticker = (!interval.is_zero()).then(|| {
        let mut t = tokio::time::interval_at(tokio::time::Instant::now() + interval, interval);
        t.set_missed_tick_behavior(tokio::time::MissedTickBehavior::Delay);
        t
    });
    let (solved_tx, mut solved_rx) = mpsc::channel::<Result<CycleOutcome, IrlError>>(1);
    let mut waiting: Option<Reply<Result<CycleOutcome, SessionError>>> = None;

    let advance = |session: &mut Session| {
        let tick = session.tick().map(|s| s.tick);
        if tick.is_some() {
            snapshots.send_replace(session.latest_snapshot().clone());
        }
        tick
    };

    loop {
        let clock = async {
            match ticker.as_mut() {
                Some(t) => {
                    t.tick().await;
                }
                None => std::future::pending::<()>().await,
            }
        };
        tokio::select! {
            _ = clock => {
                advance(&mut session);
            }
            Some(result) = solved_rx.recv() => {
                let outcome = session.finish_refinement(result);
                let _ = notices.send(ServerMessage::Phase { phase: session.phase() });
                if let Ok(o) = &outcome {
                    let _ = notices.send(ServerMessage::Refined {
                        report: serde_json::to_value(&o.report).expect("report serializes"),
                    });
                }
                if let Some(reply) = waiting.take() {
                    let _ = reply.send(outcome);
                }
            }
            command = commands.recv() => {
                let Some(command) = command else { break };
                match command {
                    Command::Frame { connection, text, reply } => {
                        let before = session.phase();
                        let _ = reply.send(session.handle_client_message(connection, &text));
                        if session.phase() != before {
                            let _ = notices.send(ServerMessage::Phase { phase: session.phase() });
                        }
                    }
                    Command::Disconnect(connection) => session.leave(connection),
                    Command::Status(reply) => {
                        let _ = reply.send(session.status());
                    }
                    Command::Step(reply) => {
                        let _ = reply.send(advance(&mut session));
                    }
                    Command::Cycle { config, reply } => match session.begin_refinement(config) {
                        Err(e) => {
                            let _ = reply.send(Err(e));
                        }
                        Ok(job) => {
                            let _ = notices.send(ServerMessage::Phase { phase: session.phase() });
                            waiting = Some(reply);
                            let done = solved_tx.clone();
                            tokio::task::spawn_blocking(move || {
                                let _ = done.blocking_send(job.solve());
                            });
                        }
                    },
                    Command::Log(reply) => {
                        let _ = reply.send(session.log().clone());
                    }
                    Command::Stop(reply) => {
                        let _ = reply.send(session.log().clone());
                        break;
                    }
                }
            }
        }
    }
}

fn error_response(e: &SessionError) -> Response {
    let status = match e {
        SessionError::UnknownSession => StatusCode::NOT_FOUND,
        SessionError::MalformedMessage(_) | SessionError::InvalidScenario(_) => StatusCode::BAD_REQUEST,
        _ => StatusCode::CONFLICT,
    };
    (status, Json(json!({ "error": e.to_string() }))).into_response()
}

#[derive(Deserialize, Default)]
struct CreateRequest {
    tick_interval_ms: Option<u64>,
}

async fn create_session(State(server): State<Server>, body: Bytes) -> Response {
    let request: CreateRequest = if body.is_empty() {
        CreateRequest::default()
    } else {
        match serde_json::from_slice(&body) {
            Ok(r) => r,
            Err(e) => return error_response(&SessionError::MalformedMessage(e.to_string())),
        }
    };
    match server.create_session(request.tick_interval_ms.map(Duration::from_millis)) {
        Ok(id) => (StatusCode::CREATED, Json(json!({ "id": id }))).into_response(),
        Err(e) => error_response(&e),
    }
}

async fn get_status(State(server): State<Server>, Path(id): Path<String>) -> Response {
    match server.status(&id).await {
        Ok(status) => Json(status).into_response(),
        Err(e) => error_response(&e),
    }
}

async fn step_session(State(server): State<Server>, Path(id): Path<String>) -> Response {
    match server.step(&id).await {
        Ok(tick) => Json(json!({ "tick": tick })).into_response(),
        Err(e) => error_response(&e),
    }
}

async fn run_cycle(State(server): State<Server>, Path(id): Path<String>, body: Bytes) -> Response {
    let config: IrlConfig = if body.is_empty() {
        IrlConfig::default()
    } else {
        match serde_json::from_slice(&body) {
            Ok(c) => c,
            Err(e) => return error_response(&SessionError::MalformedMessage(e.to_string())),
        }
    };
    match server.run_cycle(&id, config).await {
        Ok(outcome) => Json(outcome).into_response(),
        Err(e) => error_response(&e),
    }
}

async fn download_log(State(server): State<Server>, Path(id): Path<String>) -> Response {
    match server.log(&id).await {
        Ok(log) => ([(header::CONTENT_TYPE, "text/plain; charset=utf-8")], format_log(&log)).into_response(),
        Err(e) => error_response(&e),
    }
}

async fn open_socket(
    State(server): State<Server>,
    Path(id): Path<String>,
    upgrade: Result<WebSocketUpgrade, WebSocketUpgradeRejection>,
) -> Response {
    match server.handle(&id) {
        Ok(handle) => {
            let upgrade = match upgrade {
                Ok(u) => u,
                Err(rejection) => return rejection.into_response(),
            };
            let connection = server.inner.next_connection.fetch_add(1, Ordering::Relaxed);
            upgrade.on_upgrade(move |socket| client_stream(socket, handle, connection))
        }
        Err(e) => error_response(&e),
    }
}

fn frame(message: &ServerMessage) -> Message {
    Message::Text(serde_json::to_string(message).expect("frames serialize").into())
}

async fn client_stream(socket: WebSocket, handle: SessionHandle, connection: ConnectionId) {
    let (mut sink, mut stream) = socket.split();
    let mut snapshots = handle.snapshots.clone();
    let mut notices = handle.notices.subscribe();
    let mut subscriber = Subscriber::default();

    let first = snapshots.borrow_and_update().clone();
    let opened = match subscriber.deliver(&first) {
        Some(m) => sink.send(frame(&m)).await.is_ok(),
        None => true,
    };
    if opened {
        loop {
            tokio::select! {
                incoming = stream.next() => {
                    let text = match incoming {
                        Some(Ok(Message::Text(t))) => t.to_string(),
                        Some(Ok(Message::Close(_))) | Some(Err(_)) | None => break,
                        Some(Ok(_)) => continue,
                    };
                    let (tx, rx) = oneshot::channel();
                    let sent = handle.commands.send(Command::Frame { connection, text, reply: tx }).await;
                    let Ok(replies) = (match sent {
                        Ok(()) => rx.await,
                        Err(_) => break,
                    }) else { break };
                    let mut failed = false;
                    for r in &replies {
                        failed |= sink.send(frame(r)).await.is_err();
                    }
                    if failed {
                        break;
                    }
                }
                changed = snapshots.changed() => {
                    if changed.is_err() {
                        break;
                    }
                    let latest = snapshots.borrow_and_update().clone();
                    if let Some(m) = subscriber.deliver(&latest) {
                        if sink.send(frame(&m)).await.is_err() {
                            break;
                        }
                    }
                }
                notice = notices.recv() => match notice {
                    Ok(m) => {
                        if sink.send(frame(&m)).await.is_err() {
                            break;
                        }
                    }
                    Err(broadcast::error::RecvError::Lagged(_)) => {}
                    Err(broadcast::error::RecvError::Closed) => break,
                },
            }
        }
    }
    let _ = handle.commands.send(Command::Disconnect(connection)).await;
    let _ = sink.close().await;
}
