use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::{Html, IntoResponse};
use axum::routing::get;
use axum::{Json, Router};
use futures_util::{SinkExt, StreamExt};
use parking_lot::Mutex;
use tokio::sync::{broadcast, watch};
use tokio::time::MissedTickBehavior;
use tower_http::services::ServeDir;

use crate::error::MonitorError;
use crate::registry::Registry;
use crate::wire::encode;

const CHANNEL_CAPACITY: usize = 1024;

#[derive(Debug, Clone)]
pub struct ServeConfig {
    pub rate_hz: f64,
    /// Directory served at `/`. Without it `/` returns a small placeholder
    /// page.
    pub static_dir: Option<PathBuf>,
}

impl Default for ServeConfig {
    fn default() -> Self {
        Self {
            rate_hz: 4.0,
            static_dir: None,
        }
    }
}

#[derive(Debug)]
struct Frame {
    fsm_id: String,
    seq: u64,
    text: String,
}

struct Hub {
    registry: Registry,
    latest: Mutex<HashMap<String, Arc<Frame>>>,
    frames: broadcast::Sender<Arc<Frame>>,
    // serializes cycles so frames leave in seq order
    cycle: Mutex<()>,
    // one clone per connected viewer
    clients: Arc<()>,
}

impl Hub {
    fn publish(&self) {
        let _cycle = self.cycle.lock();
        for snap in self.registry.publish_cycle() {
            let frame = Arc::new(Frame {
                text: encode(&snap),
                fsm_id: snap.fsm_id,
                seq: snap.seq,
            });
            self.latest.lock().insert(frame.fsm_id.clone(), Arc::clone(&frame));
            // no receivers is fine
            let _ = self.frames.send(frame);
        }
    }

    fn latest(&self) -> Vec<Arc<Frame>> {
        let latest = self.latest.lock();
        self.registry
            .ids()
            .iter()
            .filter_map(|id| latest.get(id).cloned())
            .collect()
    }
}

/// A running monitor server. Dropping the handle shuts the server down.
pub struct ServerHandle {
    addr: SocketAddr,
    hub: Arc<Hub>,
    stop: watch::Sender<bool>,
    runtime: Option<tokio::runtime::Runtime>,
    tasks: Vec<tokio::task::JoinHandle<()>>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.addr
    }

    /// Publishes one cycle immediately, outside the periodic schedule.
    pub fn publish_now(&self) {
        self.hub.publish();
    }

    /// Publishes a last cycle, closes every connection and stops the server.
    pub fn shutdown(mut self) {
        self.stop_inner();
    }

    fn stop_inner(&mut self) {
        let Some(runtime) = self.runtime.take() else {
            return;
        };
        self.hub.publish();
        let _ = self.stop.send(true);
        let tasks = std::mem::take(&mut self.tasks);
        let hub = Arc::clone(&self.hub);
        runtime.block_on(async move {
            for task in tasks {
                let _ = tokio::time::timeout(Duration::from_secs(5), task).await;
            }
            // let viewers flush the final cycle and close
            let deadline = tokio::time::Instant::now() + Duration::from_secs(2);
            while Arc::strong_count(&hub.clients) > 1 && tokio::time::Instant::now() < deadline {
                tokio::time::sleep(Duration::from_millis(5)).await;
            }
        });
        runtime.shutdown_timeout(Duration::from_secs(1));
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        self.stop_inner();
    }
}

pub fn serve(registry: Registry, bind_address: &str, rate_hz: f64) -> Result<ServerHandle, MonitorError> {
    serve_with(
        registry,
        bind_address,
        ServeConfig {
            rate_hz,
            ..ServeConfig::default()
        },
    )
}

/// Starts the server on its own threads and returns once it is accepting
/// connections.
pub fn serve_with(registry: Registry, bind_address: &str, config: ServeConfig) -> Result<ServerHandle, MonitorError> {
    if !(config.rate_hz.is_finite() && config.rate_hz > 0.0) {
        return Err(MonitorError::InvalidRate(config.rate_hz));
    }
    let bind_failure = |source| MonitorError::BindFailure {
        address: bind_address.to_owned(),
        source,
    };
    let listener = std::net::TcpListener::bind(bind_address).map_err(bind_failure)?;
    listener.set_nonblocking(true).map_err(bind_failure)?;
    let addr = listener.local_addr().map_err(bind_failure)?;

    let runtime = tokio::runtime::Builder::new_multi_thread()
        .worker_threads(2)
        .thread_name("hsm-monitor")
        .enable_all()
        .build()
        .map_err(MonitorError::Runtime)?;

    let (frames, _) = broadcast::channel(CHANNEL_CAPACITY);
    let hub = Arc::new(Hub {
        registry,
        latest: Mutex::new(HashMap::new()),
        frames,
        cycle: Mutex::new(()),
        clients: Arc::new(()),
    });
    // first cycle before accepting, so every client gets a snapshot on connect
    hub.publish();

    let (stop, stop_rx) = watch::channel(false);
    let period = Duration::from_secs_f64(1.0 / config.rate_hz);

    let publisher = {
        let hub = Arc::clone(&hub);
        let mut stop_rx = stop_rx.clone();
        runtime.spawn(async move {
            let mut ticks = tokio::time::interval_at(tokio::time::Instant::now() + period, period);
            ticks.set_missed_tick_behavior(MissedTickBehavior::Delay);
            loop {
                tokio::select! {
                    _ = ticks.tick() => {
                        let hub = Arc::clone(&hub);
                        // snapshots take blocking locks
                        let _ = tokio::task::spawn_blocking(move || hub.publish()).await;
                    }
                    _ = stop_rx.changed() => break,
                }
            }
        })
    };

    let mut app = Router::new()
        .route("/ws", get(ws_upgrade))
        .route("/fsms", get(list_fsms));
    app = match &config.static_dir {
        Some(dir) => app.fallback_service(ServeDir::new(dir)),
        None => app.route("/", get(placeholder)),
    };
    let app = app.with_state(AppState {
        hub: Arc::clone(&hub),
        stop: stop_rx.clone(),
    });

    let server = {
        let mut stop_rx = stop_rx;
        let listener = runtime
            .block_on(async { tokio::net::TcpListener::from_std(listener) })
            .map_err(bind_failure)?;
        runtime.spawn(async move {
            let shutdown = async move { stopped(&mut stop_rx).await };
            if let Err(err) = axum::serve(listener, app).with_graceful_shutdown(shutdown).await {
                log::error!("monitor server failed: {err}");
            }
        })
    };
    log::info!("monitor listening on {addr}");

    Ok(ServerHandle {
        addr,
        hub,
        stop,
        runtime: Some(runtime),
        tasks: vec![publisher, server],
    })
}

async fn stopped(rx: &mut watch::Receiver<bool>) {
    let _ = rx.wait_for(|stopped| *stopped).await;
}

#[derive(Clone)]
struct AppState {
    hub: Arc<Hub>,
    stop: watch::Receiver<bool>,
}

async fn list_fsms(State(state): State<AppState>) -> Json<Vec<String>> {
    Json(state.hub.registry.ids())
}

async fn placeholder(State(state): State<AppState>) -> Html<String> {
    let items: String = state
        .hub
        .registry
        .ids()
        .iter()
        .map(|id| format!("<li>{}</li>", escape(id)))
        .collect();
    Html(format!(
        "<!doctype html><html><head><title>hsm monitor</title></head><body>\
         <h1>hsm monitor</h1><p>No viewer bundle configured. Snapshots stream at <code>/ws</code>.</p>\
         <ul>{items}</ul></body></html>"
    ))
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

async fn ws_upgrade(ws: WebSocketUpgrade, State(state): State<AppState>) -> impl IntoResponse {
    ws.on_upgrade(move |socket| client(socket, state))
}

async fn client(socket: WebSocket, state: AppState) {
    let _alive = Arc::clone(&state.hub.clients);
    let (mut tx, mut rx) = socket.split();
    // subscribe before reading the cache so nothing falls in between
    let mut frames = state.hub.frames.subscribe();
    let mut stop = state.stop;
    let mut sent: HashMap<String, u64> = HashMap::new();

    let send = |frame: &Frame, sent: &mut HashMap<String, u64>| -> Option<Message> {
        let last = sent.entry(frame.fsm_id.clone()).or_insert(0);
        if frame.seq <= *last {
            return None;
        }
        *last = frame.seq;
        Some(Message::Text(frame.text.clone().into()))
    };

    for frame in state.hub.latest() {
        if let Some(msg) = send(&frame, &mut sent) {
            if tx.send(msg).await.is_err() {
                return;
            }
        }
    }

    loop {
        tokio::select! {
            received = frames.recv() => match received {
                Ok(frame) => {
                    if let Some(msg) = send(&frame, &mut sent) {
                        if let Err(err) = tx.send(msg).await {
                            log::debug!("viewer dropped: {err}");
                            return;
                        }
                    }
                }
                Err(broadcast::error::RecvError::Lagged(n)) => {
                    log::warn!("viewer fell behind, skipped {n} frames");
                }
                Err(broadcast::error::RecvError::Closed) => break,
            },
            incoming = rx.next() => match incoming {
                Some(Ok(Message::Close(_))) | None | Some(Err(_)) => return,
                // observe-only protocol; anything else from the client is ignored
                Some(Ok(_)) => {}
            },
            _ = stopped(&mut stop) => {
                // flush whatever the final cycle produced
                while let Ok(frame) = frames.try_recv() {
                    if let Some(msg) = send(&frame, &mut sent) {
                        if tx.send(msg).await.is_err() {
                            return;
                        }
                    }
                }
                break;
            }
        }
    }
    let _ = tx.send(Message::Close(None)).await;
}
