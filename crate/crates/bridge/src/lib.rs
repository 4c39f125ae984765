//! WebSocket telemetry and control for a live mission.
//!
//! Clients connect to `/sim`, receive a `hello` frame and then one `snapshot` frame per
//! simulated second. They steer the mission with `command` frames, which are queued and
//! applied at the next tick boundary. Malformed or invalid commands are answered with an
//! `error` frame.

use std::io::Write;
use std::net::SocketAddr;
use std::sync::{Arc, Mutex};
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::Response;
use axum::routing::get;
use axum::Router;
use futures::{SinkExt, StreamExt};
use owtt::mission::{Command, LogWriter, Simulation, Snapshot};
use serde::{Deserialize, Serialize};
use tokio::sync::{broadcast, mpsc};
use tokio::time::Instant;

/// Version of the wire protocol carried in `hello` and `snapshot` frames.
pub const PROTOCOL_VERSION: u32 = 1;
/// Commands buffered between ticks before clients are told to back off.
pub const COMMAND_QUEUE: usize = 64;
const SNAPSHOT_BACKLOG: usize = 256;

#[derive(Debug, thiserror::Error)]
pub enum BridgeError {
    #[error(transparent)]
    Sim(#[from] owtt::Error),

    #[error("bridge i/o: {0}")]
    Io(#[from] std::io::Error),

    #[error("simulation task failed: {0}")]
    Join(#[from] tokio::task::JoinError),
}

pub type Result<T> = std::result::Result<T, BridgeError>;

/// Frames sent by the server.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ServerMessage {
    Hello {
        schema_version: u32,
        mission: String,
        seed: u64,
        vehicles: Vec<String>,
    },
    Snapshot {
        schema_version: u32,
        snapshot: Snapshot,
    },
    Error {
        message: String,
    },
}

/// Frames sent by clients.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum ClientMessage {
    Command { command: Command },
}

impl ServerMessage {
    fn to_text(&self) -> String {
        serde_json::to_string(self).expect("server frames serialize")
    }
}

/// Shared connection state for the `/sim` endpoint.
#[derive(Debug, Clone)]
pub struct Bridge {
    hello: Arc<str>,
    commands: mpsc::Sender<Command>,
    snapshots: broadcast::Sender<Arc<str>>,
    latest: Arc<Mutex<Option<Arc<str>>>>,
}

/// Simulation-side end of the bridge.
#[derive(Debug)]
pub struct BridgeHandle {
    bridge: Bridge,
    commands: mpsc::Receiver<Command>,
}

impl Bridge {
    pub fn new(sim: &Simulation) -> (Self, BridgeHandle) {
        let header = sim.header();
        let hello = ServerMessage::Hello {
            schema_version: PROTOCOL_VERSION,
            mission: header.mission,
            seed: header.seed,
            vehicles: header.vehicles,
        };
        let (tx, rx) = mpsc::channel(COMMAND_QUEUE);
        let (snapshots, _) = broadcast::channel(SNAPSHOT_BACKLOG);
        let bridge = Self {
            hello: hello.to_text().into(),
            commands: tx,
            snapshots,
            latest: Arc::new(Mutex::new(None)),
        };
        let handle = BridgeHandle {
            bridge: bridge.clone(),
            commands: rx,
        };
        (bridge, handle)
    }

    pub fn router(self) -> Router {
        Router::new().route("/sim", get(upgrade)).with_state(self)
    }

    /// Number of connected snapshot subscribers.
    pub fn subscribers(&self) -> usize {
        self.snapshots.receiver_count()
    }
}

impl BridgeHandle {
    /// Commands received since the last call, in arrival order.
    pub fn drain(&mut self) -> Vec<Command> {
        std::iter::from_fn(|| self.commands.try_recv().ok()).collect()
    }

    /// Wait for the next command.
    pub async fn next(&mut self) -> Option<Command> {
        self.commands.recv().await
    }

    pub fn publish(&self, snapshot: &Snapshot) {
        let text: Arc<str> = ServerMessage::Snapshot {
            schema_version: PROTOCOL_VERSION,
            snapshot: snapshot.clone(),
        }
        .to_text()
        .into();
        *self.bridge.latest.lock().expect("snapshot lock") = Some(text.clone());
        // no subscribers is fine
        let _ = self.bridge.snapshots.send(text);
    }

    pub fn bridge(&self) -> &Bridge {
        &self.bridge
    }
}

async fn upgrade(ws: WebSocketUpgrade, State(bridge): State<Bridge>) -> Response {
    ws.on_upgrade(move |socket| session(socket, bridge))
}

async fn session(socket: WebSocket, bridge: Bridge) {
    let (mut tx, mut rx) = socket.split();
    let mut snapshots = bridge.snapshots.subscribe();
    let latest = bridge.latest.lock().expect("snapshot lock").clone();
    let (reply_tx, mut reply_rx) = mpsc::channel::<String>(16);
    let writer = tokio::spawn(async move {
        if tx.send(Message::Text(bridge.hello.as_ref().into())).await.is_err() {
            return;
        }
        if let Some(s) = latest {
            if tx.send(Message::Text(s.as_ref().into())).await.is_err() {
                return;
            }
        }
        loop {
            let text: String = tokio::select! {
                s = snapshots.recv() => match s {
                    Ok(s) => s.as_ref().into(),
                    Err(broadcast::error::RecvError::Lagged(n)) => {
                        tracing::warn!(skipped = n, "client lagging, snapshots dropped");
                        continue;
                    }
                    Err(broadcast::error::RecvError::Closed) => break,
                },
                r = reply_rx.recv() => match r {
                    Some(r) => r,
                    None => break,
                },
            };
            if tx.send(Message::Text(text.into())).await.is_err() {
                break;
            }
        }
    });
    while let Some(Ok(msg)) = rx.next().await {
        let reply = match msg {
            Message::Text(text) => handle_frame(text.as_str(), &bridge.commands),
            Message::Binary(_) => Some("binary frames are not supported".to_string()),
            Message::Close(_) => break,
            _ => None,
        };
        if let Some(message) = reply {
            if reply_tx.send(ServerMessage::Error { message }.to_text()).await.is_err() {
                break;
            }
        }
    }
    drop(reply_tx);
    writer.abort();
}

/// Parse and queue one client frame; returns an error message for the client on failure.
fn handle_frame(text: &str, commands: &mpsc::Sender<Command>) -> Option<String> {
    let ClientMessage::Command { command } = match serde_json::from_str(text) {
        Ok(m) => m,
        Err(e) => return Some(format!("malformed frame: {e}")),
    };
    if let Err(e) = command.validate() {
        return Some(e.to_string());
    }
    match commands.try_send(command) {
        Ok(()) => None,
        Err(mpsc::error::TrySendError::Full(_)) => Some("command queue full, retry next tick".into()),
        Err(mpsc::error::TrySendError::Closed(_)) => Some("simulation has ended".into()),
    }
}

/// Bind `addr` and serve the bridge until the task is dropped.
pub async fn serve(addr: SocketAddr, bridge: Bridge) -> Result<(SocketAddr, tokio::task::JoinHandle<()>)> {
    let listener = tokio::net::TcpListener::bind(addr).await?;
    let local = listener.local_addr()?;
    let task = tokio::spawn(async move {
        if let Err(e) = axum::serve(listener, bridge.router()).await {
            tracing::error!(error = %e, "bridge server stopped");
        }
    });
    Ok((local, task))
}

/// Pacing for the live driver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LiveOptions {
    /// Simulated seconds per wall-clock second.
    pub time_scale: f64,
    /// Hold at t = 0 until a `resume` command arrives.
    pub start_paused: bool,
}

impl Default for LiveOptions {
    fn default() -> Self {
        Self {
            time_scale: 1.0,
            start_paused: false,
        }
    }
}

/// Run `sim` in real time against the bridge, logging every tick to `log`.
///
/// `pause`, `resume` and `set_time_scale` act on the pacing here; every other command goes to
/// the simulation and takes effect at the next tick boundary.
pub async fn run_live<W: Write + Send + 'static>(
    mut sim: Simulation,
    mut handle: BridgeHandle,
    options: LiveOptions,
    log: W,
) -> Result<W> {
    let mut writer = LogWriter::new(log, &sim.header())?;
    let mut paused = options.start_paused;
    let mut period = Duration::from_secs_f64(1.0 / options.time_scale);
    handle.publish(&sim.snapshot());
    let mut deadline = Instant::now();
    while !sim.is_finished() {
        for cmd in handle.drain() {
            apply(&mut sim, cmd, &mut paused, &mut period)?;
        }
        if paused {
            match handle.next().await {
                Some(cmd) => apply(&mut sim, cmd, &mut paused, &mut period)?,
                None => paused = false,
            }
            deadline = Instant::now();
            continue;
        }
        let (s, rec) = tokio::task::spawn_blocking(move || {
            let rec = sim.step();
            (sim, rec)
        })
        .await?;
        sim = s;
        writer.write(&rec?)?;
        handle.publish(&sim.snapshot());
        deadline += period;
        let now = Instant::now();
        if deadline < now {
            deadline = now;
        }
        tokio::time::sleep_until(deadline).await;
    }
    Ok(writer.finish()?)
}

fn apply(sim: &mut Simulation, cmd: Command, paused: &mut bool, period: &mut Duration) -> Result<()> {
    match cmd {
        Command::Pause => *paused = true,
        Command::Resume => *paused = false,
        Command::SetTimeScale { scale } => *period = Duration::from_secs_f64(1.0 / scale),
        other => sim.enqueue(other)?,
    }
    Ok(())
}
