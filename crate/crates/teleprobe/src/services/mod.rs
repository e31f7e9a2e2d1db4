//! Wall-clock network services: the robot endpoint, the relay and the
//! scripted operator, over TCP with newline-delimited frames. The robot in
//! access-point mode and the relay also serve WebSocket clients and static
//! console assets on the port after their TCP port.
//!
//! Each service owns its state machine in a single task. Connection tasks
//! only decode and encode, and talk to the owner over channels.

pub mod operate;
pub mod relay;
pub mod robot;

use std::net::SocketAddr;
use std::path::PathBuf;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::Duration;

use axum::extract::ws::{Message, WebSocket, WebSocketUpgrade};
use axum::extract::State;
use axum::response::Response;
use axum::routing::get;
use axum::Router;
use teleprobe_core::protocol::{decode, encode, encode_text, DecodeError, Frame, LineDecoder};
use teleprobe_core::ConnId;
use thiserror::Error;
use tokio::io::{AsyncReadExt, AsyncWriteExt};
use tokio::net::{TcpListener, TcpStream};
use tokio::sync::mpsc::{unbounded_channel, UnboundedReceiver, UnboundedSender};
use tokio::task::JoinHandle;
use tower_http::services::ServeDir;

#[derive(Debug, Error)]
pub enum ServiceError {
    #[error("cannot bind {addr}: {source}")]
    Bind {
        addr: SocketAddr,
        #[source]
        source: std::io::Error,
    },
    #[error("cannot reach {addr} after {attempts} attempts: {source}")]
    Dial {
        addr: String,
        attempts: u32,
        #[source]
        source: std::io::Error,
    },
    #[error("connection lost: {0}")]
    Io(#[from] std::io::Error),
}

/// Redial policy for outgoing links.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DialPolicy {
    pub attempts: u32,
    pub backoff: Duration,
}

impl Default for DialPolicy {
    fn default() -> Self {
        DialPolicy {
            attempts: 10,
            backoff: Duration::from_secs(1),
        }
    }
}

pub async fn dial(addr: &str, policy: DialPolicy) -> Result<TcpStream, ServiceError> {
    let mut attempt = 0;
    loop {
        attempt += 1;
        match TcpStream::connect(addr).await {
            Ok(s) => {
                let _ = s.set_nodelay(true);
                return Ok(s);
            }
            Err(source) if attempt >= policy.attempts => {
                return Err(ServiceError::Dial {
                    addr: addr.to_string(),
                    attempts: attempt,
                    source,
                })
            }
            Err(e) => {
                tracing::warn!(event = "dial_retry", addr, attempt, error = %e);
                tokio::time::sleep(policy.backoff).await;
            }
        }
    }
}

#[derive(Debug)]
pub(crate) enum Outbound {
    Frame(Frame),
    Close,
}

#[derive(Debug)]
pub(crate) enum Inbound {
    Open {
        conn: ConnId,
        tx: UnboundedSender<Outbound>,
        /// Opened by this service rather than accepted.
        dialed: bool,
    },
    Frame {
        conn: ConnId,
        frame: Frame,
    },
    Bad {
        conn: ConnId,
        err: DecodeError,
    },
    Closed {
        conn: ConnId,
    },
    Fatal(ServiceError),
}

/// Where a connection task reports to, plus the shared id counter.
#[derive(Clone)]
pub(crate) struct Hub {
    inbox: UnboundedSender<Inbound>,
    next: Arc<AtomicU64>,
}

impl Hub {
    pub(crate) fn new() -> (Self, UnboundedReceiver<Inbound>) {
        let (tx, rx) = unbounded_channel();
        (
            Hub {
                inbox: tx,
                next: Arc::new(AtomicU64::new(1)),
            },
            rx,
        )
    }

    fn next_id(&self) -> ConnId {
        self.next.fetch_add(1, Ordering::Relaxed)
    }

    pub(crate) fn fatal(&self, err: ServiceError) {
        let _ = self.inbox.send(Inbound::Fatal(err));
    }

    /// Runs a TCP connection until either side closes it.
    pub(crate) fn spawn_tcp(&self, stream: TcpStream, dialed: bool) -> ConnId {
        let conn = self.next_id();
        let (tx, mut rx) = unbounded_channel();
        let _ = self.inbox.send(Inbound::Open { conn, tx, dialed });
        let (mut reader, mut writer) = stream.into_split();
        let inbox = self.inbox.clone();
        tokio::spawn(async move {
            let mut decoder = LineDecoder::new();
            let mut buf = vec![0u8; 4096];
            loop {
                tokio::select! {
                    read = reader.read(&mut buf) => {
                        let n = match read {
                            Ok(0) | Err(_) => break,
                            Ok(n) => n,
                        };
                        for item in decoder.push(&buf[..n]) {
                            let msg = match item {
                                Ok(frame) => Inbound::Frame { conn, frame },
                                Err(err) => Inbound::Bad { conn, err },
                            };
                            let _ = inbox.send(msg);
                        }
                    }
                    out = rx.recv() => match out {
                        Some(Outbound::Frame(f)) => {
                            let Ok(bytes) = encode(&f) else { continue };
                            if writer.write_all(&bytes).await.is_err() {
                                break;
                            }
                        }
                        Some(Outbound::Close) | None => {
                            let _ = writer.shutdown().await;
                            break;
                        }
                    }
                }
            }
            let _ = inbox.send(Inbound::Closed { conn });
        });
        conn
    }

    async fn run_ws(self, mut socket: WebSocket) {
        let conn = self.next_id();
        let (tx, mut rx) = unbounded_channel();
        let _ = self.inbox.send(Inbound::Open { conn, tx, dialed: false });
        loop {
            tokio::select! {
                msg = socket.recv() => {
                    let text = match msg {
                        Some(Ok(Message::Text(t))) => t,
                        Some(Ok(Message::Binary(_))) => {
                            let err = DecodeError::Malformed("binary message".into());
                            let _ = self.inbox.send(Inbound::Bad { conn, err });
                            continue;
                        }
                        Some(Ok(Message::Close(_))) | Some(Err(_)) | None => break,
                        Some(Ok(_)) => continue,
                    };
                    let msg = match decode(text.as_bytes()) {
                        Ok(frame) => Inbound::Frame { conn, frame },
                        Err(err) => Inbound::Bad { conn, err },
                    };
                    let _ = self.inbox.send(msg);
                }
                out = rx.recv() => match out {
                    Some(Outbound::Frame(f)) => {
                        let Ok(text) = encode_text(&f) else { continue };
                        if socket.send(Message::Text(text.into())).await.is_err() {
                            break;
                        }
                    }
                    Some(Outbound::Close) | None => {
                        let _ = socket.send(Message::Close(None)).await;
                        break;
                    }
                }
            }
        }
        let _ = self.inbox.send(Inbound::Closed { conn });
    }
}

pub(crate) async fn bind(addr: SocketAddr) -> Result<TcpListener, ServiceError> {
    TcpListener::bind(addr).await.map_err(|source| ServiceError::Bind { addr, source })
}

pub(crate) fn spawn_accept(listener: TcpListener, hub: Hub) -> JoinHandle<()> {
    tokio::spawn(async move {
        loop {
            match listener.accept().await {
                Ok((stream, peer)) => {
                    let _ = stream.set_nodelay(true);
                    let conn = hub.spawn_tcp(stream, false);
                    tracing::info!(event = "accepted", conn, peer = %peer);
                }
                Err(e) => tracing::warn!(event = "accept_failed", error = %e),
            }
        }
    })
}

async fn ws_upgrade(State(hub): State<Hub>, ws: WebSocketUpgrade) -> Response {
    ws.on_upgrade(move |socket| hub.run_ws(socket))
}

/// WebSocket clients on `/ws`; everything else comes from `assets`.
pub(crate) fn spawn_web(listener: TcpListener, hub: Hub, assets: Option<PathBuf>) -> JoinHandle<()> {
    let mut app = Router::new().route("/ws", get(ws_upgrade)).with_state(hub);
    if let Some(dir) = assets {
        app = app.fallback_service(ServeDir::new(dir));
    }
    tokio::spawn(async move {
        if let Err(e) = axum::serve(listener, app).await {
            tracing::error!(event = "web_failed", error = %e);
        }
    })
}

/// Addresses a running service listens on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct Endpoints {
    pub tcp: Option<SocketAddr>,
    pub web: Option<SocketAddr>,
}

/// Binds the TCP listener and the web listener on the following port (both
/// ephemeral when `addr` has port 0).
pub(crate) async fn bind_pair(addr: SocketAddr) -> Result<(TcpListener, TcpListener), ServiceError> {
    let tcp = bind(addr).await?;
    let mut web_addr = addr;
    if addr.port() != 0 {
        web_addr.set_port(addr.port() + 1);
    }
    let web = bind(web_addr).await?;
    Ok((tcp, web))
}

pub struct ServiceHandle {
    pub endpoints: Endpoints,
    task: JoinHandle<Result<(), ServiceError>>,
    helpers: Vec<JoinHandle<()>>,
}

impl ServiceHandle {
    /// Waits for the service to stop; services only stop on a fatal error.
    pub async fn join(self) -> Result<(), ServiceError> {
        let result = match self.task.await {
            Ok(r) => r,
            Err(e) => Err(ServiceError::Io(std::io::Error::other(e.to_string()))),
        };
        for h in self.helpers {
            h.abort();
        }
        result
    }

    pub fn abort(&self) {
        self.task.abort();
        for h in &self.helpers {
            h.abort();
        }
    }
}
