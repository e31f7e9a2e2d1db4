//! The relay over real sockets.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::time::Duration;

use teleprobe_core::relay::{RelayConfig, RelayEvent, RelayNode, RelayOutput};
use teleprobe_core::ConnId;
use tokio::sync::mpsc::{UnboundedReceiver, UnboundedSender};
use tokio::time::Instant;

use super::{bind_pair, spawn_accept, spawn_web, Endpoints, Hub, Inbound, Outbound, ServiceError, ServiceHandle};

#[derive(Debug, Clone)]
pub struct RelayServiceConfig {
    pub relay: RelayConfig,
    /// TCP listen address; the web port is the next one.
    pub listen: SocketAddr,
    pub assets: Option<PathBuf>,
}

pub async fn start_relay(config: RelayServiceConfig) -> Result<ServiceHandle, ServiceError> {
    let (hub, inbox) = Hub::new();
    let (tcp, web) = bind_pair(config.listen).await?;
    let endpoints = Endpoints {
        tcp: Some(tcp.local_addr()?),
        web: Some(web.local_addr()?),
    };
    let helpers = vec![spawn_accept(tcp, hub.clone()), spawn_web(web, hub, config.assets.clone())];
    tracing::info!(
        event = "relay_listening",
        tcp = %config.listen,
        up_base_ms = config.relay.up.base_delay_ms,
        up_jitter_ms = config.relay.up.jitter_ms,
        down_base_ms = config.relay.down.base_delay_ms,
        down_jitter_ms = config.relay.down.jitter_ms
    );
    let task = tokio::spawn(run(RelayNode::new(config.relay), inbox));
    Ok(ServiceHandle {
        endpoints,
        task,
        helpers,
    })
}

async fn run(mut node: RelayNode, mut inbox: UnboundedReceiver<Inbound>) -> Result<(), ServiceError> {
    let start = Instant::now();
    let now_us = || start.elapsed().as_micros() as u64;
    let mut conns: HashMap<ConnId, UnboundedSender<Outbound>> = HashMap::new();
    loop {
        let deadline = node.next_deadline();
        let wake = start + Duration::from_micros(deadline.unwrap_or(0));
        tokio::select! {
            _ = tokio::time::sleep_until(wake), if deadline.is_some() => {
                let out = node.poll(now_us());
                route(out, &conns);
            }
            msg = inbox.recv() => {
                let Some(msg) = msg else { return Ok(()) };
                let out = match msg {
                    Inbound::Open { conn, tx, .. } => {
                        conns.insert(conn, tx);
                        Vec::new()
                    }
                    Inbound::Frame { conn, frame } => node.on_frame(conn, frame, now_us()),
                    Inbound::Bad { conn, err } => node.on_decode_error(conn, &err),
                    Inbound::Closed { conn } => {
                        conns.remove(&conn);
                        node.on_disconnect(conn)
                    }
                    Inbound::Fatal(e) => return Err(e),
                };
                route(out, &conns);
                // zero-delay links forward straight away
                let out = node.poll(now_us());
                route(out, &conns);
            }
        }
    }
}

fn route(out: Vec<RelayOutput>, conns: &HashMap<ConnId, UnboundedSender<Outbound>>) {
    for o in out {
        match o {
            RelayOutput::Send { conn, frame } => {
                if let Some(tx) = conns.get(&conn) {
                    let _ = tx.send(Outbound::Frame(frame));
                }
            }
            RelayOutput::Close { conn } => {
                if let Some(tx) = conns.get(&conn) {
                    let _ = tx.send(Outbound::Close);
                }
            }
            RelayOutput::Event(e) => log_event(&e),
        }
    }
}

fn log_event(e: &RelayEvent) {
    match e {
        RelayEvent::SessionOpened { session, robot } => tracing::info!(event = "session_opened", session = %session, robot),
        RelayEvent::SessionClosed { session } => tracing::info!(event = "session_closed", session = %session),
        RelayEvent::Joined { session, conn, role } => {
            tracing::info!(event = "joined", session = %session, conn, role = role.as_str())
        }
        RelayEvent::Left { session, conn } => tracing::info!(event = "left", session = %session, conn),
        RelayEvent::Rejected { conn, code } => tracing::warn!(event = "rejected", conn, code),
        RelayEvent::BadFrame { conn, code } => tracing::warn!(event = "bad_frame", conn, code),
    }
}
