//! The robot endpoint over real sockets.

use std::collections::HashMap;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::time::Duration;

use teleprobe_core::probe::TICK_MS;
use teleprobe_core::robot::{RobotConfig, RobotEvent, RobotMode, RobotNode, RobotOutput};
use teleprobe_core::{ConnId, ProbeModel};
use tokio::sync::mpsc::{UnboundedReceiver, UnboundedSender};
use tokio::time::{Instant, MissedTickBehavior};

use super::{bind_pair, dial, spawn_accept, spawn_web, DialPolicy, Endpoints, Hub, Inbound, Outbound, ServiceError, ServiceHandle};

#[derive(Debug, Clone)]
pub struct RobotServiceConfig {
    pub model: ProbeModel,
    pub robot: RobotConfig,
    /// Listen address in access-point mode; the web port is the next one.
    pub listen: SocketAddr,
    /// Relay address in station mode.
    pub relay: Option<String>,
    pub assets: Option<PathBuf>,
    pub dial: DialPolicy,
}

/// Binds (access point) or starts dialing (station) and returns at once.
/// A station that cannot reach its relay ends with [`ServiceError::Dial`].
pub async fn start_robot(config: RobotServiceConfig) -> Result<ServiceHandle, ServiceError> {
    let (hub, inbox) = Hub::new();
    let mut endpoints = Endpoints::default();
    let mut helpers = Vec::new();
    match &config.robot.mode {
        RobotMode::AccessPoint => {
            let (tcp, web) = bind_pair(config.listen).await?;
            endpoints.tcp = Some(tcp.local_addr()?);
            endpoints.web = Some(web.local_addr()?);
            helpers.push(spawn_accept(tcp, hub.clone()));
            helpers.push(spawn_web(web, hub.clone(), config.assets.clone()));
            tracing::info!(event = "robot_listening", tcp = %config.listen, mode = "ap");
        }
        RobotMode::Station { session } => {
            let relay = config.relay.clone().unwrap_or_else(|| "127.0.0.1:7400".to_string());
            tracing::info!(event = "robot_dialing", relay = %relay, session = %session, mode = "sta");
            spawn_dialer(hub.clone(), relay, config.dial);
        }
    }
    let node = RobotNode::new(config.model.clone(), config.robot.clone());
    let task = tokio::spawn(run(node, hub, inbox, config));
    Ok(ServiceHandle {
        endpoints,
        task,
        helpers,
    })
}

fn spawn_dialer(hub: Hub, addr: String, policy: DialPolicy) {
    tokio::spawn(async move {
        match dial(&addr, policy).await {
            Ok(stream) => {
                hub.spawn_tcp(stream, true);
            }
            Err(e) => hub.fatal(e),
        }
    });
}

async fn run(
    mut node: RobotNode,
    hub: Hub,
    mut inbox: UnboundedReceiver<Inbound>,
    config: RobotServiceConfig,
) -> Result<(), ServiceError> {
    let start = Instant::now();
    let elapsed_ms = || start.elapsed().as_millis() as u64;
    let mut conns: HashMap<ConnId, UnboundedSender<Outbound>> = HashMap::new();
    let mut upstream: Option<ConnId> = None;
    let mut ticker = tokio::time::interval(Duration::from_millis(TICK_MS));
    ticker.set_missed_tick_behavior(MissedTickBehavior::Skip);
    loop {
        tokio::select! {
            _ = ticker.tick() => {
                let now = elapsed_ms() / TICK_MS * TICK_MS;
                let out = node.tick(now);
                route(out, &conns);
            }
            msg = inbox.recv() => {
                let Some(msg) = msg else { return Ok(()) };
                match msg {
                    Inbound::Open { conn, tx, dialed } => {
                        conns.insert(conn, tx);
                        if dialed {
                            upstream = Some(conn);
                            tracing::info!(event = "relay_connected", conn);
                        }
                        let out = node.on_connect(conn);
                        route(out, &conns);
                    }
                    Inbound::Frame { conn, frame } => node.on_frame(conn, frame, elapsed_ms()),
                    Inbound::Bad { conn, err } => {
                        let out = node.on_decode_error(conn, &err, elapsed_ms());
                        route(out, &conns);
                    }
                    Inbound::Closed { conn } => {
                        conns.remove(&conn);
                        node.on_disconnect(conn);
                        if upstream == Some(conn) {
                            upstream = None;
                            tracing::warn!(event = "relay_lost", conn);
                            let relay = config.relay.clone().unwrap_or_else(|| "127.0.0.1:7400".to_string());
                            spawn_dialer(hub.clone(), relay, config.dial);
                        }
                    }
                    Inbound::Fatal(e) => {
                        tracing::error!(event = "robot_failed", error = %e);
                        return Err(e);
                    }
                }
            }
        }
    }
}

fn route(out: Vec<RobotOutput>, conns: &HashMap<ConnId, UnboundedSender<Outbound>>) {
    for o in out {
        match o {
            RobotOutput::Send { conn, frame } => {
                if let Some(tx) = conns.get(&conn) {
                    let _ = tx.send(Outbound::Frame(frame));
                }
            }
            RobotOutput::Close { conn } => {
                if let Some(tx) = conns.get(&conn) {
                    let _ = tx.send(Outbound::Close);
                }
            }
            RobotOutput::Event(e) => log_event(&e),
        }
    }
}

fn log_event(e: &RobotEvent) {
    match e {
        RobotEvent::OperatorAttached { conn, at_ms } => tracing::info!(event = "operator_attached", conn, at_ms),
        RobotEvent::OperatorDetached { conn, at_ms } => tracing::info!(event = "operator_detached", conn, at_ms),
        RobotEvent::ConsoleAttached { conn, at_ms } => tracing::info!(event = "console_attached", conn, at_ms),
        RobotEvent::Rejected { conn, code, at_ms } => tracing::warn!(event = "rejected", conn, code, at_ms),
        RobotEvent::Applied(a) => tracing::debug!(
            event = "applied",
            conn = a.conn,
            at_ms = a.at_ms,
            axis = a.command.axis.wire_code(),
            dir = a.command.dir.sign(),
            on = a.command.on,
            seq = a.command.seq,
            blocked = a.blocked
        ),
        RobotEvent::Failsafe { at_ms, last_rx_ms } => tracing::warn!(event = "failsafe", at_ms, last_rx_ms),
        RobotEvent::BadFrame { conn, code, at_ms } => tracing::warn!(event = "bad_frame", conn, code, at_ms),
        RobotEvent::PeerError { conn, code, detail, at_ms } => {
            tracing::warn!(event = "peer_error", conn, code = %code, detail = %detail, at_ms)
        }
    }
}
