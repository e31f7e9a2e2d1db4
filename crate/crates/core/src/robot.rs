//! The robot endpoint as a sans-IO state machine.
//!
//! The embedding runtime reports connections, frames and disconnects, and
//! calls [`RobotNode::tick`] on the simulation tick. Frames received between
//! ticks are applied together at the next tick, after the probe has been
//! advanced to the tick time.

use alloc::collections::BTreeSet;
use alloc::string::String;
use alloc::vec::Vec;

use crate::axis::{AxisId, Direction};
use crate::imu::{ImuModel, ImuSampler};
use crate::probe::{ProbeModel, ProbeState};
use crate::protocol::{Ack, Command, DecodeError, Frame, Hello, Role};
use crate::{ConnId, PROTO_VERSION};

pub const DEFAULT_WATCHDOG_MS: u64 = 1500;
pub const DEFAULT_TELEMETRY_HZ: f64 = 25.0;

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RobotMode {
    /// Serves operators and consoles directly.
    AccessPoint,
    /// Dials a relay and registers under `session`.
    Station { session: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct RobotConfig {
    pub mode: RobotMode,
    pub telemetry_hz: f64,
    pub watchdog_ms: u64,
    pub imu: ImuModel,
    pub imu_seed: u64,
}

impl RobotConfig {
    pub fn access_point() -> Self {
        RobotConfig {
            mode: RobotMode::AccessPoint,
            telemetry_hz: DEFAULT_TELEMETRY_HZ,
            watchdog_ms: DEFAULT_WATCHDOG_MS,
            imu: ImuModel::default(),
            imu_seed: 0,
        }
    }

    pub fn station(session: impl Into<String>) -> Self {
        RobotConfig {
            mode: RobotMode::Station {
                session: session.into(),
            },
            ..Self::access_point()
        }
    }
}

/// A command as the probe received it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AppliedCommand {
    pub at_ms: u64,
    pub conn: ConnId,
    pub command: Command,
    /// The command engaged a steering axis whose tip could not respond: the
    /// reversal starts inside the deadband.
    pub blocked: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RobotEvent {
    OperatorAttached { conn: ConnId, at_ms: u64 },
    OperatorDetached { conn: ConnId, at_ms: u64 },
    ConsoleAttached { conn: ConnId, at_ms: u64 },
    Rejected { conn: ConnId, code: &'static str, at_ms: u64 },
    Applied(AppliedCommand),
    /// The watchdog fired and stopped every axis.
    Failsafe { at_ms: u64, last_rx_ms: u64 },
    BadFrame { conn: ConnId, code: &'static str, at_ms: u64 },
    PeerError { conn: ConnId, code: String, detail: String, at_ms: u64 },
}

#[derive(Debug, Clone, PartialEq)]
pub enum RobotOutput {
    Send { conn: ConnId, frame: Frame },
    /// Send any queued frames, then close.
    Close { conn: ConnId },
    Event(RobotEvent),
}

#[derive(Debug, Clone)]
enum Inbound {
    Frame { conn: ConnId, frame: Frame, at_ms: u64 },
    Gone { conn: ConnId },
}

#[derive(Debug, Clone)]
pub struct RobotNode {
    model: ProbeModel,
    state: ProbeState,
    config: RobotConfig,
    imu: ImuSampler,
    inbox: Vec<Inbound>,
    pending_hello: BTreeSet<ConnId>,
    operator: Option<ConnId>,
    consoles: BTreeSet<ConnId>,
    upstream: Option<ConnId>,
    last_rx_ms: Option<u64>,
    next_telemetry_ms: f64,
}

impl RobotNode {
    pub fn new(model: ProbeModel, config: RobotConfig) -> Self {
        let state = model.initial_state();
        let imu = ImuSampler::new(config.imu, config.imu_seed);
        RobotNode {
            model,
            state,
            config,
            imu,
            inbox: Vec::new(),
            pending_hello: BTreeSet::new(),
            operator: None,
            consoles: BTreeSet::new(),
            upstream: None,
            last_rx_ms: None,
            next_telemetry_ms: 0.0,
        }
    }

    pub fn model(&self) -> &ProbeModel {
        &self.model
    }

    pub fn state(&self) -> &ProbeState {
        &self.state
    }

    /// Replaces the probe state, e.g. to stage an experiment.
    pub fn state_mut(&mut self) -> &mut ProbeState {
        &mut self.state
    }

    pub fn config(&self) -> &RobotConfig {
        &self.config
    }

    pub fn operator(&self) -> Option<ConnId> {
        self.operator.or(self.upstream)
    }

    pub fn clock_ms(&self) -> u64 {
        self.state.clock_ms()
    }

    /// A transport connection opened. In station mode this is the relay link
    /// and the robot registers itself straight away.
    pub fn on_connect(&mut self, conn: ConnId) -> Vec<RobotOutput> {
        match &self.config.mode {
            RobotMode::AccessPoint => {
                self.pending_hello.insert(conn);
                Vec::new()
            }
            RobotMode::Station { session } => {
                self.upstream = Some(conn);
                let hello = Frame::hello(Role::Robot, session.clone());
                alloc::vec![RobotOutput::Send { conn, frame: hello }]
            }
        }
    }

    pub fn on_frame(&mut self, conn: ConnId, frame: Frame, now_ms: u64) {
        self.inbox.push(Inbound::Frame { conn, frame, at_ms: now_ms });
    }

    /// A line that failed to decode is answered at once; the stream carries
    /// on with the next line.
    pub fn on_decode_error(&mut self, conn: ConnId, err: &DecodeError, now_ms: u64) -> Vec<RobotOutput> {
        alloc::vec![
            RobotOutput::Send {
                conn,
                frame: Frame::error(err.code(), alloc::format!("{err}")),
            },
            RobotOutput::Event(RobotEvent::BadFrame {
                conn,
                code: err.code(),
                at_ms: now_ms,
            }),
        ]
    }

    pub fn on_disconnect(&mut self, conn: ConnId) {
        self.inbox.push(Inbound::Gone { conn });
    }

    /// Advances the probe to `now_ms`, applies everything received since the
    /// previous tick, runs the watchdog and emits telemetry when due.
    pub fn tick(&mut self, now_ms: u64) -> Vec<RobotOutput> {
        let mut out = Vec::new();
        let dt = now_ms.saturating_sub(self.state.clock_ms());
        self.model.advance(&mut self.state, dt);

        for inbound in core::mem::take(&mut self.inbox) {
            match inbound {
                Inbound::Frame { conn, frame, at_ms } => self.handle(conn, frame, at_ms, now_ms, &mut out),
                Inbound::Gone { conn } => self.drop_conn(conn, now_ms, &mut out),
            }
        }

        if let Some(last) = self.last_rx_ms {
            if now_ms >= last + self.config.watchdog_ms {
                self.model.stop_all(&mut self.state);
                self.last_rx_ms = None;
                out.push(RobotOutput::Event(RobotEvent::Failsafe {
                    at_ms: now_ms,
                    last_rx_ms: last,
                }));
            }
        }

        if self.config.telemetry_hz > 0.0 && now_ms as f64 >= self.next_telemetry_ms {
            let period = 1000.0 / self.config.telemetry_hz;
            while self.next_telemetry_ms <= now_ms as f64 {
                self.next_telemetry_ms += period;
            }
            let pose = self.model.tip_pose(&self.state);
            let reading = self.imu.sample(&pose, now_ms);
            for conn in self.telemetry_targets() {
                out.push(RobotOutput::Send {
                    conn,
                    frame: Frame::Imu(reading),
                });
            }
        }
        out
    }

    fn telemetry_targets(&self) -> Vec<ConnId> {
        match self.config.mode {
            RobotMode::AccessPoint => self.operator.iter().chain(self.consoles.iter()).copied().collect(),
            RobotMode::Station { .. } => self.upstream.into_iter().collect(),
        }
    }

    fn handle(&mut self, conn: ConnId, frame: Frame, at_ms: u64, now_ms: u64, out: &mut Vec<RobotOutput>) {
        let from_operator = self.operator == Some(conn) || self.upstream == Some(conn);
        match frame {
            Frame::Hello(h) => self.hello(conn, h, now_ms, out),
            Frame::Cmd(c) if from_operator => {
                self.last_rx_ms = Some(at_ms);
                self.apply(conn, c, now_ms, out);
            }
            Frame::Heartbeat(h) if from_operator => {
                self.last_rx_ms = Some(at_ms);
                out.push(RobotOutput::Send {
                    conn,
                    frame: Frame::Ack(Ack {
                        ack_seq: h.seq,
                        ts_ms: now_ms,
                    }),
                });
            }
            Frame::Cmd(_) | Frame::Heartbeat(_) => {
                let code = if self.consoles.contains(&conn) {
                    "readonly"
                } else {
                    "nohello"
                };
                self.reject(conn, code, false, now_ms, out);
            }
            Frame::Error(e) => out.push(RobotOutput::Event(RobotEvent::PeerError {
                conn,
                code: e.code,
                detail: e.detail,
                at_ms: now_ms,
            })),
            // telemetry and acks are never addressed to the robot
            Frame::Imu(_) | Frame::Ack(_) => {}
        }
    }

    fn hello(&mut self, conn: ConnId, hello: Hello, now_ms: u64, out: &mut Vec<RobotOutput>) {
        if hello.proto_version != PROTO_VERSION {
            self.reject(conn, "version", true, now_ms, out);
            return;
        }
        if self.config.mode != RobotMode::AccessPoint {
            // a relay does not introduce itself; ignore stray greetings
            return;
        }
        if !self.pending_hello.remove(&conn) {
            return;
        }
        match hello.role {
            Role::Operator if self.operator.is_some() => self.reject(conn, "busy", true, now_ms, out),
            Role::Operator => {
                self.operator = Some(conn);
                self.last_rx_ms = Some(now_ms);
                out.push(RobotOutput::Send {
                    conn,
                    frame: Frame::hello(Role::Robot, hello.session),
                });
                out.push(RobotOutput::Event(RobotEvent::OperatorAttached { conn, at_ms: now_ms }));
            }
            Role::Console => {
                self.consoles.insert(conn);
                out.push(RobotOutput::Send {
                    conn,
                    frame: Frame::hello(Role::Robot, hello.session),
                });
                out.push(RobotOutput::Event(RobotEvent::ConsoleAttached { conn, at_ms: now_ms }));
            }
            Role::Robot => self.reject(conn, "role", true, now_ms, out),
        }
    }

    fn reject(&mut self, conn: ConnId, code: &'static str, close: bool, now_ms: u64, out: &mut Vec<RobotOutput>) {
        let detail = match code {
            "busy" => "another operator is connected",
            "version" => "unsupported protocol version",
            "readonly" => "console connections cannot send commands",
            "nohello" => "send hello first",
            "role" => "robots do not connect to robots",
            _ => "",
        };
        out.push(RobotOutput::Send {
            conn,
            frame: Frame::error(code, detail),
        });
        if close {
            self.pending_hello.remove(&conn);
            out.push(RobotOutput::Close { conn });
        }
        out.push(RobotOutput::Event(RobotEvent::Rejected { conn, code, at_ms: now_ms }));
    }

    fn apply(&mut self, conn: ConnId, c: Command, now_ms: u64, out: &mut Vec<RobotOutput>) {
        let blocked = c.on && self.model.reversal_blocked(&self.state, c.axis, c.dir);
        self.model.apply_axis_command(&mut self.state, c.axis, c.dir, c.on);
        out.push(RobotOutput::Event(RobotEvent::Applied(AppliedCommand {
            at_ms: now_ms,
            conn,
            command: c,
            blocked,
        })));
    }

    fn drop_conn(&mut self, conn: ConnId, now_ms: u64, out: &mut Vec<RobotOutput>) {
        self.pending_hello.remove(&conn);
        self.consoles.remove(&conn);
        if self.operator == Some(conn) || self.upstream == Some(conn) {
            if self.operator == Some(conn) {
                self.operator = None;
            } else {
                self.upstream = None;
            }
            self.model.stop_all(&mut self.state);
            self.last_rx_ms = None;
            out.push(RobotOutput::Event(RobotEvent::OperatorDetached { conn, at_ms: now_ms }));
        }
    }

    /// Engages or stops one axis directly, bypassing the network. Used by
    /// local drivers such as the sweep experiment.
    pub fn command_local(&mut self, axis: AxisId, dir: Direction, on: bool) {
        self.model.apply_axis_command(&mut self.state, axis, dir, on);
    }
}
