//! Deterministic virtual-time network: one robot, one client, and in station
//! mode a relay between them.
//!
//! Events are ordered by time, then by class (frame deliveries before client
//! wakeups before robot ticks), then by insertion. The class order makes a
//! frame that lands exactly on a tick boundary behave the same whether it
//! came over a direct link or through the relay.

use std::collections::BTreeMap;
use std::time::{Duration, Instant};

use teleprobe_core::impair::{DelayLine, ImpairmentModel};
use teleprobe_core::probe::TICK_MS;
use teleprobe_core::protocol::Frame;
use teleprobe_core::relay::{RelayConfig, RelayNode, RelayOutput, DOWNLINK_SALT, UPLINK_SALT};
use teleprobe_core::robot::{RobotConfig, RobotEvent, RobotNode, RobotOutput};
use teleprobe_core::{ConnId, ProbeModel};

/// The client's connection id, on the robot in access-point mode and on the
/// relay in station mode.
pub const CLIENT_CONN: ConnId = 1;
/// The robot's link to the relay.
pub const ROBOT_CONN: ConnId = 2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Topology {
    /// Client talks to the robot directly.
    AccessPoint,
    /// Client and robot both talk to a relay.
    Station,
}

impl Topology {
    pub fn label(self) -> &'static str {
        match self {
            Topology::AccessPoint => "AP",
            Topology::Station => "STA",
        }
    }
}

/// Something that drives the robot over the wire.
pub trait Client {
    /// Called once at time zero.
    fn start(&mut self, now_ms: u64) -> Vec<Frame>;
    fn on_frame(&mut self, frame: &Frame, now_ms: u64) -> Vec<Frame>;
    fn tick(&mut self, now_ms: u64) -> Vec<Frame>;
    fn next_wakeup_ms(&self) -> Option<u64>;
    fn is_done(&self) -> bool;
    /// Ground truth from the plant: command `seq` was applied.
    fn on_applied(&mut self, _seq: u64, _blocked: bool) {}
    /// The far end closed the connection.
    fn on_closed(&mut self, _now_ms: u64) {}
}

#[derive(Debug, Clone)]
pub struct SimConfig {
    pub topology: Topology,
    pub impairment: ImpairmentModel,
    pub session: String,
    pub robot: RobotConfig,
    /// Record the probe state after every tick.
    pub record_trajectory: bool,
    /// Hold each event back until the same span of real time has passed.
    pub wall_clock: bool,
}

impl SimConfig {
    pub fn new(topology: Topology, impairment: ImpairmentModel) -> Self {
        let session = "sim".to_string();
        let robot = match topology {
            Topology::AccessPoint => RobotConfig::access_point(),
            Topology::Station => RobotConfig::station(session.clone()),
        };
        SimConfig {
            topology,
            impairment,
            session,
            robot,
            record_trajectory: false,
            wall_clock: false,
        }
    }

    pub fn with_imu_seed(mut self, seed: u64) -> Self {
        self.robot.imu_seed = seed;
        self
    }
}

/// Probe state after one tick: time, step positions, steering tip angles.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryPoint {
    pub t_ms: u64,
    pub positions: [i64; 4],
    pub tips: [f64; 2],
    pub engaged: [i8; 4],
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Class {
    Network = 0,
    Client = 1,
    Robot = 2,
}

#[derive(Debug, Clone)]
enum Event {
    ToRobot(ConnId, Frame),
    ToRelay(ConnId, Frame),
    ToClient(Frame),
    RelayWake,
    ClientWake,
    RobotTick,
    /// The client's transport goes away.
    ClientGone,
    /// Frames from the client stop arriving, without a disconnect.
    CutUplink,
}

pub struct SimNet<C: Client> {
    config: SimConfig,
    now_us: u64,
    order: u64,
    queue: BTreeMap<(u64, Class, u64), Event>,
    robot: RobotNode,
    relay: Option<RelayNode>,
    client: C,
    client_connected: bool,
    uplink_cut: bool,
    direct_up: DelayLine,
    direct_down: DelayLine,
    client_wake_at: Option<u64>,
    robot_events: Vec<RobotEvent>,
    trajectory: Vec<TrajectoryPoint>,
    operator_rx_ms: Vec<u64>,
    started: Option<Instant>,
}

impl<C: Client> SimNet<C> {
    pub fn new(model: ProbeModel, config: SimConfig, client: C) -> Self {
        let robot = RobotNode::new(model, config.robot.clone());
        let relay = (config.topology == Topology::Station)
            .then(|| RelayNode::new(RelayConfig::symmetric(config.impairment)));
        let mut net = SimNet {
            direct_up: DelayLine::new(config.impairment, UPLINK_SALT),
            direct_down: DelayLine::new(config.impairment, DOWNLINK_SALT),
            config,
            now_us: 0,
            order: 0,
            queue: BTreeMap::new(),
            robot,
            relay,
            client,
            client_connected: true,
            uplink_cut: false,
            client_wake_at: None,
            robot_events: Vec::new(),
            trajectory: Vec::new(),
            operator_rx_ms: Vec::new(),
            started: None,
        };
        net.boot();
        net
    }

    fn boot(&mut self) {
        match self.config.topology {
            Topology::AccessPoint => {
                self.robot.on_connect(CLIENT_CONN);
            }
            Topology::Station => {
                let out = self.robot.on_connect(ROBOT_CONN);
                self.route_robot(out);
            }
        }
        self.push(0, Class::Robot, Event::RobotTick);
        let frames = self.client.start(0);
        self.send_from_client(frames);
        self.schedule_client_wake();
    }

    pub fn client(&self) -> &C {
        &self.client
    }

    pub fn client_mut(&mut self) -> &mut C {
        &mut self.client
    }

    pub fn into_client(self) -> C {
        self.client
    }

    pub fn robot(&self) -> &RobotNode {
        &self.robot
    }

    pub fn robot_mut(&mut self) -> &mut RobotNode {
        &mut self.robot
    }

    pub fn relay(&self) -> Option<&RelayNode> {
        self.relay.as_ref()
    }

    pub fn robot_events(&self) -> &[RobotEvent] {
        &self.robot_events
    }

    pub fn trajectory(&self) -> &[TrajectoryPoint] {
        &self.trajectory
    }

    /// Arrival times at the robot of operator commands and heartbeats.
    pub fn operator_rx_ms(&self) -> &[u64] {
        &self.operator_rx_ms
    }

    pub fn now_ms(&self) -> u64 {
        self.now_us / 1000
    }

    pub fn session(&self) -> &str {
        &self.config.session
    }

    /// Closes the client's connection at `at_ms`.
    pub fn disconnect_client_at(&mut self, at_ms: u64) {
        self.push(at_ms * 1000, Class::Network, Event::ClientGone);
    }

    /// Silently discards client frames from `at_ms` on.
    pub fn cut_uplink_at(&mut self, at_ms: u64) {
        self.push(at_ms * 1000, Class::Network, Event::CutUplink);
    }

    fn push(&mut self, at_us: u64, class: Class, ev: Event) {
        self.order += 1;
        self.queue.insert((at_us, class, self.order), ev);
    }

    /// Runs until the client is done or virtual time passes `limit_ms`.
    /// Returns whether the client finished.
    pub fn run_until_done(&mut self, limit_ms: u64) -> bool {
        while !self.client.is_done() {
            if !self.step(limit_ms) {
                break;
            }
        }
        self.client.is_done()
    }

    /// Runs every event up to and including `until_ms`.
    pub fn run_for(&mut self, until_ms: u64) {
        while self.step(until_ms) {}
    }

    fn step(&mut self, limit_ms: u64) -> bool {
        let Some((&key, _)) = self.queue.first_key_value() else {
            return false;
        };
        if key.0 > limit_ms * 1000 {
            return false;
        }
        let ev = self.queue.remove(&key).expect("present");
        if self.config.wall_clock {
            let started = *self.started.get_or_insert_with(Instant::now);
            let due = started + Duration::from_micros(key.0);
            if let Some(wait) = due.checked_duration_since(Instant::now()) {
                std::thread::sleep(wait);
            }
        }
        self.now_us = key.0;
        self.dispatch(ev);
        true
    }

    fn dispatch(&mut self, ev: Event) {
        let now_ms = self.now_us / 1000;
        match ev {
            Event::RobotTick => {
                let out = self.robot.tick(now_ms);
                self.route_robot(out);
                if self.config.record_trajectory {
                    let s = self.robot.state();
                    let ids = teleprobe_core::AxisId::ALL;
                    let tip = |i: usize| s.hysteresis(teleprobe_core::AxisId::STEERING[i]).map_or(0.0, |h| h.tip_deg);
                    self.trajectory.push(TrajectoryPoint {
                        t_ms: now_ms,
                        positions: ids.map(|a| s.position(a)),
                        tips: [tip(0), tip(1)],
                        engaged: ids.map(|a| s.axis(a).engaged_dir()),
                    });
                }
                self.push(self.now_us + TICK_MS * 1000, Class::Robot, Event::RobotTick);
            }
            Event::ToRobot(conn, frame) => {
                if matches!(frame, Frame::Cmd(_) | Frame::Heartbeat(_)) {
                    self.operator_rx_ms.push(now_ms);
                }
                self.robot.on_frame(conn, frame, now_ms)
            }
            Event::ToRelay(conn, frame) => {
                let relay = self.relay.as_mut().expect("relay exists in station mode");
                let mut out = relay.on_frame(conn, frame, self.now_us);
                out.extend(relay.poll(self.now_us));
                self.route_relay(out);
            }
            Event::RelayWake => {
                let out = self.relay.as_mut().expect("relay exists in station mode").poll(self.now_us);
                self.route_relay(out);
            }
            Event::ToClient(frame) => {
                if self.client_connected {
                    let frames = self.client.on_frame(&frame, now_ms);
                    self.send_from_client(frames);
                    self.schedule_client_wake();
                }
            }
            Event::ClientWake => {
                self.client_wake_at = None;
                if self.client_connected {
                    let frames = self.client.tick(now_ms);
                    self.send_from_client(frames);
                }
                self.schedule_client_wake();
            }
            Event::ClientGone => {
                if self.client_connected {
                    self.client_connected = false;
                    self.client.on_closed(now_ms);
                    match self.config.topology {
                        Topology::AccessPoint => self.robot.on_disconnect(CLIENT_CONN),
                        Topology::Station => {
                            let out = self.relay.as_mut().expect("relay").on_disconnect(CLIENT_CONN);
                            self.route_relay(out);
                        }
                    }
                }
            }
            Event::CutUplink => self.uplink_cut = true,
        }
    }

    fn schedule_client_wake(&mut self) {
        if !self.client_connected {
            return;
        }
        let Some(at_ms) = self.client.next_wakeup_ms() else {
            return;
        };
        let at_us = (at_ms * 1000).max(self.now_us);
        if self.client_wake_at.is_some_and(|w| w <= at_us) {
            return;
        }
        self.client_wake_at = Some(at_us);
        self.push(at_us, Class::Client, Event::ClientWake);
    }

    fn send_from_client(&mut self, frames: Vec<Frame>) {
        if !self.client_connected || self.uplink_cut {
            return;
        }
        for frame in frames {
            match self.config.topology {
                Topology::AccessPoint => {
                    if let Some(at) = self.direct_up.schedule(self.now_us, &frame) {
                        self.push(at, Class::Network, Event::ToRobot(CLIENT_CONN, frame));
                    }
                }
                Topology::Station => self.push(self.now_us, Class::Network, Event::ToRelay(CLIENT_CONN, frame)),
            }
        }
    }

    fn route_robot(&mut self, out: Vec<RobotOutput>) {
        for o in out {
            match o {
                RobotOutput::Send { conn, frame } => match self.config.topology {
                    Topology::AccessPoint => {
                        if conn == CLIENT_CONN && self.client_connected {
                            if let Some(at) = self.direct_down.schedule(self.now_us, &frame) {
                                self.push(at, Class::Network, Event::ToClient(frame));
                            }
                        }
                    }
                    Topology::Station => self.push(self.now_us, Class::Network, Event::ToRelay(ROBOT_CONN, frame)),
                },
                RobotOutput::Close { conn } => {
                    if conn == CLIENT_CONN && self.client_connected {
                        self.client_connected = false;
                        self.client.on_closed(self.now_us / 1000);
                        self.robot.on_disconnect(CLIENT_CONN);
                    }
                }
                RobotOutput::Event(e) => {
                    if let RobotEvent::Applied(a) = &e {
                        self.client.on_applied(a.command.seq, a.blocked);
                    }
                    self.robot_events.push(e);
                }
            }
        }
    }

    fn route_relay(&mut self, out: Vec<RelayOutput>) {
        for o in out {
            match o {
                RelayOutput::Send { conn, frame } => {
                    if conn == ROBOT_CONN {
                        self.push(self.now_us, Class::Network, Event::ToRobot(ROBOT_CONN, frame));
                    } else if conn == CLIENT_CONN && self.client_connected {
                        self.push(self.now_us, Class::Network, Event::ToClient(frame));
                    }
                }
                RelayOutput::Close { conn } => {
                    if conn == CLIENT_CONN && self.client_connected {
                        self.client_connected = false;
                        self.client.on_closed(self.now_us / 1000);
                        let out = self.relay.as_mut().expect("relay").on_disconnect(CLIENT_CONN);
                        self.route_relay(out);
                    }
                }
                RelayOutput::Event(_) => {}
            }
        }
        if let Some(at) = self.relay.as_ref().and_then(RelayNode::next_deadline) {
            if at > self.now_us {
                self.push(at, Class::Network, Event::RelayWake);
            }
        }
    }
}
