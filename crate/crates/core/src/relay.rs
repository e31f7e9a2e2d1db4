//! Cloud relay as a sans-IO state machine.
//!
//! A robot registers a session with `hello`; an operator and any number of
//! read-only consoles then join it by name. Operator frames travel up to the
//! robot and robot frames travel down to the operator and consoles, each
//! direction through its own [`DelayLine`]. Delayed frames wait in the relay
//! until [`RelayNode::poll`] is called at or after their dispatch time.

use alloc::collections::{BTreeMap, BTreeSet, BinaryHeap};
use alloc::string::String;
use alloc::vec::Vec;
use core::cmp::Reverse;

use crate::impair::{DelayLine, ImpairmentModel, LinkStats, RttTracker};
use crate::protocol::{DecodeError, Frame, Hello, Role};
use crate::{ConnId, PROTO_VERSION};

/// Salts for the two directions of a link. Shared with direct links so both
/// topologies draw the same delays for the same frames.
pub const UPLINK_SALT: u64 = 1;
pub const DOWNLINK_SALT: u64 = 2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelayConfig {
    /// Operator to robot.
    pub up: ImpairmentModel,
    /// Robot to operator and consoles.
    pub down: ImpairmentModel,
}

impl RelayConfig {
    pub fn symmetric(model: ImpairmentModel) -> Self {
        RelayConfig { up: model, down: model }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RelayEvent {
    SessionOpened { session: String, robot: ConnId },
    SessionClosed { session: String },
    Joined { session: String, conn: ConnId, role: Role },
    Left { session: String, conn: ConnId },
    Rejected { conn: ConnId, code: &'static str },
    BadFrame { conn: ConnId, code: &'static str },
}

#[derive(Debug, Clone, PartialEq)]
pub enum RelayOutput {
    Send { conn: ConnId, frame: Frame },
    Close { conn: ConnId },
    Event(RelayEvent),
}

#[derive(Debug, Clone)]
struct Session {
    robot: Option<ConnId>,
    operator: Option<ConnId>,
    consoles: BTreeSet<ConnId>,
    up: DelayLine,
    down: DelayLine,
    stats: LinkStats,
    rtt: RttTracker,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Leg {
    Up,
    Down,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
struct Pending {
    at_us: u64,
    order: u64,
    session: String,
    leg: Leg,
    frame_idx: usize,
}

#[derive(Debug, Clone)]
pub struct RelayNode {
    config: RelayConfig,
    sessions: BTreeMap<String, Session>,
    members: BTreeMap<ConnId, (String, Role)>,
    queue: BinaryHeap<Reverse<Pending>>,
    frames: BTreeMap<usize, Frame>,
    next_frame: usize,
    order: u64,
}

impl RelayNode {
    pub fn new(config: RelayConfig) -> Self {
        RelayNode {
            config,
            sessions: BTreeMap::new(),
            members: BTreeMap::new(),
            queue: BinaryHeap::new(),
            frames: BTreeMap::new(),
            next_frame: 0,
            order: 0,
        }
    }

    pub fn config(&self) -> &RelayConfig {
        &self.config
    }

    pub fn link_stats(&self, session: &str) -> Option<&LinkStats> {
        self.sessions.get(session).map(|s| &s.stats)
    }

    pub fn sessions(&self) -> impl Iterator<Item = &str> {
        self.sessions.keys().map(String::as_str)
    }

    /// Earliest time a delayed frame becomes due.
    pub fn next_deadline(&self) -> Option<u64> {
        self.queue.peek().map(|Reverse(p)| p.at_us)
    }

    pub fn on_decode_error(&mut self, conn: ConnId, err: &DecodeError) -> Vec<RelayOutput> {
        alloc::vec![
            RelayOutput::Send {
                conn,
                frame: Frame::error(err.code(), alloc::format!("{err}")),
            },
            RelayOutput::Event(RelayEvent::BadFrame { conn, code: err.code() }),
        ]
    }

    pub fn on_frame(&mut self, conn: ConnId, frame: Frame, now_us: u64) -> Vec<RelayOutput> {
        let mut out = Vec::new();
        if let Frame::Hello(h) = frame {
            self.hello(conn, h, &mut out);
            return out;
        }
        let Some((name, role)) = self.members.get(&conn).cloned() else {
            reject(conn, "nohello", "send hello first", false, &mut out);
            return out;
        };
        let session = self.sessions.get_mut(&name).expect("members always belong to a live session");
        let leg = match (role, &frame) {
            (Role::Operator, Frame::Cmd(_) | Frame::Heartbeat(_)) => Leg::Up,
            (Role::Robot, Frame::Imu(_) | Frame::Ack(_) | Frame::Error(_)) => Leg::Down,
            (Role::Console, Frame::Cmd(_) | Frame::Heartbeat(_)) => {
                reject(conn, "readonly", "console connections cannot send commands", false, &mut out);
                return out;
            }
            _ => return out,
        };
        if leg == Leg::Up && session.robot.is_none() {
            reject(conn, "nosession", "the robot for this session is offline", false, &mut out);
            return out;
        }
        if let Frame::Heartbeat(h) = &frame {
            session.rtt.sent(h.seq, now_us);
        }
        let line = match leg {
            Leg::Up => &mut session.up,
            Leg::Down => &mut session.down,
        };
        match line.schedule(now_us, &frame) {
            Some(at_us) => {
                let idx = self.next_frame;
                self.next_frame += 1;
                self.frames.insert(idx, frame);
                self.order += 1;
                self.queue.push(Reverse(Pending {
                    at_us,
                    order: self.order,
                    session: name,
                    leg,
                    frame_idx: idx,
                }));
            }
            None => session.stats.frames_dropped += 1,
        }
        out
    }

    /// Releases every frame due at or before `now_us`.
    pub fn poll(&mut self, now_us: u64) -> Vec<RelayOutput> {
        let mut out = Vec::new();
        while let Some(Reverse(p)) = self.queue.peek() {
            if p.at_us > now_us {
                break;
            }
            let Reverse(p) = self.queue.pop().expect("peeked");
            let frame = self.frames.remove(&p.frame_idx).expect("queued frame stored");
            let Some(session) = self.sessions.get_mut(&p.session) else {
                continue;
            };
            session.rtt.expire(p.at_us, &mut session.stats);
            let targets: Vec<ConnId> = match (p.leg, &frame) {
                (Leg::Up, _) => session.robot.into_iter().collect(),
                (Leg::Down, Frame::Imu(_)) => session.operator.iter().chain(session.consoles.iter()).copied().collect(),
                (Leg::Down, _) => session.operator.into_iter().collect(),
            };
            if let Frame::Ack(a) = &frame {
                session.rtt.acked(a.ack_seq, p.at_us, &mut session.stats);
            }
            if targets.is_empty() {
                continue;
            }
            session.stats.frames_forwarded += 1;
            for conn in targets {
                out.push(RelayOutput::Send {
                    conn,
                    frame: frame.clone(),
                });
            }
        }
        out
    }

    pub fn on_disconnect(&mut self, conn: ConnId) -> Vec<RelayOutput> {
        let mut out = Vec::new();
        let Some((name, role)) = self.members.remove(&conn) else {
            return out;
        };
        let Some(session) = self.sessions.get_mut(&name) else {
            return out;
        };
        match role {
            Role::Robot => session.robot = None,
            Role::Operator => session.operator = None,
            Role::Console => {
                session.consoles.remove(&conn);
            }
        }
        out.push(RelayOutput::Event(RelayEvent::Left {
            session: name.clone(),
            conn,
        }));
        if session.robot.is_none() && session.operator.is_none() && session.consoles.is_empty() {
            self.sessions.remove(&name);
            out.push(RelayOutput::Event(RelayEvent::SessionClosed { session: name }));
        }
        out
    }

    fn hello(&mut self, conn: ConnId, h: Hello, out: &mut Vec<RelayOutput>) {
        if h.proto_version != PROTO_VERSION {
            reject(conn, "version", "unsupported protocol version", true, out);
            return;
        }
        if self.members.contains_key(&conn) {
            return;
        }
        let name = h.session;
        match h.role {
            Role::Robot => {
                let config = self.config;
                let session = self.sessions.entry(name.clone()).or_insert_with(|| Session {
                    robot: None,
                    operator: None,
                    consoles: BTreeSet::new(),
                    up: DelayLine::new(config.up, UPLINK_SALT),
                    down: DelayLine::new(config.down, DOWNLINK_SALT),
                    stats: LinkStats::default(),
                    rtt: RttTracker::default(),
                });
                if session.robot.is_some() {
                    reject(conn, "busy", "a robot already serves this session", true, out);
                    return;
                }
                session.robot = Some(conn);
                self.members.insert(conn, (name.clone(), Role::Robot));
                out.push(RelayOutput::Event(RelayEvent::SessionOpened { session: name, robot: conn }));
            }
            role @ (Role::Operator | Role::Console) => {
                let Some(session) = self.sessions.get_mut(&name).filter(|s| s.robot.is_some()) else {
                    reject(conn, "nosession", "no robot has registered this session", true, out);
                    return;
                };
                if role == Role::Operator {
                    if session.operator.is_some() {
                        reject(conn, "busy", "another operator is connected", true, out);
                        return;
                    }
                    session.operator = Some(conn);
                } else {
                    session.consoles.insert(conn);
                }
                self.members.insert(conn, (name.clone(), role));
                out.push(RelayOutput::Send {
                    conn,
                    frame: Frame::hello(Role::Robot, name.clone()),
                });
                out.push(RelayOutput::Event(RelayEvent::Joined { session: name, conn, role }));
            }
        }
    }
}

fn reject(conn: ConnId, code: &'static str, detail: &str, close: bool, out: &mut Vec<RelayOutput>) {
    out.push(RelayOutput::Send {
        conn,
        frame: Frame::error(code, detail),
    });
    if close {
        out.push(RelayOutput::Close { conn });
    }
    out.push(RelayOutput::Event(RelayEvent::Rejected { conn, code }));
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::axis::{AxisId, Direction};
    use crate::imu::ImuReading;
    use crate::protocol::{Ack, Command, Heartbeat};

    const ROBOT: ConnId = 1;
    const OP: ConnId = 2;

    fn paired(config: RelayConfig) -> RelayNode {
        let mut r = RelayNode::new(config);
        r.on_frame(ROBOT, Frame::hello(Role::Robot, "s"), 0);
        r.on_frame(OP, Frame::hello(Role::Operator, "s"), 0);
        r
    }

    fn cmd(seq: u64) -> Frame {
        Frame::Cmd(Command {
            axis: AxisId::SteerLR,
            dir: Direction::Positive,
            on: seq % 2 == 1,
            seq,
            ts_ms: seq,
        })
    }

    fn imu(seq: u64) -> Frame {
        Frame::Imu(ImuReading {
            roll_deg: 0.0,
            pitch_deg: 0.0,
            yaw_deg: 0.0,
            seq,
            ts_ms: seq,
        })
    }

    fn sends(out: &[RelayOutput]) -> Vec<(ConnId, Frame)> {
        out.iter()
            .filter_map(|o| match o {
                RelayOutput::Send { conn, frame } => Some((*conn, frame.clone())),
                _ => None,
            })
            .collect()
    }

    #[test]
    fn unknown_session_is_refused() {
        let mut r = RelayNode::new(RelayConfig::symmetric(ImpairmentModel::none()));
        let out = r.on_frame(OP, Frame::hello(Role::Operator, "nope"), 0);
        assert!(matches!(&sends(&out)[0].1, Frame::Error(e) if e.code == "nosession"));
        assert!(out.contains(&RelayOutput::Close { conn: OP }));
    }

    #[test]
    fn zero_impairment_forwards_in_order_at_once() {
        let mut r = paired(RelayConfig::symmetric(ImpairmentModel::none()));
        let frames: Vec<Frame> = (1..=20).map(cmd).collect();
        for f in &frames {
            assert!(r.on_frame(OP, f.clone(), 100).is_empty());
        }
        let out = sends(&r.poll(100));
        assert_eq!(out.len(), 20);
        assert!(out.iter().all(|(c, _)| *c == ROBOT));
        let got: Vec<Frame> = out.into_iter().map(|(_, f)| f).collect();
        assert_eq!(got, frames);
    }

    #[test]
    fn delayed_frames_wait_for_their_time() {
        let model = ImpairmentModel {
            base_delay_ms: 20.0,
            jitter_ms: 0.0,
            telemetry_drop_prob: 0.0,
            seed: 0,
        };
        let mut r = paired(RelayConfig::symmetric(model));
        r.on_frame(OP, cmd(1), 1_000);
        assert_eq!(r.next_deadline(), Some(21_000));
        assert!(r.poll(20_999).is_empty());
        assert_eq!(sends(&r.poll(21_000)).len(), 1);
    }

    #[test]
    fn telemetry_reaches_operator_and_consoles() {
        let mut r = paired(RelayConfig::symmetric(ImpairmentModel::none()));
        r.on_frame(3, Frame::hello(Role::Console, "s"), 0);
        r.on_frame(ROBOT, imu(1), 10);
        r.on_frame(ROBOT, Frame::Ack(Ack { ack_seq: 1, ts_ms: 0 }), 10);
        let targets: Vec<ConnId> = sends(&r.poll(10)).into_iter().map(|(c, _)| c).collect();
        assert_eq!(targets, [OP, 3, OP]);
    }

    #[test]
    fn console_is_read_only_and_second_operator_busy() {
        let mut r = paired(RelayConfig::symmetric(ImpairmentModel::none()));
        r.on_frame(3, Frame::hello(Role::Console, "s"), 0);
        let out = r.on_frame(3, cmd(1), 0);
        assert!(matches!(&sends(&out)[0].1, Frame::Error(e) if e.code == "readonly"));
        let out = r.on_frame(4, Frame::hello(Role::Operator, "s"), 0);
        assert!(matches!(&sends(&out)[0].1, Frame::Error(e) if e.code == "busy"));
    }

    #[test]
    fn heartbeat_rtt_through_the_relay() {
        let model = ImpairmentModel {
            base_delay_ms: 20.0,
            jitter_ms: 0.0,
            telemetry_drop_prob: 0.0,
            seed: 0,
        };
        let mut r = paired(RelayConfig::symmetric(model));
        r.on_frame(OP, Frame::Heartbeat(Heartbeat { seq: 1, ts_ms: 0 }), 0);
        r.poll(20_000);
        r.on_frame(ROBOT, Frame::Ack(Ack { ack_seq: 1, ts_ms: 20 }), 25_000);
        r.poll(45_000);
        assert_eq!(r.link_stats("s").unwrap().rtt_ms, [45.0]);
    }

    #[test]
    fn robot_loss_refuses_commands_and_closing_frees_the_session() {
        let mut r = paired(RelayConfig::symmetric(ImpairmentModel::none()));
        r.on_disconnect(ROBOT);
        let out = r.on_frame(OP, cmd(1), 0);
        assert!(matches!(&sends(&out)[0].1, Frame::Error(e) if e.code == "nosession"));
        let out = r.on_disconnect(OP);
        assert!(out.contains(&RelayOutput::Event(RelayEvent::SessionClosed { session: "s".into() })));
        assert_eq!(r.sessions().count(), 0);
    }
}
