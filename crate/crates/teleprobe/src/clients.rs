//! Clients for the virtual network: the scripted target-reaching operator
//! and the open-loop command sequences of the mode-timing experiment.

use teleprobe_core::axis::{AxisId, Direction};
use teleprobe_core::operator::{OperatorConfig, OperatorOutput, OperatorSession, SegmentRecord, TaskOutcome};
use teleprobe_core::protocol::{Command, Frame, Heartbeat, Role};

use crate::vnet::Client;

pub struct OperatorClient {
    session: OperatorSession,
    segments: Vec<SegmentRecord>,
    outcome: Option<TaskOutcome>,
}

impl OperatorClient {
    pub fn new(config: OperatorConfig) -> Self {
        OperatorClient {
            session: OperatorSession::new(config),
            segments: Vec::new(),
            outcome: None,
        }
    }

    pub fn session(&self) -> &OperatorSession {
        &self.session
    }

    pub fn segments(&self) -> &[SegmentRecord] {
        &self.segments
    }

    pub fn outcome(&self) -> Option<TaskOutcome> {
        self.outcome
    }

    pub fn into_segments(self) -> Vec<SegmentRecord> {
        self.segments
    }

    fn collect(&mut self, out: Vec<OperatorOutput>) -> Vec<Frame> {
        let mut frames = Vec::new();
        for o in out {
            match o {
                OperatorOutput::Send(f) => frames.push(f),
                OperatorOutput::Segment(s) => self.segments.push(s),
                OperatorOutput::Finished(outcome) => self.outcome = Some(outcome),
            }
        }
        frames
    }
}

impl Client for OperatorClient {
    fn start(&mut self, now_ms: u64) -> Vec<Frame> {
        let out = self.session.start(now_ms);
        self.collect(out)
    }

    fn on_frame(&mut self, frame: &Frame, now_ms: u64) -> Vec<Frame> {
        let out = self.session.on_frame(frame, now_ms);
        self.collect(out)
    }

    fn tick(&mut self, now_ms: u64) -> Vec<Frame> {
        let out = self.session.tick(now_ms);
        self.collect(out)
    }

    fn next_wakeup_ms(&self) -> Option<u64> {
        self.session.next_wakeup_ms()
    }

    fn is_done(&self) -> bool {
        self.session.is_done()
    }

    fn on_applied(&mut self, seq: u64, blocked: bool) {
        self.session.on_applied(seq, blocked);
    }
}

/// One press of one axis.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Press {
    pub axis: AxisId,
    pub dir: Direction,
    pub hold_ms: u64,
}

/// Sends a fixed list of presses on a fixed timetable, regardless of what
/// comes back, with heartbeats in between.
#[derive(Debug, Clone)]
pub struct SequenceClient {
    /// (send time, frame) in order.
    plan: Vec<(u64, Frame)>,
    next: usize,
    next_heartbeat_ms: u64,
    heartbeat_period_ms: u64,
    end_ms: u64,
    seq: u64,
    sent: Vec<(u64, Command)>,
    session: String,
}

impl SequenceClient {
    /// Presses run one after another from `start_ms`, with `gap_ms` between
    /// a release and the next press.
    pub fn new(presses: &[Press], start_ms: u64, gap_ms: u64, session: &str) -> Self {
        let mut plan = Vec::new();
        let mut t = start_ms;
        for p in presses {
            plan.push((t, p.axis, p.dir, true));
            t += p.hold_ms;
            plan.push((t, p.axis, p.dir, false));
            t += gap_ms;
        }
        Self::from_timetable(&plan, session)
    }

    /// Commands at explicit times. Entries must be in time order.
    pub fn from_timetable(entries: &[(u64, AxisId, Direction, bool)], session: &str) -> Self {
        let mut plan = Vec::with_capacity(entries.len());
        // heartbeats share the sequence space, so number commands later
        for &(t, axis, dir, on) in entries {
            plan.push((t, Frame::Cmd(Command { axis, dir, on, seq: 0, ts_ms: t })));
        }
        let end_ms = entries.last().map_or(0, |e| e.0);
        SequenceClient {
            plan,
            next: 0,
            next_heartbeat_ms: 0,
            heartbeat_period_ms: 1000,
            end_ms,
            seq: 0,
            sent: Vec::new(),
            session: session.to_string(),
        }
    }

    /// Commands actually sent, with their send times.
    pub fn sent(&self) -> &[(u64, Command)] {
        &self.sent
    }

    /// Send time of the last planned command.
    pub fn planned_end_ms(&self) -> u64 {
        self.end_ms
    }

    pub fn first_command_ms(&self) -> Option<u64> {
        self.sent.first().map(|c| c.0)
    }

    fn due(&mut self, now_ms: u64) -> Vec<Frame> {
        let mut out = Vec::new();
        loop {
            let cmd_due = self.plan.get(self.next).filter(|p| p.0 <= now_ms).map(|p| p.0);
            let hb_due = (self.next_heartbeat_ms <= now_ms && self.next_heartbeat_ms <= self.end_ms)
                .then_some(self.next_heartbeat_ms);
            match (cmd_due, hb_due) {
                (None, None) => break,
                (Some(c), Some(h)) if h < c => self.heartbeat(h, &mut out),
                (Some(_), _) => {
                    let (t, frame) = self.plan[self.next].clone();
                    self.next += 1;
                    if let Frame::Cmd(mut c) = frame {
                        self.seq += 1;
                        c.seq = self.seq;
                        self.sent.push((t, c));
                        out.push(Frame::Cmd(c));
                    }
                }
                (None, Some(h)) => self.heartbeat(h, &mut out),
            }
        }
        out
    }

    fn heartbeat(&mut self, at_ms: u64, out: &mut Vec<Frame>) {
        self.seq += 1;
        out.push(Frame::Heartbeat(Heartbeat { seq: self.seq, ts_ms: at_ms }));
        self.next_heartbeat_ms = at_ms + self.heartbeat_period_ms;
    }
}

impl Client for SequenceClient {
    fn start(&mut self, now_ms: u64) -> Vec<Frame> {
        let mut out = vec![Frame::hello(Role::Operator, self.session.clone())];
        out.extend(self.due(now_ms));
        out
    }

    fn on_frame(&mut self, _frame: &Frame, _now_ms: u64) -> Vec<Frame> {
        Vec::new()
    }

    fn tick(&mut self, now_ms: u64) -> Vec<Frame> {
        self.due(now_ms)
    }

    fn next_wakeup_ms(&self) -> Option<u64> {
        let cmd = self.plan.get(self.next).map(|p| p.0);
        let hb = (self.next_heartbeat_ms <= self.end_ms).then_some(self.next_heartbeat_ms);
        match (cmd, hb) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }

    fn is_done(&self) -> bool {
        self.next >= self.plan.len()
    }
}
