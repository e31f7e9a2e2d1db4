//! Scripted operators for the target-reaching task.
//!
//! An operator samples the latest telemetry on a fixed decision cadence and
//! holds one steering axis on towards the target or releases it. Every
//! decision reaches the wire `reaction_ms` later. The release point leads the
//! target by the profile's anticipation, using the velocity seen in recent
//! telemetry projected over the reaction time plus the heartbeat round trip.
//!
//! A held button is only released, never flipped, and a released axis is not
//! pressed again until the tip has stopped. Corrections too small to stop by
//! sight become planned taps. Taps that move nothing grow longer, and a tap
//! that reverses direction adds the backlash slack learned from earlier
//! reversals.

use alloc::collections::{BTreeSet, VecDeque};
use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::axis::{AxisId, Direction};
use crate::calib::Calibration;
use crate::envelope::BacklashEnvelope;
use crate::impair::{LinkStats, RttTracker};
use crate::imu::ImuReading;
use crate::metrics::{estimate_deadband_reversals, segment_metrics, SettleDetector, SettleParams, TraceSample};
use crate::protocol::{Command, Frame, Heartbeat, Role};

pub const TARGETS_PER_SCRIPT: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OperatorProfile {
    pub name: String,
    pub reaction_ms: u64,
    pub decision_period_ms: u64,
    pub stop_threshold_deg: f64,
    pub anticipation_deg: f64,
    pub fumble_prob: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ProfileError {
    #[error("profile parse error: {0}")]
    Parse(String),
    #[error("decision period must be positive")]
    DecisionPeriod,
    #[error("stop threshold must be positive")]
    StopThreshold,
    #[error("anticipation must be a non-negative number")]
    Anticipation,
    #[error("fumble probability must be in [0, 1)")]
    Fumble,
}

impl OperatorProfile {
    pub fn from_json(text: &str) -> Result<Self, ProfileError> {
        let p: OperatorProfile = serde_json::from_str(text).map_err(|e| ProfileError::Parse(e.to_string()))?;
        p.validate()?;
        Ok(p)
    }

    pub fn to_json_pretty(&self) -> String {
        let mut out = serde_json::to_string_pretty(self).expect("profile serializes");
        out.push('\n');
        out
    }

    pub fn validate(&self) -> Result<(), ProfileError> {
        if self.decision_period_ms == 0 {
            return Err(ProfileError::DecisionPeriod);
        }
        if !(self.stop_threshold_deg.is_finite() && self.stop_threshold_deg > 0.0) {
            return Err(ProfileError::StopThreshold);
        }
        if !(self.anticipation_deg.is_finite() && self.anticipation_deg >= 0.0) {
            return Err(ProfileError::Anticipation);
        }
        if !(0.0..1.0).contains(&self.fumble_prob) {
            return Err(ProfileError::Fumble);
        }
        Ok(())
    }

    /// The same profile as performed by one participant: reaction time
    /// scaled by a factor in [0.85, 1.15] drawn from `participant_seed`.
    pub fn for_participant(&self, participant_seed: u64) -> OperatorProfile {
        let mut rng = ChaCha8Rng::seed_from_u64(participant_seed);
        let factor = rng.random_range(0.85..=1.15);
        OperatorProfile {
            reaction_ms: libm::round(self.reaction_ms as f64 * factor) as u64,
            ..self.clone()
        }
    }
}

pub const DEFAULT_STOP_THRESHOLD_DEG: f64 = 0.3;
pub const DEFAULT_ANTICIPATION_DEG: f64 = 0.3;

/// Tip speed below which a released axis counts as having come to rest.
const REST_DEG_PER_S: f64 = 1.0;

/// Shortest press an operator makes.
const MIN_TAP_MS: u64 = 50;

/// A tap that moves the tip less than this went unnoticed.
const DEAD_TAP_DEG: f64 = 0.1;

fn profile(name: &str, reaction_ms: u64, decision_period_ms: u64, fumble_prob: f64) -> OperatorProfile {
    OperatorProfile {
        name: name.into(),
        reaction_ms,
        decision_period_ms,
        stop_threshold_deg: DEFAULT_STOP_THRESHOLD_DEG,
        anticipation_deg: DEFAULT_ANTICIPATION_DEG,
        fumble_prob,
    }
}

/// manual, gamepad and joystick, in that order.
pub fn builtin_profiles() -> [OperatorProfile; 3] {
    [
        profile("manual", 120, 50, 0.0),
        profile("gamepad", 180, 100, 0.02),
        profile("joystick", 250, 100, 0.06),
    ]
}

pub fn builtin_profile(name: &str) -> Option<OperatorProfile> {
    builtin_profiles().into_iter().find(|p| p.name == name)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TargetScript {
    pub axis: AxisId,
    pub targets_deg: Vec<f64>,
    pub tolerance_deg: f64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ScriptError {
    #[error("script parse error: {0}")]
    Parse(String),
    #[error("a script needs exactly {TARGETS_PER_SCRIPT} targets, got {0}")]
    Count(usize),
    #[error("scripts drive a steering axis, not {0}")]
    Axis(AxisId),
    #[error("tolerance must be positive")]
    Tolerance,
    #[error("target {index} ({deg} deg) is outside the reachable range")]
    Unreachable { index: usize, deg: f64 },
    #[error("script lacks a move of kind: {0}")]
    MissingCategory(&'static str),
}

/// Which of the required move kinds a script contains.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct ScriptCategories {
    /// A move shorter than 2 degrees.
    pub small_adjustment: bool,
    /// A move passing through the tip level at the neutral position.
    pub crosses_zone: bool,
    /// A reversal whose travel along the new branch is shorter than the
    /// local deadband.
    pub reversal_inside: bool,
    /// A reversal whose travel reaches beyond the local deadband.
    pub reversal_outside: bool,
}

/// File form of a script; the axis is its wire code.
#[derive(Debug, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct ScriptDoc {
    axis: String,
    targets_deg: Vec<f64>,
    tolerance_deg: f64,
}

impl TargetScript {
    /// Parses a script file. Call [`TargetScript::validate`] to check it
    /// against a calibration.
    pub fn from_json(text: &str) -> Result<Self, ScriptError> {
        let doc: ScriptDoc = serde_json::from_str(text).map_err(|e| ScriptError::Parse(e.to_string()))?;
        let axis = AxisId::from_wire_code(&doc.axis).ok_or_else(|| ScriptError::Parse(format!("unknown axis {:?}", doc.axis)))?;
        Ok(TargetScript {
            axis,
            targets_deg: doc.targets_deg,
            tolerance_deg: doc.tolerance_deg,
        })
    }

    pub fn to_json_pretty(&self) -> String {
        let doc = ScriptDoc {
            axis: self.axis.wire_code().to_string(),
            targets_deg: self.targets_deg.clone(),
            tolerance_deg: self.tolerance_deg,
        };
        let mut out = serde_json::to_string_pretty(&doc).expect("script serializes");
        out.push('\n');
        out
    }

    /// Checks length, reachability and the move categories against the
    /// calibration, starting from the neutral pose.
    pub fn validate(&self, calibration: &Calibration) -> Result<ScriptCategories, ScriptError> {
        if self.targets_deg.len() != TARGETS_PER_SCRIPT {
            return Err(ScriptError::Count(self.targets_deg.len()));
        }
        let steer = calibration.steering(self.axis).ok_or(ScriptError::Axis(self.axis))?;
        if !(self.tolerance_deg.is_finite() && self.tolerance_deg > 0.0) {
            return Err(ScriptError::Tolerance);
        }
        let env = &steer.envelope;
        let (lo, hi) = env.level_range();
        if let Some((index, &deg)) = self
            .targets_deg
            .iter()
            .enumerate()
            .find(|(_, &t)| !(t.is_finite() && t > lo && t < hi))
        {
            return Err(ScriptError::Unreachable { index, deg });
        }
        let c = self.categories(env, steer.neutral_steps);
        let missing = [
            (c.small_adjustment, "small adjustment"),
            (c.crosses_zone, "move through the hysteresis zone"),
            (c.reversal_inside, "reversal inside the deadband"),
            (c.reversal_outside, "reversal outside the deadband"),
        ];
        if let Some((_, name)) = missing.iter().find(|(ok, _)| !ok) {
            return Err(ScriptError::MissingCategory(name));
        }
        Ok(c)
    }

    pub fn categories(&self, env: &BacklashEnvelope, neutral_steps: i64) -> ScriptCategories {
        let s0 = neutral_steps as f64;
        let neutral_level = 0.5 * (env.ascending(s0) + env.descending(s0));
        let mut c = ScriptCategories::default();
        let mut from = neutral_level;
        let mut last_dir: Option<Direction> = None;
        for &to in &self.targets_deg {
            let Some(dir) = Direction::towards(from, to) else {
                continue;
            };
            if (to - from).abs() < 2.0 {
                c.small_adjustment = true;
            }
            if from.min(to) < neutral_level && from.max(to) > neutral_level {
                c.crosses_zone = true;
            }
            if last_dir == Some(dir.reversed()) {
                let gap = env.gap_at_level(from).unwrap_or(0.0);
                let pos = |level: f64| match dir {
                    Direction::Positive => env.ascending_position(level),
                    Direction::Negative => env.descending_position(level),
                };
                if let (Some(a), Some(b)) = (pos(from), pos(to)) {
                    if (b - a).abs() < gap {
                        c.reversal_inside = true;
                    } else {
                        c.reversal_outside = true;
                    }
                }
            }
            last_dir = Some(dir);
            from = to;
        }
        c
    }
}

/// Built-in scripts in tip degrees for the default calibration.
///
/// Every left-right move reverses direction and most are of similar size.
/// Up-down mixes fine corrections around neutral, where its deadband sits,
/// with long excursions beyond the zone.
pub fn default_target_script(axis: AxisId) -> Option<TargetScript> {
    let targets_deg = match axis {
        AxisId::SteerLR => alloc::vec![10.0, 4.0, 5.5, -26.0, -18.0, -28.0, -20.0, -30.0, -22.0, -31.0],
        AxisId::SteerUD => alloc::vec![5.0, 6.5, 44.0, 41.0, -10.0, -8.5, 12.0, 4.0, -36.0, -20.0],
        _ => return None,
    };
    Some(TargetScript {
        axis,
        targets_deg,
        tolerance_deg: 1.0,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct SegmentRecord {
    pub index: usize,
    pub target_deg: f64,
    pub start_deg: f64,
    pub final_deg: f64,
    pub error_deg: f64,
    pub max_overshoot_deg: f64,
    pub duration_s: f64,
    pub reversal_in_deadband_count: u32,
    /// Timed out, or cut short by lost telemetry. Excluded from statistics.
    pub aborted: bool,
    pub trace: Vec<TraceSample>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TaskOutcome {
    Completed,
    /// Telemetry fell silent.
    TelemetryLost,
    /// The endpoint refused the connection.
    Refused,
}

#[derive(Debug, Clone, PartialEq)]
pub enum OperatorOutput {
    Send(Frame),
    Segment(SegmentRecord),
    Finished(TaskOutcome),
}

#[derive(Debug, Clone, PartialEq)]
pub struct OperatorConfig {
    pub profile: OperatorProfile,
    pub script: TargetScript,
    pub session: String,
    pub seed: u64,
    pub settle: SettleParams,
    pub segment_timeout_ms: u64,
    pub silence_timeout_ms: u64,
    pub heartbeat_period_ms: u64,
    /// Span of telemetry used to estimate the tip velocity.
    pub velocity_window_ms: u64,
    /// Tip speed the operator assumes before seeing any faster motion.
    pub expected_speed_deg_per_s: f64,
    /// Count deadband reversals from the plant's own record (see
    /// [`OperatorSession::on_applied`]) instead of estimating from the trace.
    pub ground_truth: bool,
}

impl OperatorConfig {
    pub fn new(profile: OperatorProfile, script: TargetScript, seed: u64) -> Self {
        OperatorConfig {
            profile,
            script,
            session: String::new(),
            seed,
            settle: SettleParams::default(),
            segment_timeout_ms: 120_000,
            silence_timeout_ms: 3_000,
            heartbeat_period_ms: 1_000,
            velocity_window_ms: 100,
            expected_speed_deg_per_s: 10.0,
            ground_truth: false,
        }
    }
}

#[derive(Debug, Clone)]
struct Segment {
    index: usize,
    start_ms: u64,
    start_deg: f64,
    trace: Vec<TraceSample>,
    detector: SettleDetector,
    last_on_dir: Option<Direction>,
    reversal_seqs: BTreeSet<u64>,
    blocked_reversals: u32,
}

/// What the operator has learned about backlash: how long a press after a
/// reversal stays without visible effect.
#[derive(Debug, Clone, Default)]
struct SlackProbe {
    learned_ms: Option<f64>,
    /// Angle at the reversal and press time accumulated since.
    open: Option<(f64, u64)>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Phase {
    Idle,
    AwaitingTelemetry,
    Running,
    Done,
}

#[derive(Debug, Clone)]
pub struct OperatorSession {
    config: OperatorConfig,
    rng: ChaCha8Rng,
    phase: Phase,
    seq: u64,
    decided: Option<Direction>,
    emitted: Option<Direction>,
    pending: VecDeque<(u64, Direction, bool)>,
    next_decision_ms: u64,
    next_heartbeat_ms: u64,
    readings: VecDeque<(u64, f64)>,
    last_reading_ms: u64,
    segment: Option<Segment>,
    next_index: usize,
    records: Vec<SegmentRecord>,
    rtt: RttTracker,
    /// Smoothed heartbeat round trip, the link lag the operator has learned.
    lag_ms: Option<f64>,
    /// Fastest tip speed seen so far.
    speed_deg_per_s: f64,
    /// No decisions before this time while a tap plays out.
    watch_until_ms: u64,
    /// Angle when the last tap was planned, and how many taps in a row
    /// have produced no visible movement.
    tap_from_deg: Option<f64>,
    dead_taps: u32,
    last_press: Option<Direction>,
    pressed_since: Option<u64>,
    slack: SlackProbe,
    link: LinkStats,
}

impl OperatorSession {
    pub fn new(config: OperatorConfig) -> Self {
        let rng = ChaCha8Rng::seed_from_u64(config.seed);
        let expected_speed = config.expected_speed_deg_per_s;
        OperatorSession {
            config,
            rng,
            phase: Phase::Idle,
            seq: 0,
            decided: None,
            emitted: None,
            pending: VecDeque::new(),
            next_decision_ms: 0,
            next_heartbeat_ms: 0,
            readings: VecDeque::new(),
            last_reading_ms: 0,
            segment: None,
            next_index: 0,
            records: Vec::new(),
            rtt: RttTracker::default(),
            lag_ms: None,
            speed_deg_per_s: expected_speed,
            watch_until_ms: 0,
            tap_from_deg: None,
            dead_taps: 0,
            last_press: None,
            pressed_since: None,
            slack: SlackProbe::default(),
            link: LinkStats::default(),
        }
    }

    pub fn config(&self) -> &OperatorConfig {
        &self.config
    }

    pub fn records(&self) -> &[SegmentRecord] {
        &self.records
    }

    pub fn link_stats(&self) -> &LinkStats {
        &self.link
    }

    pub fn is_done(&self) -> bool {
        self.phase == Phase::Done
    }

    /// Whether the operator currently holds its axis on.
    pub fn holding(&self) -> Option<Direction> {
        self.emitted
    }

    /// Greets the endpoint. The task starts with the first telemetry frame.
    pub fn start(&mut self, now_ms: u64) -> Vec<OperatorOutput> {
        self.phase = Phase::AwaitingTelemetry;
        self.last_reading_ms = now_ms;
        alloc::vec![OperatorOutput::Send(Frame::hello(Role::Operator, self.config.session.clone()))]
    }

    /// Earliest time at which [`tick`](Self::tick) has work to do.
    pub fn next_wakeup_ms(&self) -> Option<u64> {
        match self.phase {
            Phase::Idle | Phase::Done => None,
            Phase::AwaitingTelemetry => Some(self.last_reading_ms + self.config.silence_timeout_ms),
            Phase::Running => {
                let mut t = self.next_decision_ms.min(self.next_heartbeat_ms);
                if let Some(&(at, _, _)) = self.pending.front() {
                    t = t.min(at);
                }
                t = t.min(self.last_reading_ms + self.config.silence_timeout_ms);
                Some(t)
            }
        }
    }

    pub fn on_frame(&mut self, frame: &Frame, now_ms: u64) -> Vec<OperatorOutput> {
        let mut out = Vec::new();
        match frame {
            Frame::Imu(r) => self.on_reading(r, now_ms, &mut out),
            Frame::Ack(a) => {
                if let Some(rtt) = self.rtt.acked(a.ack_seq, now_ms * 1000, &mut self.link) {
                    self.lag_ms = Some(self.lag_ms.map_or(rtt, |lag| 0.8 * lag + 0.2 * rtt));
                }
            }
            Frame::Error(e) if matches!(e.code.as_str(), "busy" | "nosession" | "version") => {
                self.finish(TaskOutcome::Refused, now_ms, &mut out);
            }
            _ => {}
        }
        out
    }

    /// Ground-truth hook: the plant applied command `seq`, and `blocked`
    /// tells whether it engaged into the deadband.
    pub fn on_applied(&mut self, seq: u64, blocked: bool) {
        if let Some(seg) = &mut self.segment {
            if blocked && seg.reversal_seqs.contains(&seq) {
                seg.blocked_reversals += 1;
            }
        }
    }

    pub fn tick(&mut self, now_ms: u64) -> Vec<OperatorOutput> {
        let mut out = Vec::new();
        match self.phase {
            Phase::Idle | Phase::Done => return out,
            Phase::AwaitingTelemetry => {
                if now_ms >= self.last_reading_ms + self.config.silence_timeout_ms {
                    self.finish(TaskOutcome::TelemetryLost, now_ms, &mut out);
                }
                return out;
            }
            Phase::Running => {}
        }

        while let Some(&(at, dir, on)) = self.pending.front() {
            if at > now_ms {
                break;
            }
            self.pending.pop_front();
            self.emit(at, dir, on, &mut out);
        }

        if now_ms >= self.last_reading_ms + self.config.silence_timeout_ms {
            self.finish(TaskOutcome::TelemetryLost, now_ms, &mut out);
            return out;
        }

        if now_ms >= self.next_heartbeat_ms {
            self.seq += 1;
            self.rtt.sent(self.seq, now_ms * 1000);
            self.rtt.expire(now_ms * 1000, &mut self.link);
            out.push(OperatorOutput::Send(Frame::Heartbeat(Heartbeat {
                seq: self.seq,
                ts_ms: now_ms,
            })));
            self.next_heartbeat_ms = now_ms + self.config.heartbeat_period_ms;
        }

        if let Some(seg) = &self.segment {
            if now_ms >= seg.start_ms + self.config.segment_timeout_ms {
                self.close_segment(now_ms, true, &mut out);
                self.release_now(now_ms, &mut out);
                self.open_next_segment(now_ms, &mut out);
            }
        }

        while self.phase == Phase::Running && now_ms >= self.next_decision_ms {
            let at = self.next_decision_ms;
            self.next_decision_ms += self.config.profile.decision_period_ms;
            self.decide(at);
        }
        out
    }

    fn target(&self) -> Option<f64> {
        let seg = self.segment.as_ref()?;
        self.config.script.targets_deg.get(seg.index).copied()
    }

    fn angle_of(&self, r: &ImuReading) -> f64 {
        match self.config.script.axis {
            AxisId::SteerUD => r.pitch_deg,
            AxisId::SteerLR => r.yaw_deg,
            AxisId::Rotation => r.roll_deg,
            AxisId::Translation => 0.0,
        }
    }

    fn on_reading(&mut self, r: &ImuReading, now_ms: u64, out: &mut Vec<OperatorOutput>) {
        if matches!(self.phase, Phase::Idle | Phase::Done) {
            return;
        }
        let angle = self.angle_of(r);
        self.last_reading_ms = now_ms;
        self.readings.push_back((now_ms, angle));
        let keep_from = now_ms.saturating_sub(4 * self.config.velocity_window_ms);
        while self.readings.front().is_some_and(|&(t, _)| t < keep_from) {
            self.readings.pop_front();
        }

        if self.phase == Phase::AwaitingTelemetry {
            self.phase = Phase::Running;
            self.next_decision_ms = now_ms;
            self.next_heartbeat_ms = now_ms;
            self.open_next_segment(now_ms, out);
            return;
        }

        let sample = self.trace_sample(now_ms, angle);
        let settled = match &mut self.segment {
            Some(seg) => {
                seg.trace.push(sample);
                seg.detector.push(&sample)
            }
            None => false,
        };
        if settled {
            self.close_segment(now_ms, false, out);
            self.open_next_segment(now_ms, out);
        }
    }

    fn trace_sample(&self, ts_ms: u64, angle_deg: f64) -> TraceSample {
        let held = self.emitted.or(self.decided).or(self.pending.back().map(|p| p.1));
        let engaged = self.emitted.is_some() || self.decided.is_some() || !self.pending.is_empty();
        TraceSample {
            ts_ms,
            angle_deg,
            cmd_dir: held.map_or(0, Direction::sign),
            cmd_on: engaged,
        }
    }

    fn open_next_segment(&mut self, now_ms: u64, out: &mut Vec<OperatorOutput>) {
        let index = self.next_index;
        if index >= self.config.script.targets_deg.len() {
            self.finish(TaskOutcome::Completed, now_ms, out);
            return;
        }
        let angle = self.readings.back().map_or(0.0, |r| r.1);
        let mut seg = Segment {
            index,
            start_ms: now_ms,
            start_deg: angle,
            trace: Vec::new(),
            detector: SettleDetector::new(self.config.settle),
            last_on_dir: None,
            reversal_seqs: BTreeSet::new(),
            blocked_reversals: 0,
        };
        let sample = self.trace_sample(now_ms, angle);
        seg.trace.push(sample);
        seg.detector.push(&sample);
        self.segment = Some(seg);
        // the new target is seen now; the first decision about it follows
        self.next_decision_ms = self.next_decision_ms.max(now_ms);
    }

    fn close_segment(&mut self, now_ms: u64, aborted: bool, out: &mut Vec<OperatorOutput>) {
        let Some(seg) = self.segment.take() else {
            return;
        };
        let target_deg = self.config.script.targets_deg[seg.index];
        let m = segment_metrics(&seg.trace, target_deg, &self.config.settle).expect("segment traces start non-empty");
        let reversals = if self.config.ground_truth {
            seg.blocked_reversals
        } else {
            estimate_deadband_reversals(&seg.trace, 2 * self.config.profile.reaction_ms + 200, 0.1) as u32
        };
        let record = SegmentRecord {
            index: seg.index,
            target_deg,
            start_deg: seg.start_deg,
            final_deg: m.final_deg,
            error_deg: m.error_deg,
            max_overshoot_deg: m.max_overshoot_deg,
            duration_s: if aborted {
                (now_ms - seg.start_ms) as f64 / 1000.0
            } else {
                m.duration_s
            },
            reversal_in_deadband_count: reversals,
            aborted,
            trace: seg.trace,
        };
        self.records.push(record.clone());
        out.push(OperatorOutput::Segment(record));
        self.next_index = seg.index + 1;
    }

    fn velocity_deg_per_s(&self) -> f64 {
        let Some(&(t1, a1)) = self.readings.back() else {
            return 0.0;
        };
        let cutoff = t1.saturating_sub(self.config.velocity_window_ms);
        // oldest reading no older than the window
        let Some(&(t0, a0)) = self.readings.iter().find(|&&(t, _)| t >= cutoff) else {
            return 0.0;
        };
        if t1 <= t0 {
            return 0.0;
        }
        (a1 - a0) / ((t1 - t0) as f64 / 1000.0)
    }

    fn decide(&mut self, at_ms: u64) {
        if at_ms < self.watch_until_ms {
            return;
        }
        let p = &self.config.profile;
        if p.fumble_prob > 0.0 && self.rng.random::<f64>() < p.fumble_prob {
            return;
        }
        let (Some(target), Some(&(_, angle))) = (self.target(), self.readings.back()) else {
            return;
        };
        let velocity = self.velocity_deg_per_s();
        self.speed_deg_per_s = self.speed_deg_per_s.max(velocity.abs());
        // the operator leads by their own reaction time plus the link lag
        let horizon_ms = p.reaction_ms as f64 + self.lag_ms.unwrap_or(0.0);
        let predicted = angle + velocity * horizon_ms / 1000.0;
        let band = p.stop_threshold_deg + p.anticipation_deg;
        let when = at_ms + p.reaction_ms;

        if let Some(d) = self.decided {
            // a held button is only ever let go, never flipped
            if Direction::towards(predicted, target) != Some(d) || (target - predicted).abs() <= band {
                self.pending.push_back((when, d, false));
                self.decided = None;
            }
            return;
        }
        // after letting go, wait for the tip to come to rest before correcting
        if velocity.abs() > REST_DEG_PER_S {
            return;
        }
        if self.pending.is_empty() && self.emitted.is_none() {
            if let Some((from, pressed_ms)) = self.slack.open {
                let moved = (angle - from).abs();
                if moved >= DEAD_TAP_DEG {
                    let slack = (pressed_ms as f64 - moved / self.speed_deg_per_s * 1000.0).max(0.0);
                    self.slack.learned_ms = Some(self.slack.learned_ms.map_or(slack, |l| 0.5 * (l + slack)));
                    self.slack.open = None;
                }
            }
        }
        let err = target - angle;
        let Some(d) = Direction::towards(angle, target).filter(|_| err.abs() > band) else {
            return;
        };
        let reachable_ms = err.abs() / self.speed_deg_per_s * 1000.0;
        if reachable_ms < horizon_ms {
            // too close to stop by sight: a planned tap, then watch its effect.
            // Taps that move nothing are followed by longer ones.
            self.dead_taps = match self.tap_from_deg {
                Some(from) if (angle - from).abs() < DEAD_TAP_DEG => self.dead_taps + 1,
                _ => 0,
            };
            self.tap_from_deg = Some(angle);
            let mut hold_ms = reachable_ms.max(MIN_TAP_MS as f64) * f64::from(1 + self.dead_taps);
            if self.last_press == Some(d.reversed()) {
                hold_ms += self.slack.learned_ms.unwrap_or(0.0);
            }
            let hold_ms = libm::round(hold_ms) as u64;
            self.pending.push_back((when, d, true));
            self.pending.push_back((when + hold_ms, d, false));
            self.watch_until_ms = when + hold_ms + libm::round(horizon_ms) as u64 + self.config.velocity_window_ms;
        } else {
            self.tap_from_deg = None;
            self.pending.push_back((when, d, true));
            self.decided = Some(d);
        }
    }

    fn emit(&mut self, at_ms: u64, dir: Direction, on: bool, out: &mut Vec<OperatorOutput>) {
        self.seq += 1;
        let seq = self.seq;
        if on {
            if let Some(seg) = &mut self.segment {
                if seg.last_on_dir == Some(dir.reversed()) {
                    seg.reversal_seqs.insert(seq);
                }
                seg.last_on_dir = Some(dir);
            }
            if self.last_press != Some(dir) {
                let angle = self.readings.back().map_or(0.0, |r| r.1);
                self.slack.open = self.last_press.is_some().then_some((angle, 0));
            }
            self.last_press = Some(dir);
            self.pressed_since = Some(at_ms);
            self.emitted = Some(dir);
        } else {
            if let (Some(since), Some((_, pressed))) = (self.pressed_since.take(), self.slack.open.as_mut()) {
                *pressed += at_ms.saturating_sub(since);
            }
            self.emitted = None;
        }
        out.push(OperatorOutput::Send(Frame::Cmd(Command {
            axis: self.config.script.axis,
            dir,
            on,
            seq,
            ts_ms: at_ms,
        })));
    }

    /// Drops planned commands and sends an immediate release if engaged.
    fn release_now(&mut self, now_ms: u64, out: &mut Vec<OperatorOutput>) {
        self.pending.clear();
        self.decided = None;
        if let Some(d) = self.emitted {
            self.emit(now_ms, d, false, out);
        }
    }

    fn finish(&mut self, outcome: TaskOutcome, now_ms: u64, out: &mut Vec<OperatorOutput>) {
        if self.phase == Phase::Done {
            return;
        }
        if outcome != TaskOutcome::Completed {
            self.close_segment(now_ms, true, out);
        }
        self.release_now(now_ms, out);
        self.phase = Phase::Done;
        out.push(OperatorOutput::Finished(outcome));
    }
}
