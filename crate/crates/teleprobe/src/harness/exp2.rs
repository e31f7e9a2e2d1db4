//! Hysteresis sweep: each steering axis is driven end to end in fixed step
//! intervals, the IMU is read after a dwell at every stop, and the deadband
//! is recovered from the averaged branches.

use teleprobe_core::imu::ImuModel;
use teleprobe_core::impair::{derive_seed, ImpairmentModel};
use teleprobe_core::metrics::{extract_deadband, DeadbandParams, DeadbandProfile, MetricsError, SweepRecord};
use teleprobe_core::protocol::{Command, Frame, Heartbeat, Role};
use teleprobe_core::{AxisId, Calibration, Direction, ProbeModel};

use crate::vnet::{Client, SimConfig, SimNet, Topology};

#[derive(Debug, Clone)]
pub struct Exp2Config {
    pub calibration: Calibration,
    pub seed: u64,
    pub interval_steps: i64,
    pub dwell_ms: u64,
    pub repeats: u32,
    pub imu: ImuModel,
    pub axes: Vec<AxisId>,
    pub wall_clock: bool,
}

impl Exp2Config {
    pub fn new(calibration: Calibration, seed: u64) -> Self {
        Exp2Config {
            calibration,
            seed,
            interval_steps: 400,
            dwell_ms: 500,
            repeats: 3,
            imu: ImuModel::default(),
            axes: AxisId::STEERING.to_vec(),
            wall_clock: false,
        }
    }
}

/// One IMU reading taken at a sweep stop.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SweepSample {
    pub repeat: u32,
    pub direction: Direction,
    pub steps: i64,
    pub angle_deg: f64,
    pub ts_ms: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AxisSweep {
    pub axis: AxisId,
    pub samples: Vec<SweepSample>,
    pub up: SweepRecord,
    pub down: SweepRecord,
    pub profile: DeadbandProfile,
    pub virtual_ms: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Exp2Report {
    pub axes: Vec<AxisSweep>,
}

impl Exp2Report {
    /// Virtual time spent sweeping, summed over axes.
    pub fn virtual_ms(&self) -> u64 {
        self.axes.iter().map(|a| a.virtual_ms).sum()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum Action {
    Cmd(Direction, bool),
    Sample(u32, Direction, i64),
}

/// Plays a precomputed sweep plan and reads the latest telemetry at every
/// stop.
struct SweepClient {
    axis: AxisId,
    plan: Vec<(u64, Action)>,
    next: usize,
    seq: u64,
    next_heartbeat_ms: u64,
    latest: Option<f64>,
    samples: Vec<SweepSample>,
    session: String,
}

impl SweepClient {
    fn due(&mut self, now_ms: u64) -> Vec<Frame> {
        let mut out = Vec::new();
        while self.next_heartbeat_ms <= now_ms && !self.is_done() {
            self.seq += 1;
            out.push(Frame::Heartbeat(Heartbeat {
                seq: self.seq,
                ts_ms: self.next_heartbeat_ms,
            }));
            self.next_heartbeat_ms += 1_000;
        }
        while let Some(&(t, action)) = self.plan.get(self.next) {
            if t > now_ms {
                break;
            }
            self.next += 1;
            match action {
                Action::Cmd(dir, on) => {
                    self.seq += 1;
                    out.push(Frame::Cmd(Command {
                        axis: self.axis,
                        dir,
                        on,
                        seq: self.seq,
                        ts_ms: t,
                    }));
                }
                Action::Sample(repeat, direction, steps) => {
                    if let Some(angle_deg) = self.latest {
                        self.samples.push(SweepSample {
                            repeat,
                            direction,
                            steps,
                            angle_deg,
                            ts_ms: t,
                        });
                    }
                }
            }
        }
        out
    }
}

impl Client for SweepClient {
    fn start(&mut self, now_ms: u64) -> Vec<Frame> {
        let mut out = vec![Frame::hello(Role::Operator, self.session.clone())];
        out.extend(self.due(now_ms));
        out
    }

    fn on_frame(&mut self, frame: &Frame, _now_ms: u64) -> Vec<Frame> {
        if let Frame::Imu(r) = frame {
            self.latest = Some(match self.axis {
                AxisId::SteerUD => r.pitch_deg,
                _ => r.yaw_deg,
            });
        }
        Vec::new()
    }

    fn tick(&mut self, now_ms: u64) -> Vec<Frame> {
        self.due(now_ms)
    }

    fn next_wakeup_ms(&self) -> Option<u64> {
        let t = self.plan.get(self.next)?.0;
        Some(t.min(self.next_heartbeat_ms))
    }

    fn is_done(&self) -> bool {
        self.next >= self.plan.len()
    }
}

fn hold_ms(steps: i64, rate_steps_per_s: f64) -> u64 {
    (steps.unsigned_abs() as f64 / rate_steps_per_s * 1000.0).round() as u64
}

/// Stops of one sweep in sweep order, always including both ends.
fn stops(min: i64, max: i64, interval: i64, dir: Direction) -> Vec<i64> {
    let mut up: Vec<i64> = (0..).map(|k| min + k * interval).take_while(|&s| s < max).collect();
    up.push(max);
    if dir == Direction::Negative {
        up.reverse();
    }
    up
}

/// Left-right sweeps start at the minimum (up first); up-down at the
/// maximum (down first).
pub fn sweep_order(axis: AxisId) -> [Direction; 2] {
    match axis {
        AxisId::SteerUD => [Direction::Negative, Direction::Positive],
        _ => [Direction::Positive, Direction::Negative],
    }
}

fn plan(config: &Exp2Config, axis: AxisId) -> Vec<(u64, Action)> {
    let steer = config.calibration.steering(axis).expect("sweeps run on steering axes");
    let (min, max) = (steer.envelope.min_steps(), steer.envelope.max_steps());
    let rate = steer.rate_steps_per_s;
    let order = sweep_order(axis);
    let mut plan = Vec::new();
    let mut t = 500;

    // park at the starting end; the extra hold runs against the limit
    let (park_dir, park_steps) = match order[0] {
        Direction::Positive => (Direction::Negative, steer.neutral_steps - min),
        Direction::Negative => (Direction::Positive, max - steer.neutral_steps),
    };
    plan.push((t, Action::Cmd(park_dir, true)));
    t += hold_ms(park_steps, rate) + 500;
    plan.push((t, Action::Cmd(park_dir, false)));
    t += config.dwell_ms;

    for repeat in 0..config.repeats {
        for dir in order {
            let pts = stops(min, max, config.interval_steps, dir);
            plan.push((t, Action::Sample(repeat, dir, pts[0])));
            for w in pts.windows(2) {
                plan.push((t, Action::Cmd(dir, true)));
                t += hold_ms(w[1] - w[0], rate);
                plan.push((t, Action::Cmd(dir, false)));
                t += config.dwell_ms;
                plan.push((t, Action::Sample(repeat, dir, w[1])));
            }
        }
    }
    plan
}

/// Averages the repeats of one direction at each stop, in sweep order.
fn average(samples: &[SweepSample], dir: Direction, repeats: u32) -> SweepRecord {
    let mut by_steps: Vec<(i64, f64, u32)> = Vec::new();
    for s in samples.iter().filter(|s| s.direction == dir) {
        match by_steps.iter_mut().find(|e| e.0 == s.steps) {
            Some(e) => {
                e.1 += s.angle_deg;
                e.2 += 1;
            }
            None => by_steps.push((s.steps, s.angle_deg, 1)),
        }
    }
    SweepRecord {
        direction: dir,
        samples: by_steps.into_iter().map(|(s, sum, n)| (s, sum / f64::from(n))).collect(),
        repeats,
    }
}

pub fn sweep_axis(config: &Exp2Config, axis: AxisId) -> Result<AxisSweep, MetricsError> {
    let mut sim = SimConfig::new(Topology::AccessPoint, ImpairmentModel::none())
        .with_imu_seed(derive_seed(&[config.seed, axis.index() as u64]));
    sim.robot.imu = config.imu;
    sim.wall_clock = config.wall_clock;
    let client = SweepClient {
        axis,
        plan: plan(config, axis),
        next: 0,
        seq: 0,
        next_heartbeat_ms: 0,
        latest: None,
        samples: Vec::new(),
        session: sim.session.clone(),
    };
    let end_ms = client.plan.last().map_or(0, |p| p.0);
    let mut net = SimNet::new(ProbeModel::new(config.calibration.clone()), sim, client);
    net.run_until_done(end_ms + 1);
    let client = net.into_client();

    let up = average(&client.samples, Direction::Positive, config.repeats);
    let down = average(&client.samples, Direction::Negative, config.repeats);
    let neutral = config.calibration.steering(axis).map_or(0, |s| s.neutral_steps);
    let params = DeadbandParams {
        neutral_steps: neutral as f64,
        ..DeadbandParams::default()
    };
    let profile = extract_deadband(&up, &down, &params)?;
    Ok(AxisSweep {
        axis,
        samples: client.samples,
        up,
        down,
        profile,
        virtual_ms: end_ms,
    })
}

pub fn run_exp2(config: &Exp2Config) -> Result<Exp2Report, MetricsError> {
    let axes = config.axes.iter().map(|&a| sweep_axis(config, a)).collect::<Result<_, _>>()?;
    Ok(Exp2Report { axes })
}
