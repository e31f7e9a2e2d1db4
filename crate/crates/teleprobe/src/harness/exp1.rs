//! Mode timing: the same command sequences over a direct link and through
//! the relay.

use teleprobe_core::impair::{derive_seed, ImpairmentModel};
use teleprobe_core::robot::RobotEvent;
use teleprobe_core::{AxisId, Calibration, Direction, ProbeModel};

use crate::clients::{Press, SequenceClient};
use crate::vnet::{SimConfig, SimNet, Topology, TrajectoryPoint};

/// Gap between a release and the next press in the built-in sequences.
pub const PRESS_GAP_MS: u64 = 500;
/// When the first press of a sequence is sent.
pub const SEQUENCE_START_MS: u64 = 1_000;

#[derive(Debug, Clone, PartialEq)]
pub struct Sequence {
    pub name: &'static str,
    pub presses: Vec<Press>,
}

fn press(axis: AxisId, sign: i64, hold_ms: u64) -> Press {
    Press {
        axis,
        dir: Direction::from_sign(sign).expect("sign is +1 or -1"),
        hold_ms,
    }
}

/// Five fixed sequences, each touching all four axes in a different order.
pub fn builtin_sequences() -> Vec<Sequence> {
    use AxisId::*;
    vec![
        Sequence {
            name: "insert-rotate-steer",
            presses: vec![press(Translation, 1, 2000), press(Rotation, 1, 1500), press(SteerLR, 1, 1000), press(SteerUD, 1, 1000)],
        },
        Sequence {
            name: "steer-then-place",
            presses: vec![press(SteerUD, -1, 1500), press(SteerLR, -1, 1500), press(Rotation, -1, 2000), press(Translation, 1, 1000)],
        },
        Sequence {
            name: "lr-reversal",
            presses: vec![
                press(SteerLR, 1, 2000),
                press(SteerLR, -1, 1000),
                press(SteerUD, 1, 800),
                press(Translation, 1, 3000),
                press(Rotation, 1, 500),
            ],
        },
        Sequence {
            name: "ud-sweep",
            presses: vec![
                press(Rotation, -1, 1000),
                press(SteerUD, 1, 2500),
                press(Translation, 1, 1500),
                press(SteerLR, -1, 2500),
                press(SteerUD, -1, 1000),
            ],
        },
        Sequence {
            name: "advance-retract",
            presses: vec![
                press(Translation, 1, 4000),
                press(Translation, -1, 1500),
                press(Rotation, 1, 3000),
                press(SteerLR, 1, 500),
                press(SteerUD, -1, 500),
            ],
        },
    ]
}

#[derive(Debug, Clone)]
pub struct Exp1Config {
    pub calibration: Calibration,
    /// Applied to every leg in both modes.
    pub impairment: ImpairmentModel,
    pub seed: u64,
    pub sequences: Vec<Sequence>,
    pub wall_clock: bool,
}

impl Exp1Config {
    pub fn new(calibration: Calibration, impairment: ImpairmentModel, seed: u64) -> Self {
        Exp1Config {
            calibration,
            impairment,
            seed,
            sequences: builtin_sequences(),
            wall_clock: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ModeRun {
    pub topology: Topology,
    /// From sending the first press to the robot applying the last release.
    pub completion_ms: u64,
    pub commands_sent: usize,
    pub commands_applied: usize,
    pub trajectory: Vec<TrajectoryPoint>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SequenceResult {
    pub index: usize,
    pub name: &'static str,
    pub ap: ModeRun,
    pub sta: ModeRun,
}

impl SequenceResult {
    pub fn difference_ms(&self) -> i64 {
        self.sta.completion_ms as i64 - self.ap.completion_ms as i64
    }

    pub fn relative_difference(&self) -> f64 {
        (self.sta.completion_ms as f64 - self.ap.completion_ms as f64).abs() / self.ap.completion_ms as f64
    }

    pub fn trajectories_identical(&self) -> bool {
        self.ap.trajectory == self.sta.trajectory
    }
}

#[derive(Debug, Clone)]
pub struct Exp1Report {
    pub results: Vec<SequenceResult>,
}

pub fn run_sequence(config: &Exp1Config, index: usize, topology: Topology) -> ModeRun {
    let seq = &config.sequences[index];
    let run_seed = derive_seed(&[config.seed, index as u64]);
    let mut sim = SimConfig::new(topology, config.impairment.with_seed(derive_seed(&[run_seed, 1])))
        .with_imu_seed(derive_seed(&[run_seed, 2]));
    sim.record_trajectory = true;
    sim.wall_clock = config.wall_clock;
    let client = SequenceClient::new(&seq.presses, SEQUENCE_START_MS, PRESS_GAP_MS, &sim.session);
    let planned_end = client.planned_end_ms();
    let mut net = SimNet::new(ProbeModel::new(config.calibration.clone()), sim, client);
    // long enough for the last release to cross any impaired link
    net.run_for(planned_end + 2_000);

    let applied: Vec<_> = net
        .robot_events()
        .iter()
        .filter_map(|e| match e {
            RobotEvent::Applied(a) => Some(a),
            _ => None,
        })
        .collect();
    let last_off = applied.iter().rev().find(|a| !a.command.on).map_or(0, |a| a.at_ms);
    let first_sent = net.client().first_command_ms().unwrap_or(0);
    ModeRun {
        topology,
        completion_ms: last_off.saturating_sub(first_sent),
        commands_sent: net.client().sent().len(),
        commands_applied: applied.len(),
        trajectory: net.trajectory().to_vec(),
    }
}

pub fn run_exp1(config: &Exp1Config) -> Exp1Report {
    let results = config
        .sequences
        .iter()
        .enumerate()
        .map(|(i, s)| SequenceResult {
            index: i,
            name: s.name,
            ap: run_sequence(config, i, Topology::AccessPoint),
            sta: run_sequence(config, i, Topology::Station),
        })
        .collect();
    Exp1Report { results }
}
