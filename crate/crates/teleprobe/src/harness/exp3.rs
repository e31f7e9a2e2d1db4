//! Target reaching: simulated participants steer each axis through its
//! target script under each control condition.

use rayon::prelude::*;
use teleprobe_core::impair::{derive_seed, ImpairmentModel};
use teleprobe_core::operator::{OperatorConfig, OperatorProfile, SegmentRecord, TargetScript, TaskOutcome};
use teleprobe_core::stats::{descriptive, welch_t_test, StatsSummary, WelchResult};
use teleprobe_core::{AxisId, Calibration, ProbeModel};

use crate::clients::OperatorClient;
use crate::vnet::{SimConfig, SimNet, Topology};

/// A control input together with the link it is used over.
#[derive(Debug, Clone, PartialEq)]
pub struct Condition {
    pub profile: OperatorProfile,
    pub topology: Topology,
    pub impairment: ImpairmentModel,
}

impl Condition {
    pub fn name(&self) -> &str {
        &self.profile.name
    }
}

/// Manual steering is local: a direct link with no impairment. The two
/// remote devices go through the relay over the given link.
pub fn default_conditions(device_link: ImpairmentModel) -> Vec<Condition> {
    teleprobe_core::operator::builtin_profiles()
        .into_iter()
        .map(|profile| {
            let local = profile.name == "manual";
            Condition {
                topology: if local { Topology::AccessPoint } else { Topology::Station },
                impairment: if local { ImpairmentModel::none() } else { device_link },
                profile,
            }
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct Exp3Config {
    pub calibration: Calibration,
    pub conditions: Vec<Condition>,
    pub scripts: Vec<TargetScript>,
    pub seeds: Vec<u64>,
    pub participants: u32,
    pub trials: u32,
    pub wall_clock: bool,
}

impl Exp3Config {
    pub fn new(calibration: Calibration, seeds: Vec<u64>) -> Self {
        let scripts = AxisId::STEERING
            .iter()
            .filter_map(|&a| teleprobe_core::operator::default_target_script(a))
            .collect();
        Exp3Config {
            calibration,
            conditions: default_conditions(ImpairmentModel::five_g()),
            scripts,
            seeds,
            participants: 3,
            trials: 3,
            wall_clock: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TrialRun {
    pub seed: u64,
    pub condition: String,
    pub axis: AxisId,
    pub participant: u32,
    pub trial: u32,
    pub outcome: TaskOutcome,
    pub segments: Vec<SegmentRecord>,
}

/// Virtual time allowed for one ten-target task.
const TRIAL_LIMIT_MS: u64 = 1_300_000;

pub fn run_trial(config: &Exp3Config, condition_index: usize, script_index: usize, seed: u64, participant: u32, trial: u32) -> TrialRun {
    let condition = &config.conditions[condition_index];
    let script = &config.scripts[script_index];
    let axis_code = script.axis.index() as u64;
    let run_seed = derive_seed(&[seed, condition_index as u64, axis_code, u64::from(participant), u64::from(trial)]);
    // the same participant keeps their pace across conditions
    let profile = condition.profile.for_participant(derive_seed(&[seed, u64::from(participant)]));

    let mut sim = SimConfig::new(condition.topology, condition.impairment.with_seed(derive_seed(&[run_seed, 1])))
        .with_imu_seed(derive_seed(&[run_seed, 2]));
    sim.wall_clock = config.wall_clock;
    let mut op = OperatorConfig::new(profile, script.clone(), derive_seed(&[run_seed, 3]));
    op.session = sim.session.clone();
    op.ground_truth = true;

    let mut net = SimNet::new(ProbeModel::new(config.calibration.clone()), sim, OperatorClient::new(op));
    net.run_until_done(TRIAL_LIMIT_MS);
    let client = net.into_client();
    TrialRun {
        seed,
        condition: condition.name().to_string(),
        axis: script.axis,
        participant,
        trial,
        outcome: client.outcome().unwrap_or(TaskOutcome::TelemetryLost),
        segments: client.into_segments(),
    }
}

#[derive(Debug, Clone)]
pub struct CellSummary {
    pub condition: String,
    pub axis: AxisId,
    pub n: usize,
    pub aborted: usize,
    /// `None` when every segment in the cell was aborted.
    pub error: Option<StatsSummary>,
    pub overshoot: Option<StatsSummary>,
    pub time: Option<StatsSummary>,
    pub reversals: Option<StatsSummary>,
}

#[derive(Debug, Clone)]
pub struct WelchRow {
    pub axis: AxisId,
    pub metric: &'static str,
    pub a: String,
    pub b: String,
    pub result: Option<WelchResult>,
}

#[derive(Debug, Clone)]
pub struct Exp3Report {
    pub runs: Vec<TrialRun>,
    pub cells: Vec<CellSummary>,
    pub welch: Vec<WelchRow>,
}

pub fn run_exp3(config: &Exp3Config) -> Exp3Report {
    let mut jobs = Vec::new();
    for &seed in &config.seeds {
        for (ci, _) in config.conditions.iter().enumerate() {
            for (si, _) in config.scripts.iter().enumerate() {
                for p in 0..config.participants {
                    for t in 0..config.trials {
                        jobs.push((seed, ci, si, p, t));
                    }
                }
            }
        }
    }
    let runs: Vec<TrialRun> = jobs
        .par_iter()
        .map(|&(seed, ci, si, p, t)| run_trial(config, ci, si, seed, p, t))
        .collect();
    let cells = summarize(config, &runs);
    let welch = welch_table(config, &runs);
    Exp3Report { runs, cells, welch }
}

fn cell_segments<'a>(runs: &'a [TrialRun], condition: &str, axis: AxisId) -> impl Iterator<Item = &'a SegmentRecord> {
    let condition = condition.to_string();
    runs.iter()
        .filter(move |r| r.condition == condition && r.axis == axis)
        .flat_map(|r| r.segments.iter())
}

fn summarize(config: &Exp3Config, runs: &[TrialRun]) -> Vec<CellSummary> {
    let mut cells = Vec::new();
    for c in &config.conditions {
        for s in &config.scripts {
            let all: Vec<&SegmentRecord> = cell_segments(runs, c.name(), s.axis).collect();
            let kept: Vec<&SegmentRecord> = all.iter().copied().filter(|r| !r.aborted).collect();
            let col = |f: fn(&SegmentRecord) -> f64| -> Vec<f64> { kept.iter().map(|r| f(r)).collect() };
            let summary = |v: Vec<f64>| descriptive(&v).ok();
            cells.push(CellSummary {
                condition: c.name().to_string(),
                axis: s.axis,
                n: kept.len(),
                aborted: all.len() - kept.len(),
                error: summary(col(|r| r.error_deg)),
                overshoot: summary(col(|r| r.max_overshoot_deg)),
                time: summary(col(|r| r.duration_s)),
                reversals: summary(col(|r| f64::from(r.reversal_in_deadband_count))),
            });
        }
    }
    cells
}

type Metric = (&'static str, fn(&SegmentRecord) -> f64);

fn welch_table(config: &Exp3Config, runs: &[TrialRun]) -> Vec<WelchRow> {
    let metrics: [Metric; 3] = [
        ("error_deg", |r| r.error_deg),
        ("max_overshoot_deg", |r| r.max_overshoot_deg),
        ("duration_s", |r| r.duration_s),
    ];
    let mut rows = Vec::new();
    for s in &config.scripts {
        for (metric, f) in metrics {
            for i in 0..config.conditions.len() {
                for j in i + 1..config.conditions.len() {
                    let (a, b) = (config.conditions[i].name(), config.conditions[j].name());
                    let xs: Vec<f64> = cell_segments(runs, a, s.axis).filter(|r| !r.aborted).map(f).collect();
                    let ys: Vec<f64> = cell_segments(runs, b, s.axis).filter(|r| !r.aborted).map(f).collect();
                    rows.push(WelchRow {
                        axis: s.axis,
                        metric,
                        a: a.to_string(),
                        b: b.to_string(),
                        result: welch_t_test(&xs, &ys).ok(),
                    });
                }
            }
        }
    }
    rows
}
