//! Report files and threshold checks for the three experiments.
//!
//! Files are rendered to strings first so a rerun can be compared byte for
//! byte. Floats use Rust's shortest round-trip formatting.

use std::io;
use std::path::Path;

use serde_json::{json, Value};
use teleprobe_core::stats::StatsSummary;
use teleprobe_core::{AxisId, Direction};

use super::exp1::{Exp1Config, Exp1Report};
use super::exp2::{Exp2Config, Exp2Report};
use super::exp3::{CellSummary, Exp3Config, Exp3Report};

/// Tolerance on recovered deadband widths, in steps.
pub const DEADBAND_TOLERANCE_STEPS: f64 = 200.0;
/// Largest relative AP/STA completion-time difference on a clean link.
pub const MODE_TIME_TOLERANCE: f64 = 0.05;
pub const MAX_MEAN_ERROR_DEG: f64 = 1.0;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct OutputFile {
    pub name: String,
    pub contents: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Check {
    pub name: String,
    pub pass: bool,
    pub detail: String,
}

impl Check {
    fn new(name: impl Into<String>, pass: bool, detail: impl Into<String>) -> Self {
        Check {
            name: name.into(),
            pass,
            detail: detail.into(),
        }
    }

    fn to_json(&self) -> Value {
        json!({ "name": self.name, "pass": self.pass, "detail": self.detail })
    }
}

pub fn write_files(dir: &Path, files: &[OutputFile]) -> io::Result<()> {
    for f in files {
        let path = dir.join(&f.name);
        if let Some(parent) = path.parent() {
            std::fs::create_dir_all(parent)?;
        }
        std::fs::write(path, &f.contents)?;
    }
    Ok(())
}

fn csv_file(name: &str, header: &[&str], rows: Vec<Vec<String>>) -> OutputFile {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).expect("in-memory write");
    for r in rows {
        w.write_record(&r).expect("in-memory write");
    }
    let bytes = w.into_inner().expect("in-memory flush");
    OutputFile {
        name: name.to_string(),
        contents: String::from_utf8(bytes).expect("csv of utf-8 fields"),
    }
}

fn json_file(name: &str, value: &Value) -> OutputFile {
    let mut contents = serde_json::to_string_pretty(value).expect("json values serialize");
    contents.push('\n');
    OutputFile {
        name: name.to_string(),
        contents,
    }
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

fn dir_label(d: Direction) -> &'static str {
    match d {
        Direction::Positive => "up",
        Direction::Negative => "down",
    }
}

pub fn exp1_checks(config: &Exp1Config, report: &Exp1Report) -> Vec<Check> {
    let mut checks = vec![Check::new(
        "sequence_count",
        report.results.len() == 5,
        format!("{} sequences per mode", report.results.len()),
    )];
    for r in &report.results {
        if config.impairment.is_zero() {
            let rel = r.relative_difference();
            checks.push(Check::new(
                format!("mode_time/{}", r.name),
                rel < MODE_TIME_TOLERANCE,
                format!("AP {} ms, STA {} ms, relative difference {rel}", r.ap.completion_ms, r.sta.completion_ms),
            ));
        }
        checks.push(Check::new(
            format!("trajectory/{}", r.name),
            r.trajectories_identical(),
            format!("{} ticks compared", r.ap.trajectory.len()),
        ));
        checks.push(Check::new(
            format!("conservation/{}", r.name),
            r.ap.commands_applied == r.ap.commands_sent && r.sta.commands_applied == r.sta.commands_sent,
            format!(
                "AP {}/{} applied, STA {}/{} applied",
                r.ap.commands_applied, r.ap.commands_sent, r.sta.commands_applied, r.sta.commands_sent
            ),
        ));
    }
    checks
}

pub fn exp1_files(config: &Exp1Config, report: &Exp1Report) -> Vec<OutputFile> {
    let mut times = Vec::new();
    let mut pairs = Vec::new();
    for r in &report.results {
        for run in [&r.ap, &r.sta] {
            times.push(vec![
                r.index.to_string(),
                r.name.to_string(),
                run.topology.label().to_string(),
                run.completion_ms.to_string(),
                run.commands_sent.to_string(),
                run.commands_applied.to_string(),
            ]);
        }
        pairs.push(vec![
            r.index.to_string(),
            r.name.to_string(),
            r.ap.completion_ms.to_string(),
            r.sta.completion_ms.to_string(),
            r.difference_ms().to_string(),
            r.relative_difference().to_string(),
            r.trajectories_identical().to_string(),
        ]);
    }
    let checks = exp1_checks(config, report);
    let summary = json!({
        "experiment": 1,
        "config": {
            "seed": config.seed,
            "impairment": impairment_json(&config.impairment),
            "sequences": config.sequences.iter().map(|s| json!({
                "name": s.name,
                "presses": s.presses.iter().map(|p| json!({
                    "axis": p.axis.wire_code(), "dir": p.dir.sign(), "hold_ms": p.hold_ms,
                })).collect::<Vec<_>>(),
            })).collect::<Vec<_>>(),
        },
        "results": report.results.iter().map(|r| json!({
            "sequence": r.index,
            "name": r.name,
            "ap_ms": r.ap.completion_ms,
            "sta_ms": r.sta.completion_ms,
            "relative_difference": r.relative_difference(),
            "trajectories_identical": r.trajectories_identical(),
        })).collect::<Vec<_>>(),
        "checks": checks.iter().map(Check::to_json).collect::<Vec<_>>(),
    });
    vec![
        csv_file(
            "mode_times.csv",
            &["sequence", "name", "mode", "completion_ms", "commands_sent", "commands_applied"],
            times,
        ),
        csv_file(
            "mode_pairs.csv",
            &["sequence", "name", "ap_ms", "sta_ms", "difference_ms", "relative_difference", "trajectories_identical"],
            pairs,
        ),
        json_file("report.json", &summary),
    ]
}

fn impairment_json(m: &teleprobe_core::impair::ImpairmentModel) -> Value {
    json!({
        "base_delay_ms": m.base_delay_ms,
        "jitter_ms": m.jitter_ms,
        "telemetry_drop_prob": m.telemetry_drop_prob,
    })
}

/// Configured deadband figures the sweep should recover: widest gap,
/// gap centred on neutral, and the hysteresis zone.
pub fn configured_deadband(config: &Exp2Config, axis: AxisId) -> Option<(f64, Option<f64>, (i64, i64))> {
    let steer = config.calibration.steering(axis)?;
    let env = &steer.envelope;
    let max_gap = env
        .grid()
        .iter()
        .filter_map(|&s| env.gap_centered_at(s as f64))
        .fold(0.0, f64::max);
    Some((max_gap, env.gap_centered_at(steer.neutral_steps as f64), env.zone()))
}

pub fn exp2_checks(config: &Exp2Config, report: &Exp2Report) -> Vec<Check> {
    let mut checks = Vec::new();
    for a in &report.axes {
        let Some((max_gap, neutral_gap, zone)) = configured_deadband(config, a.axis) else {
            continue;
        };
        let code = a.axis.wire_code();
        let p = &a.profile;
        checks.push(Check::new(
            format!("max_gap/{code}"),
            (p.max_gap - max_gap).abs() <= DEADBAND_TOLERANCE_STEPS,
            format!("recovered {} steps, configured {max_gap}", p.max_gap),
        ));
        if let (Some(measured), Some(configured)) = (p.neutral_gap, neutral_gap) {
            checks.push(Check::new(
                format!("neutral_gap/{code}"),
                (measured - configured).abs() <= DEADBAND_TOLERANCE_STEPS,
                format!("recovered {measured} steps, configured {configured}"),
            ));
        }
        let (lo, hi) = (zone.0 as f64 - DEADBAND_TOLERANCE_STEPS, zone.1 as f64 + DEADBAND_TOLERANCE_STEPS);
        checks.push(Check::new(
            format!("zone/{code}"),
            p.zone.is_some_and(|(a, b)| a >= lo && b <= hi),
            format!("recovered {:?}, allowed [{lo}, {hi}]", p.zone),
        ));
    }
    checks
}

pub fn exp2_files(config: &Exp2Config, report: &Exp2Report) -> Vec<OutputFile> {
    let mut files = Vec::new();
    let mut curves = Vec::new();
    let mut raw = Vec::new();
    let mut gaps = Vec::new();
    for a in &report.axes {
        let code = a.axis.wire_code();
        for rec in [&a.up, &a.down] {
            for &(steps, deg) in &rec.samples {
                curves.push(vec![
                    code.to_string(),
                    dir_label(rec.direction).to_string(),
                    steps.to_string(),
                    (steps as f64 / config.calibration.steps_per_wheel_degree).to_string(),
                    deg.to_string(),
                ]);
            }
        }
        for s in &a.samples {
            raw.push(vec![
                code.to_string(),
                s.repeat.to_string(),
                dir_label(s.direction).to_string(),
                s.steps.to_string(),
                s.angle_deg.to_string(),
                s.ts_ms.to_string(),
            ]);
        }
        for &(mid, gap) in &a.profile.points {
            gaps.push(vec![code.to_string(), mid.to_string(), gap.to_string()]);
        }
    }
    let checks = exp2_checks(config, report);
    let summary = json!({
        "experiment": 2,
        "config": {
            "seed": config.seed,
            "interval_steps": config.interval_steps,
            "dwell_ms": config.dwell_ms,
            "repeats": config.repeats,
            "imu": { "sigma_deg": config.imu.sigma_deg, "quantum_deg": config.imu.quantum_deg },
        },
        "virtual_ms": report.virtual_ms(),
        "axes": report.axes.iter().map(|a| json!({
            "axis": a.axis.wire_code(),
            "max_gap_steps": a.profile.max_gap,
            "neutral_gap_steps": a.profile.neutral_gap,
            "zone_steps": a.profile.zone.map(|z| [z.0, z.1]),
            "monotonicity_violation_deg": a.profile.monotonicity_violation_deg,
            "warning": a.profile.warning,
        })).collect::<Vec<_>>(),
        "checks": checks.iter().map(Check::to_json).collect::<Vec<_>>(),
    });
    files.push(csv_file(
        "hysteresis_curves.csv",
        &["axis", "direction", "steps", "wheel_deg", "mean_tip_deg"],
        curves,
    ));
    files.push(csv_file(
        "sweep_samples.csv",
        &["axis", "repeat", "direction", "steps", "tip_deg", "ts_ms"],
        raw,
    ));
    files.push(csv_file("deadband.csv", &["axis", "mid_steps", "gap_steps"], gaps));
    files.push(json_file("report.json", &summary));
    files
}

fn cell<'a>(report: &'a Exp3Report, condition: &str, axis: AxisId) -> Option<&'a CellSummary> {
    report.cells.iter().find(|c| c.condition == condition && c.axis == axis)
}

pub fn exp3_checks(config: &Exp3Config, report: &Exp3Report) -> Vec<Check> {
    let mut checks = Vec::new();
    let names: Vec<&str> = config.conditions.iter().map(|c| c.name()).collect();
    let expected_n = config.seeds.len() * (config.participants * config.trials) as usize * 10;
    for c in &report.cells {
        checks.push(Check::new(
            format!("records/{}/{}", c.condition, c.axis.wire_code()),
            c.n + c.aborted == expected_n,
            format!("{} kept, {} aborted, expected {expected_n}", c.n, c.aborted),
        ));
        let err = c.error.as_ref().map(|e| e.mean);
        checks.push(Check::new(
            format!("mean_error/{}/{}", c.condition, c.axis.wire_code()),
            err.is_some_and(|e| e <= MAX_MEAN_ERROR_DEG),
            format!("mean error {err:?} deg"),
        ));
    }
    for s in &config.scripts {
        let medians: Vec<Option<f64>> = names
            .iter()
            .map(|n| cell(report, n, s.axis).and_then(|c| c.time.as_ref()).map(|t| t.median))
            .collect();
        let ordered = medians.windows(2).all(|w| matches!((w[0], w[1]), (Some(a), Some(b)) if a < b));
        checks.push(Check::new(
            format!("median_time_order/{}", s.axis.wire_code()),
            ordered,
            format!("{} medians {medians:?}", names.join(" < ")),
        ));
    }
    for n in &names {
        let (Some(lr), Some(ud)) = (cell(report, n, AxisId::SteerLR), cell(report, n, AxisId::SteerUD)) else {
            continue;
        };
        let rev = |c: &CellSummary| c.reversals.as_ref().map(|r| r.mean);
        checks.push(Check::new(
            format!("reversals/{n}"),
            matches!((rev(ud), rev(lr)), (Some(u), Some(l)) if u >= l),
            format!("UD {:?}, LR {:?}", rev(ud), rev(lr)),
        ));
        let cov = |c: &CellSummary| c.time.as_ref().and_then(|t| t.cov().ok());
        checks.push(Check::new(
            format!("time_cov/{n}"),
            matches!((cov(ud), cov(lr)), (Some(u), Some(l)) if u > l),
            format!("UD {:?}, LR {:?}", cov(ud), cov(lr)),
        ));
    }
    checks
}

fn summary_rows(c: &CellSummary) -> Vec<Vec<String>> {
    let metrics: [(&str, &Option<StatsSummary>); 4] = [
        ("error_deg", &c.error),
        ("max_overshoot_deg", &c.overshoot),
        ("duration_s", &c.time),
        ("reversal_in_deadband_count", &c.reversals),
    ];
    metrics
        .iter()
        .map(|(metric, s)| {
            let mut row = vec![c.condition.clone(), c.axis.wire_code().to_string(), metric.to_string()];
            match s {
                Some(s) => row.extend([
                    s.n.to_string(),
                    s.mean.to_string(),
                    opt(s.std().ok()),
                    s.median.to_string(),
                    opt(s.iqr().ok()),
                    opt(s.cov().ok()),
                ]),
                None => row.extend(["0".to_string(), String::new(), String::new(), String::new(), String::new(), String::new()]),
            }
            row
        })
        .collect()
}

/// `traces` adds one CSV per trial under `traces/`.
pub fn exp3_files(config: &Exp3Config, report: &Exp3Report, traces: bool) -> Vec<OutputFile> {
    let mut files = Vec::new();
    files.push(csv_file(
        "summary.csv",
        &["condition", "axis", "metric", "n", "mean", "std", "median", "iqr", "cov"],
        report.cells.iter().flat_map(summary_rows).collect(),
    ));

    let mut segs = Vec::new();
    for r in &report.runs {
        for s in &r.segments {
            segs.push(vec![
                r.seed.to_string(),
                r.condition.clone(),
                r.axis.wire_code().to_string(),
                r.participant.to_string(),
                r.trial.to_string(),
                s.index.to_string(),
                s.target_deg.to_string(),
                s.start_deg.to_string(),
                s.final_deg.to_string(),
                s.error_deg.to_string(),
                s.max_overshoot_deg.to_string(),
                s.duration_s.to_string(),
                s.reversal_in_deadband_count.to_string(),
                s.aborted.to_string(),
            ]);
        }
        if traces {
            let rows = r
                .segments
                .iter()
                .flat_map(|s| {
                    s.trace.iter().map(move |t| {
                        vec![
                            s.index.to_string(),
                            t.ts_ms.to_string(),
                            t.angle_deg.to_string(),
                            t.cmd_dir.to_string(),
                            u8::from(t.cmd_on).to_string(),
                        ]
                    })
                })
                .collect();
            files.push(csv_file(
                &format!(
                    "traces/{}_{}_seed{}_p{}_t{}.csv",
                    r.condition,
                    r.axis.wire_code(),
                    r.seed,
                    r.participant,
                    r.trial
                ),
                &["segment", "ts_ms", "angle_deg", "cmd_dir", "cmd_on"],
                rows,
            ));
        }
    }
    files.push(csv_file(
        "segments.csv",
        &[
            "seed",
            "condition",
            "axis",
            "participant",
            "trial",
            "target_index",
            "target_deg",
            "start_deg",
            "final_deg",
            "error_deg",
            "max_overshoot_deg",
            "duration_s",
            "reversal_in_deadband_count",
            "aborted",
        ],
        segs,
    ));

    let welch = report
        .welch
        .iter()
        .map(|w| {
            vec![
                w.axis.wire_code().to_string(),
                w.metric.to_string(),
                w.a.clone(),
                w.b.clone(),
                opt(w.result.map(|r| r.t)),
                opt(w.result.map(|r| r.dof)),
                opt(w.result.map(|r| r.p)),
            ]
        })
        .collect();
    files.push(csv_file("welch.csv", &["axis", "metric", "a", "b", "t", "dof", "p"], welch));

    let checks = exp3_checks(config, report);
    let summary = json!({
        "experiment": 3,
        "config": {
            "seeds": config.seeds,
            "participants": config.participants,
            "trials": config.trials,
            "conditions": config.conditions.iter().map(|c| json!({
                "profile": {
                    "name": c.profile.name,
                    "reaction_ms": c.profile.reaction_ms,
                    "decision_period_ms": c.profile.decision_period_ms,
                    "stop_threshold_deg": c.profile.stop_threshold_deg,
                    "anticipation_deg": c.profile.anticipation_deg,
                    "fumble_prob": c.profile.fumble_prob,
                },
                "topology": c.topology.label(),
                "impairment": impairment_json(&c.impairment),
            })).collect::<Vec<_>>(),
            "scripts": config.scripts.iter().map(|s| json!({
                "axis": s.axis.wire_code(),
                "targets_deg": s.targets_deg,
                "tolerance_deg": s.tolerance_deg,
            })).collect::<Vec<_>>(),
        },
        "cells": report.cells.iter().map(|c| json!({
            "condition": c.condition,
            "axis": c.axis.wire_code(),
            "n": c.n,
            "aborted": c.aborted,
            "error_mean_deg": c.error.as_ref().map(|s| s.mean),
            "error_std_deg": c.error.as_ref().and_then(|s| s.std().ok()),
            "overshoot_mean_deg": c.overshoot.as_ref().map(|s| s.mean),
            "overshoot_std_deg": c.overshoot.as_ref().and_then(|s| s.std().ok()),
            "time_median_s": c.time.as_ref().map(|s| s.median),
            "time_iqr_s": c.time.as_ref().and_then(|s| s.iqr().ok()),
            "time_cov": c.time.as_ref().and_then(|s| s.cov().ok()),
            "reversals_mean": c.reversals.as_ref().map(|s| s.mean),
        })).collect::<Vec<_>>(),
        "checks": checks.iter().map(Check::to_json).collect::<Vec<_>>(),
    });
    files.push(json_file("report.json", &summary));
    files
}

/// Reads the checks back out of a `report.json`.
pub fn checks_from_report(text: &str) -> Result<Vec<Check>, serde_json::Error> {
    let v: Value = serde_json::from_str(text)?;
    Ok(v.get("checks")
        .and_then(Value::as_array)
        .map(|a| {
            a.iter()
                .map(|c| Check {
                    name: c.get("name").and_then(Value::as_str).unwrap_or_default().to_string(),
                    pass: c.get("pass").and_then(Value::as_bool).unwrap_or(false),
                    detail: c.get("detail").and_then(Value::as_str).unwrap_or_default().to_string(),
                })
                .collect()
        })
        .unwrap_or_default())
}
