//! Per-segment task metrics and deadband extraction from sweeps.

use alloc::collections::VecDeque;
use alloc::vec::Vec;
use thiserror::Error;

use crate::axis::Direction;
use crate::interp;
use crate::stats::isotonic_non_decreasing;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MetricsError {
    #[error("empty trace")]
    EmptyTrace,
    #[error("trace not time-ordered at sample {0}")]
    NotTimeOrdered(usize),
    #[error("sweep needs at least two samples")]
    ShortSweep,
    #[error("sweep steps not strictly monotone in its direction at sample {0}")]
    SweepOrder(usize),
    #[error("up and down sweeps cover different step ranges")]
    SweepRange,
    #[error("first sweep must ascend and second descend")]
    SweepDirection,
}

/// One operator-side observation: a telemetry angle together with the
/// command the operator was holding at that time.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TraceSample {
    pub ts_ms: u64,
    pub angle_deg: f64,
    /// -1, 0 or +1.
    pub cmd_dir: i8,
    pub cmd_on: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SettleParams {
    pub window_ms: u64,
    pub band_deg: f64,
    /// Readings averaged at each end of the window, and for the final angle.
    pub average_of: usize,
}

impl Default for SettleParams {
    fn default() -> Self {
        SettleParams {
            window_ms: 1000,
            band_deg: 0.05,
            average_of: 3,
        }
    }
}

/// Online settle test: the command has been off for a full window and the
/// angle at the start of the window matches the angle at its end.
///
/// Each end is the mean of a few readings, which keeps sensor noise from
/// masking a settled tip.
#[derive(Debug, Clone)]
pub struct SettleDetector {
    params: SettleParams,
    off_since: Option<u64>,
    window: VecDeque<(u64, f64)>,
}

impl SettleDetector {
    pub fn new(params: SettleParams) -> Self {
        SettleDetector {
            params,
            off_since: None,
            window: VecDeque::new(),
        }
    }

    pub fn reset(&mut self) {
        self.off_since = None;
        self.window.clear();
    }

    /// Feeds one sample; returns whether the segment has settled at it.
    pub fn push(&mut self, s: &TraceSample) -> bool {
        if s.cmd_on {
            self.off_since = None;
        } else if self.off_since.is_none() {
            self.off_since = Some(s.ts_ms);
        }
        self.window.push_back((s.ts_ms, s.angle_deg));
        let start = s.ts_ms.saturating_sub(self.params.window_ms);
        while self.window.front().is_some_and(|&(t, _)| t < start) {
            self.window.pop_front();
        }
        let k = self.params.average_of.max(1);
        let off_long_enough = self
            .off_since
            .is_some_and(|t| s.ts_ms >= t + self.params.window_ms);
        if !off_long_enough || self.window.len() < 2 * k {
            return false;
        }
        let head = self.window.iter().take(k).map(|w| w.1).sum::<f64>() / k as f64;
        let tail = self.window.iter().rev().take(k).map(|w| w.1).sum::<f64>() / k as f64;
        (head - tail).abs() < self.params.band_deg
    }

    /// Mean of the most recent readings.
    pub fn recent_mean(&self) -> Option<f64> {
        let k = self.params.average_of.max(1).min(self.window.len());
        (k > 0).then(|| self.window.iter().rev().take(k).map(|w| w.1).sum::<f64>() / k as f64)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentMetrics {
    pub final_deg: f64,
    pub error_deg: f64,
    pub max_overshoot_deg: f64,
    pub duration_s: f64,
    /// Index of the sample at which the segment settled, if it did.
    pub settled_at: Option<usize>,
}

/// Metrics for one target segment. The trace starts when the target is
/// presented; anything after the settle point is ignored.
pub fn segment_metrics(
    trace: &[TraceSample],
    target_deg: f64,
    settle: &SettleParams,
) -> Result<SegmentMetrics, MetricsError> {
    let first = trace.first().ok_or(MetricsError::EmptyTrace)?;
    if let Some(i) = (1..trace.len()).find(|&i| trace[i].ts_ms < trace[i - 1].ts_ms) {
        return Err(MetricsError::NotTimeOrdered(i));
    }
    let mut detector = SettleDetector::new(*settle);
    let settled_at = trace.iter().position(|s| detector.push(s));
    let end = settled_at.unwrap_or(trace.len() - 1);
    let used = &trace[..=end];

    let k = settle.average_of.clamp(1, used.len());
    let final_deg = used[used.len() - k..].iter().map(|s| s.angle_deg).sum::<f64>() / k as f64;
    Ok(SegmentMetrics {
        final_deg,
        error_deg: (final_deg - target_deg).abs(),
        max_overshoot_deg: max_overshoot(used, target_deg),
        duration_s: (used[end].ts_ms - first.ts_ms) as f64 / 1000.0,
        settled_at,
    })
}

/// Largest excursion past `target_deg` in the initial direction of travel.
///
/// The direction is taken from the start angle, or from the first engaged
/// command when the trace starts on target.
pub fn max_overshoot(trace: &[TraceSample], target_deg: f64) -> f64 {
    let Some(first) = trace.first() else {
        return 0.0;
    };
    let dir = Direction::towards(first.angle_deg, target_deg)
        .map(|d| d.sign())
        .or_else(|| trace.iter().find(|s| s.cmd_on && s.cmd_dir != 0).map(|s| s.cmd_dir))
        .unwrap_or(0);
    if dir == 0 {
        return 0.0;
    }
    let d = f64::from(dir);
    trace
        .iter()
        .map(|s| d * (s.angle_deg - target_deg))
        .fold(0.0, f64::max)
}

/// Counts engaged reversals after which the angle fails to move at least
/// `band_deg` in the new direction within `response_ms`. A trace-only
/// estimate of reversals made inside the deadband, for use when the plant's
/// own record is unavailable.
pub fn estimate_deadband_reversals(trace: &[TraceSample], response_ms: u64, band_deg: f64) -> usize {
    let mut count = 0;
    let mut last_dir = 0i8;
    for (i, s) in trace.iter().enumerate() {
        if !s.cmd_on || s.cmd_dir == 0 {
            continue;
        }
        let prev = last_dir;
        last_dir = s.cmd_dir;
        let starts_engagement = i == 0 || !trace[i - 1].cmd_on || trace[i - 1].cmd_dir != s.cmd_dir;
        if prev == 0 || prev == s.cmd_dir || !starts_engagement {
            continue;
        }
        let d = f64::from(s.cmd_dir);
        let moved = trace[i..]
            .iter()
            .take_while(|w| w.ts_ms <= s.ts_ms + response_ms && w.cmd_on && w.cmd_dir == s.cmd_dir)
            .any(|w| d * (w.angle_deg - s.angle_deg) >= band_deg);
        if !moved {
            count += 1;
        }
    }
    count
}

/// Averaged tip angles along one monotone sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRecord {
    pub direction: Direction,
    /// (steps, mean tip angle) in sweep order.
    pub samples: Vec<(i64, f64)>,
    pub repeats: u32,
}

impl SweepRecord {
    pub fn validate(&self) -> Result<(), MetricsError> {
        if self.samples.len() < 2 {
            return Err(MetricsError::ShortSweep);
        }
        let sign = i64::from(self.direction.sign());
        for i in 1..self.samples.len() {
            if sign * (self.samples[i].0 - self.samples[i - 1].0) <= 0 {
                return Err(MetricsError::SweepOrder(i));
            }
        }
        Ok(())
    }

    /// Samples reordered by increasing steps.
    fn by_steps(&self) -> (Vec<f64>, Vec<f64>) {
        let mut pts = self.samples.clone();
        pts.sort_by_key(|p| p.0);
        pts.into_iter().map(|(s, a)| (s as f64, a)).unzip()
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DeadbandParams {
    pub neutral_steps: f64,
    /// Gaps at or above this count as inside the hysteresis zone.
    pub zone_threshold_steps: f64,
    /// Non-monotonicity tolerated before a warning is raised.
    pub noise_tolerance_deg: f64,
}

impl Default for DeadbandParams {
    fn default() -> Self {
        DeadbandParams {
            neutral_steps: 3000.0,
            zone_threshold_steps: 200.0,
            noise_tolerance_deg: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeadbandProfile {
    /// (crossing midpoint in steps, gap in steps), ordered by position.
    pub points: Vec<(f64, f64)>,
    pub max_gap: f64,
    /// Gap interpolated at the neutral position.
    pub neutral_gap: Option<f64>,
    /// Contiguous span around the widest gap where the gap stays at or above
    /// the zone threshold.
    pub zone: Option<(f64, f64)>,
    /// Largest drop found in either averaged branch before regression.
    pub monotonicity_violation_deg: f64,
    pub warning: bool,
}

/// Horizontal distance between the ascending and descending branches at each
/// tip level both sweeps reach.
pub fn extract_deadband(
    up: &SweepRecord,
    down: &SweepRecord,
    params: &DeadbandParams,
) -> Result<DeadbandProfile, MetricsError> {
    if up.direction != Direction::Positive || down.direction != Direction::Negative {
        return Err(MetricsError::SweepDirection);
    }
    up.validate()?;
    down.validate()?;
    let (xs_up, raw_up) = up.by_steps();
    let (xs_down, raw_down) = down.by_steps();
    if xs_up[0] != xs_down[0] || xs_up[xs_up.len() - 1] != xs_down[xs_down.len() - 1] {
        return Err(MetricsError::SweepRange);
    }
    let violation = max_drop(&raw_up).max(max_drop(&raw_down));
    let asc = isotonic_non_decreasing(&raw_up);
    let desc = isotonic_non_decreasing(&raw_down);

    let lo = asc[0].max(desc[0]);
    let hi = asc[asc.len() - 1].min(desc[desc.len() - 1]);
    let mut levels: Vec<f64> = asc
        .iter()
        .chain(desc.iter())
        .copied()
        .filter(|&l| l >= lo && l <= hi)
        .collect();
    levels.sort_by(f64::total_cmp);
    levels.dedup();

    let mut points: Vec<(f64, f64)> = levels
        .iter()
        .filter_map(|&level| {
            let s_up = interp::last_at_or_below(&xs_up, &asc, level)?;
            let s_down = interp::first_at_or_above(&xs_down, &desc, level)?;
            Some((0.5 * (s_up + s_down), (s_up - s_down).max(0.0)))
        })
        .collect();
    points.sort_by(|a, b| a.0.total_cmp(&b.0));

    let (max_idx, max_gap) = points
        .iter()
        .enumerate()
        .fold((None, 0.0), |(bi, bg), (i, p)| if p.1 > bg { (Some(i), p.1) } else { (bi, bg) });

    let zone = max_idx.filter(|_| max_gap >= params.zone_threshold_steps).map(|i| {
        let inside = |j: usize| points[j].1 >= params.zone_threshold_steps;
        let mut a = i;
        while a > 0 && inside(a - 1) {
            a -= 1;
        }
        let mut b = i;
        while b + 1 < points.len() && inside(b + 1) {
            b += 1;
        }
        (points[a].0, points[b].0)
    });

    let neutral_gap = gap_at_position(&points, params.neutral_steps);
    Ok(DeadbandProfile {
        points,
        max_gap,
        neutral_gap,
        zone,
        monotonicity_violation_deg: violation,
        warning: violation > params.noise_tolerance_deg,
    })
}

fn max_drop(ys: &[f64]) -> f64 {
    let mut peak = f64::NEG_INFINITY;
    let mut drop: f64 = 0.0;
    for &y in ys {
        peak = peak.max(y);
        drop = drop.max(peak - y);
    }
    drop
}

fn gap_at_position(points: &[(f64, f64)], steps: f64) -> Option<f64> {
    let first = points.first()?;
    let last = points.last()?;
    if steps < first.0 || steps > last.0 {
        return None;
    }
    // midpoints can repeat on flat stretches; take the widest gap there
    let xs: Vec<f64> = points.iter().map(|p| p.0).collect();
    let exact = points.iter().filter(|p| p.0 == steps).map(|p| p.1).fold(None, |m: Option<f64>, g| {
        Some(m.map_or(g, |m| m.max(g)))
    });
    if exact.is_some() {
        return exact;
    }
    let hi = xs.partition_point(|&x| x <= steps);
    let (x0, g0) = points[hi - 1];
    let (x1, g1) = points[hi];
    Some(g0 + (steps - x0) / (x1 - x0) * (g1 - g0))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envelope::BacklashEnvelope;
    use alloc::vec;

    fn sample(ts_ms: u64, angle_deg: f64, cmd_on: bool) -> TraceSample {
        TraceSample {
            ts_ms,
            angle_deg,
            cmd_dir: if cmd_on { 1 } else { 0 },
            cmd_on,
        }
    }

    /// Rises linearly to `stop` over `rise_ms`, then holds for two seconds.
    fn approach(start: f64, stop: f64, rise_ms: u64) -> Vec<TraceSample> {
        (0..=(rise_ms + 2000) / 40)
            .map(|i| {
                let t = i * 40;
                let f = (t as f64 / rise_ms as f64).min(1.0);
                sample(t, start + f * (stop - start), t < rise_ms)
            })
            .collect()
    }

    #[test]
    fn approach_stopping_short() {
        let m = segment_metrics(&approach(0.0, 9.6, 1000), 10.0, &SettleParams::default()).unwrap();
        assert!((m.error_deg - 0.4).abs() < 1e-9);
        assert_eq!(m.max_overshoot_deg, 0.0);
        assert!(m.settled_at.is_some());
        // off at 1000 ms, settled one window later
        assert!((m.duration_s - 2.0).abs() < 0.05, "{}", m.duration_s);
    }

    #[test]
    fn crossing_then_returning() {
        let mut trace = approach(0.0, 12.6, 1260);
        let back = trace.last().unwrap().ts_ms;
        for i in 1..=60 {
            let t = back + i * 40;
            let a = (12.6 - 0.1 * i as f64).max(10.0);
            trace.push(TraceSample {
                ts_ms: t,
                angle_deg: a,
                cmd_dir: -1,
                cmd_on: a > 10.0,
            });
        }
        let m = max_overshoot(&trace, 10.0);
        assert!((m - 2.6).abs() < 1e-9);
    }

    #[test]
    fn still_trace_off_target() {
        let trace: Vec<_> = (0..60).map(|i| sample(i * 40, 3.0, false)).collect();
        let m = segment_metrics(&trace, 7.5, &SettleParams::default()).unwrap();
        assert_eq!(m.error_deg, 4.5);
        assert_eq!(m.max_overshoot_deg, 0.0);
    }

    #[test]
    fn empty_and_unordered_traces() {
        let p = SettleParams::default();
        assert_eq!(segment_metrics(&[], 0.0, &p), Err(MetricsError::EmptyTrace));
        let t = [sample(10, 0.0, false), sample(5, 0.0, false)];
        assert_eq!(segment_metrics(&t, 0.0, &p), Err(MetricsError::NotTimeOrdered(1)));
    }

    #[test]
    fn settle_needs_a_full_quiet_window() {
        let mut d = SettleDetector::new(SettleParams::default());
        let mut settled_at = None;
        for i in 0..100 {
            let t = i * 40;
            // still moving until 1 s, but the command was released at 800 ms
            let a = (t.min(1000)) as f64 * 0.01;
            if d.push(&sample(t, a, t < 800)) && settled_at.is_none() {
                settled_at = Some(t);
            }
        }
        let t = settled_at.unwrap();
        assert!((1800..=2100).contains(&t), "settled at {t}");
    }

    #[test]
    fn reversal_estimate_counts_unresponsive_reversals() {
        let mut trace = Vec::new();
        for i in 0..10 {
            trace.push(TraceSample { ts_ms: i * 40, angle_deg: i as f64 * 0.4, cmd_dir: 1, cmd_on: true });
        }
        // reverse: stuck for 400 ms
        for i in 10..20 {
            trace.push(TraceSample { ts_ms: i * 40, angle_deg: 3.6, cmd_dir: -1, cmd_on: true });
        }
        // reverse again: responds at once
        for i in 20..30 {
            let a = 3.6 + (i - 20) as f64 * 0.4;
            trace.push(TraceSample { ts_ms: i * 40, angle_deg: a, cmd_dir: 1, cmd_on: true });
        }
        assert_eq!(estimate_deadband_reversals(&trace, 300, 0.1), 1);
    }

    fn sweeps_from(env: &BacklashEnvelope, spacing: i64) -> (SweepRecord, SweepRecord) {
        let steps: Vec<i64> = (env.min_steps()..=env.max_steps()).step_by(spacing as usize).collect();
        let up = steps.iter().map(|&s| (s, env.ascending(s as f64))).collect();
        let down = steps.iter().rev().map(|&s| (s, env.descending(s as f64))).collect();
        (
            SweepRecord { direction: Direction::Positive, samples: up, repeats: 1 },
            SweepRecord { direction: Direction::Negative, samples: down, repeats: 1 },
        )
    }

    #[test]
    fn noiseless_lr_sweep_recovers_gap() {
        let (up, down) = sweeps_from(&BacklashEnvelope::default_steer_lr(), 400);
        let p = extract_deadband(&up, &down, &DeadbandParams::default()).unwrap();
        assert!((p.max_gap - 1200.0).abs() < 1e-6);
        assert!((p.neutral_gap.unwrap() - 1200.0).abs() < 1e-6);
        assert!(!p.warning);
    }

    #[test]
    fn noiseless_ud_sweep_recovers_taper() {
        let (up, down) = sweeps_from(&BacklashEnvelope::default_steer_ud(), 400);
        let p = extract_deadband(&up, &down, &DeadbandParams::default()).unwrap();
        assert!((p.neutral_gap.unwrap() - 640.0).abs() <= 200.0, "{:?}", p.neutral_gap);
        let (lo, hi) = p.zone.unwrap();
        assert!(lo >= 1600.0 && hi <= 4400.0, "zone {lo}..{hi}");
        for &(s, g) in &p.points {
            if !(1800.0..=4200.0).contains(&s) {
                assert!(g < 200.0, "gap {g} at {s}");
            }
        }
    }

    #[test]
    fn identical_branches_have_no_gap() {
        let samples: Vec<(i64, f64)> = (0..=10).map(|i| (i * 100, i as f64)).collect();
        let up = SweepRecord { direction: Direction::Positive, samples: samples.clone(), repeats: 1 };
        let down = SweepRecord {
            direction: Direction::Negative,
            samples: samples.into_iter().rev().collect(),
            repeats: 1,
        };
        let p = extract_deadband(&up, &down, &DeadbandParams::default()).unwrap();
        assert!(p.points.iter().all(|&(_, g)| g == 0.0));
        assert_eq!(p.zone, None);
    }

    #[test]
    fn non_monotone_sweep_warns() {
        let up = SweepRecord {
            direction: Direction::Positive,
            samples: vec![(0, 0.0), (100, 1.0), (200, 0.5), (300, 3.0)],
            repeats: 1,
        };
        let down = SweepRecord {
            direction: Direction::Negative,
            samples: vec![(300, 3.0), (200, 2.0), (100, 1.0), (0, 0.0)],
            repeats: 1,
        };
        let p = extract_deadband(&up, &down, &DeadbandParams::default()).unwrap();
        assert!(p.warning);
        assert!((p.monotonicity_violation_deg - 0.5).abs() < 1e-12);
    }

    #[test]
    fn sweep_validation() {
        let bad = SweepRecord { direction: Direction::Positive, samples: vec![(0, 0.0), (0, 1.0)], repeats: 1 };
        assert_eq!(bad.validate(), Err(MetricsError::SweepOrder(1)));
        let (up, mut down) = sweeps_from(&BacklashEnvelope::default_steer_lr(), 400);
        down.samples.pop();
        assert_eq!(
            extract_deadband(&up, &down, &DeadbandParams::default()),
            Err(MetricsError::SweepRange)
        );
    }
}
