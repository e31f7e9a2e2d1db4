//! Calibrated backlash envelopes for the steering axes.
//!
//! An envelope holds two curves sampled on a common step grid: the tip angle
//! traced while the motor position increases (ascending branch) and while it
//! decreases (descending branch). The descending branch lies on or above the
//! ascending one; the horizontal distance between them is the deadband that
//! must be traversed after a reversal before the tip responds.

use alloc::vec::Vec;
use thiserror::Error;

use crate::interp;

/// Branches closer than this are treated as coincident.
pub const COINCIDENT_DEG: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnvelopeError {
    #[error("envelope needs at least two grid points")]
    TooShort,
    #[error("grid has {grid} points but ascending has {ascending} and descending has {descending}")]
    LengthMismatch {
        grid: usize,
        ascending: usize,
        descending: usize,
    },
    #[error("grid is not strictly increasing at index {index}")]
    GridNotIncreasing { index: usize },
    #[error("non-finite angle at index {index}")]
    NonFinite { index: usize },
    #[error("ascending branch decreases at index {index}")]
    AscendingDecreases { index: usize },
    #[error("descending branch decreases at index {index}")]
    DescendingDecreases { index: usize },
    #[error("descending branch below ascending branch at index {index}")]
    BranchOrder { index: usize },
    #[error("branches differ outside the hysteresis zone at index {index}")]
    OpenOutsideZone { index: usize },
    #[error("hysteresis zone [{lo}, {hi}] is not inside the grid")]
    ZoneOutOfRange { lo: i64, hi: i64 },
}

/// Ascending/descending calibration branches over a strictly increasing grid.
#[derive(Debug, Clone, PartialEq)]
pub struct BacklashEnvelope {
    grid: Vec<i64>,
    grid_f: Vec<f64>,
    ascending: Vec<f64>,
    descending: Vec<f64>,
    zone: (i64, i64),
}

impl BacklashEnvelope {
    pub fn new(
        grid: Vec<i64>,
        ascending: Vec<f64>,
        descending: Vec<f64>,
        zone: (i64, i64),
    ) -> Result<Self, EnvelopeError> {
        if grid.len() != ascending.len() || grid.len() != descending.len() {
            return Err(EnvelopeError::LengthMismatch {
                grid: grid.len(),
                ascending: ascending.len(),
                descending: descending.len(),
            });
        }
        if grid.len() < 2 {
            return Err(EnvelopeError::TooShort);
        }
        for i in 0..grid.len() {
            if !ascending[i].is_finite() || !descending[i].is_finite() {
                return Err(EnvelopeError::NonFinite { index: i });
            }
            if i > 0 {
                if grid[i] <= grid[i - 1] {
                    return Err(EnvelopeError::GridNotIncreasing { index: i });
                }
                if ascending[i] < ascending[i - 1] {
                    return Err(EnvelopeError::AscendingDecreases { index: i });
                }
                if descending[i] < descending[i - 1] {
                    return Err(EnvelopeError::DescendingDecreases { index: i });
                }
            }
            if descending[i] < ascending[i] {
                return Err(EnvelopeError::BranchOrder { index: i });
            }
        }
        let (lo, hi) = zone;
        if lo > hi || lo < grid[0] || hi > grid[grid.len() - 1] {
            return Err(EnvelopeError::ZoneOutOfRange { lo, hi });
        }
        for (i, &s) in grid.iter().enumerate() {
            if (s < lo || s > hi) && descending[i] - ascending[i] >= COINCIDENT_DEG {
                return Err(EnvelopeError::OpenOutsideZone { index: i });
            }
        }
        let grid_f = grid.iter().map(|&s| s as f64).collect();
        Ok(BacklashEnvelope {
            grid,
            grid_f,
            ascending,
            descending,
            zone,
        })
    }

    pub fn grid(&self) -> &[i64] {
        &self.grid
    }

    pub fn ascending_samples(&self) -> &[f64] {
        &self.ascending
    }

    pub fn descending_samples(&self) -> &[f64] {
        &self.descending
    }

    pub fn zone(&self) -> (i64, i64) {
        self.zone
    }

    pub fn min_steps(&self) -> i64 {
        self.grid[0]
    }

    pub fn max_steps(&self) -> i64 {
        self.grid[self.grid.len() - 1]
    }

    pub fn contains(&self, steps: i64) -> bool {
        (self.min_steps()..=self.max_steps()).contains(&steps)
    }

    /// Tip angle on the ascending branch at `steps`.
    pub fn ascending(&self, steps: f64) -> f64 {
        interp::lerp(&self.grid_f, &self.ascending, steps)
    }

    /// Tip angle on the descending branch at `steps`.
    pub fn descending(&self, steps: f64) -> f64 {
        interp::lerp(&self.grid_f, &self.descending, steps)
    }

    /// Tip levels reached by both branches.
    pub fn level_range(&self) -> (f64, f64) {
        (self.descending[0], self.ascending[self.ascending.len() - 1])
    }

    /// Step position at which an increasing sweep leaves `level`.
    pub fn ascending_position(&self, level: f64) -> Option<f64> {
        interp::last_at_or_below(&self.grid_f, &self.ascending, level)
    }

    /// Step position at which a decreasing sweep leaves `level`.
    pub fn descending_position(&self, level: f64) -> Option<f64> {
        interp::first_at_or_above(&self.grid_f, &self.descending, level)
    }

    /// Horizontal distance in steps between the branches at tip level `level`.
    pub fn gap_at_level(&self, level: f64) -> Option<f64> {
        let (lo, hi) = self.level_range();
        if level < lo || level > hi {
            return None;
        }
        let up = self.ascending_position(level)?;
        let down = self.descending_position(level)?;
        Some((up - down).max(0.0))
    }

    /// Deadband width of the loop whose two crossings are centred on `steps`.
    ///
    /// The midpoint of the crossings is non-decreasing in the tip level, so
    /// the level is found by bisection. `None` when no level both branches
    /// reach is centred on `steps`.
    pub fn gap_centered_at(&self, steps: f64) -> Option<f64> {
        let midpoint = |level: f64| -> Option<f64> {
            Some((self.ascending_position(level)? + self.descending_position(level)?) / 2.0)
        };
        let (mut lo, mut hi) = self.level_range();
        if lo > hi {
            return None;
        }
        let (m_lo, m_hi) = (midpoint(lo)?, midpoint(hi)?);
        if steps < m_lo - 1e-9 || steps > m_hi + 1e-9 {
            return None;
        }
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if midpoint(mid)? < steps {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        self.gap_at_level(0.5 * (lo + hi))
    }

    /// Builds the constant-gap loop used for the left-right axis: both
    /// branches are straight lines of the same slope, shifted horizontally by
    /// `gap` and centred on `neutral`.
    pub fn constant_gap(shape: &ConstantGapShape) -> Self {
        let half = shape.gap as f64 / 2.0;
        let grid = uniform_grid(shape.min_steps, shape.max_steps, shape.grid_spacing, &[]);
        let ascending = grid
            .iter()
            .map(|&s| shape.slope_deg_per_step * (s as f64 - shape.neutral as f64 - half))
            .collect();
        let descending = grid
            .iter()
            .map(|&s| shape.slope_deg_per_step * (s as f64 - shape.neutral as f64 + half))
            .collect();
        BacklashEnvelope::new(
            grid,
            ascending,
            descending,
            (shape.min_steps, shape.max_steps),
        )
        .expect("constant-gap shape parameters must describe a valid envelope")
    }

    /// Builds the tapered loop used for the up-down axis.
    ///
    /// Inside the zone each branch is two straight segments with a kink at
    /// the neutral tip level, where the branches are `gap` steps apart. The
    /// ascending branch runs at `ascending_slope` from the lower zone edge to
    /// its kink, the descending branch at `descending_slope` from its kink to
    /// the upper zone edge, and both close at the zone edges, so the gap
    /// shrinks linearly with tip level to zero there. Outside the zone the
    /// branches coincide on cubic segments whose slope decays to zero at the
    /// travel limits.
    pub fn tapered(shape: &TaperedShape) -> Self {
        let n = shape.neutral as f64;
        let half = shape.gap as f64 / 2.0;
        let (z_lo, z_hi) = (shape.zone.0 as f64, shape.zone.1 as f64);
        let (a, d) = (shape.ascending_slope, shape.descending_slope);
        let kink_up = n + half;
        let kink_down = n - half;
        // kink level chosen so that the branch midpoint at neutral is zero
        let level = (a - d) * shape.gap as f64 / 4.0;
        let c_lo = level - a * (kink_up - z_lo);
        let c_hi = level + d * (z_hi - kink_down);
        let (min, max) = (shape.min_steps as f64, shape.max_steps as f64);

        let outer = |s: f64| -> Option<f64> {
            if s < z_lo {
                let span = z_lo - min;
                let x = (z_lo - s) / span;
                Some(c_lo - a * span * (x - x * x + x * x * x / 3.0))
            } else if s > z_hi {
                let span = max - z_hi;
                let x = (s - z_hi) / span;
                Some(c_hi + d * span * (x - x * x + x * x * x / 3.0))
            } else {
                None
            }
        };
        let asc = |s: f64| {
            outer(s).unwrap_or_else(|| {
                if s <= kink_up {
                    c_lo + a * (s - z_lo)
                } else {
                    level + (c_hi - level) * (s - kink_up) / (z_hi - kink_up)
                }
            })
        };
        let desc = |s: f64| {
            outer(s).unwrap_or_else(|| {
                if s <= kink_down {
                    c_lo + (level - c_lo) * (s - z_lo) / (kink_down - z_lo)
                } else {
                    level + d * (s - kink_down)
                }
            })
        };

        let extra = [
            shape.zone.0,
            shape.zone.1,
            shape.neutral - shape.gap / 2,
            shape.neutral + shape.gap / 2,
        ];
        let grid = uniform_grid(shape.min_steps, shape.max_steps, shape.grid_spacing, &extra);
        let ascending: Vec<f64> = grid.iter().map(|&s| asc(s as f64)).collect();
        let mut descending: Vec<f64> = grid.iter().map(|&s| desc(s as f64)).collect();
        for (i, &s) in grid.iter().enumerate() {
            if s <= shape.zone.0 || s >= shape.zone.1 {
                descending[i] = ascending[i];
            }
        }
        BacklashEnvelope::new(grid, ascending, descending, shape.zone)
            .expect("tapered shape parameters must describe a valid envelope")
    }

    /// Default left-right calibration: 1200-step deadband over the whole travel.
    pub fn default_steer_lr() -> Self {
        Self::constant_gap(&ConstantGapShape::default())
    }

    /// Default up-down calibration: 640-step deadband at neutral, closing at
    /// 1800 and 4200 steps.
    pub fn default_steer_ud() -> Self {
        Self::tapered(&TaperedShape::default())
    }
}

fn uniform_grid(min: i64, max: i64, spacing: i64, extra: &[i64]) -> Vec<i64> {
    let mut grid: Vec<i64> = (0..)
        .map(|k| min + k * spacing)
        .take_while(|&s| s < max)
        .chain(core::iter::once(max))
        .chain(extra.iter().copied().filter(|&s| s > min && s < max))
        .collect();
    grid.sort_unstable();
    grid.dedup();
    grid
}

/// Parameters of [`BacklashEnvelope::constant_gap`].
#[derive(Debug, Clone, PartialEq)]
pub struct ConstantGapShape {
    pub min_steps: i64,
    pub max_steps: i64,
    pub neutral: i64,
    pub gap: i64,
    pub slope_deg_per_step: f64,
    pub grid_spacing: i64,
}

impl Default for ConstantGapShape {
    fn default() -> Self {
        ConstantGapShape {
            min_steps: 0,
            max_steps: 6000,
            neutral: 3000,
            gap: 1200,
            slope_deg_per_step: 0.025,
            grid_spacing: 100,
        }
    }
}

/// Parameters of [`BacklashEnvelope::tapered`].
#[derive(Debug, Clone, PartialEq)]
pub struct TaperedShape {
    pub min_steps: i64,
    pub max_steps: i64,
    pub neutral: i64,
    pub zone: (i64, i64),
    pub gap: i64,
    pub ascending_slope: f64,
    pub descending_slope: f64,
    pub grid_spacing: i64,
}

impl Default for TaperedShape {
    fn default() -> Self {
        TaperedShape {
            min_steps: 0,
            max_steps: 6000,
            neutral: 3000,
            zone: (1800, 4200),
            gap: 640,
            ascending_slope: 0.020,
            descending_slope: 0.026,
            grid_spacing: 100,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn lr_default_matches_linear_branches() {
        let env = BacklashEnvelope::default_steer_lr();
        for s in (0..=6000).step_by(37) {
            let s = s as f64;
            assert!(close(env.ascending(s), 0.025 * (s - 3600.0), 1e-9));
            assert!(close(env.descending(s), 0.025 * (s - 2400.0), 1e-9));
        }
    }

    #[test]
    fn lr_gap_is_1200_wherever_defined() {
        let env = BacklashEnvelope::default_steer_lr();
        for s in (600..=5400).step_by(100) {
            let gap = env.gap_centered_at(s as f64).unwrap();
            assert!(close(gap, 1200.0, 1e-6), "gap {gap} at {s}");
        }
    }

    #[test]
    fn ud_default_gap_profile() {
        let env = BacklashEnvelope::default_steer_ud();
        assert!(close(env.gap_centered_at(3000.0).unwrap(), 640.0, 1e-6));
        for s in [0.0, 600.0, 1200.0, 1800.0, 4200.0, 5000.0, 6000.0] {
            assert!(env.gap_centered_at(s).unwrap() < 1e-6, "open at {s}");
        }
        // gap shrinks monotonically away from neutral
        let mut prev = 640.0;
        for s in (3000..=4200).step_by(100) {
            let g = env.gap_centered_at(s as f64).unwrap();
            assert!(g <= prev + 1e-6);
            prev = g;
        }
    }

    #[test]
    fn ud_default_is_symmetric_about_zero_at_neutral() {
        let env = BacklashEnvelope::default_steer_ud();
        let mid = 0.5 * (env.ascending(3000.0) + env.descending(3000.0));
        assert!(close(mid, 0.0, 1e-12));
        // dominant in-zone slopes
        assert!(close(env.ascending(2600.0) - env.ascending(2500.0), 2.0, 1e-9));
        assert!(close(env.descending(4000.0) - env.descending(3900.0), 2.6, 1e-9));
    }

    #[test]
    fn rejects_descending_below_ascending() {
        let err = BacklashEnvelope::new(
            vec![0, 10, 20],
            vec![0.0, 1.0, 2.0],
            vec![0.0, 0.5, 2.0],
            (0, 20),
        )
        .unwrap_err();
        assert_eq!(err, EnvelopeError::BranchOrder { index: 1 });
    }

    #[test]
    fn rejects_non_monotone_branch() {
        let err = BacklashEnvelope::new(
            vec![0, 10, 20],
            vec![0.0, 1.0, 0.9],
            vec![0.0, 1.5, 2.0],
            (0, 20),
        )
        .unwrap_err();
        assert_eq!(err, EnvelopeError::AscendingDecreases { index: 2 });
    }

    #[test]
    fn rejects_open_loop_outside_zone() {
        let err = BacklashEnvelope::new(
            vec![0, 10, 20],
            vec![0.0, 1.0, 2.0],
            vec![0.5, 1.5, 2.0],
            (10, 20),
        )
        .unwrap_err();
        assert_eq!(err, EnvelopeError::OpenOutsideZone { index: 0 });
    }

    #[test]
    fn rejects_bad_grid() {
        assert_eq!(
            BacklashEnvelope::new(vec![0, 0], vec![0.0; 2], vec![0.0; 2], (0, 0)).unwrap_err(),
            EnvelopeError::GridNotIncreasing { index: 1 }
        );
        assert_eq!(
            BacklashEnvelope::new(vec![0], vec![0.0], vec![0.0], (0, 0)).unwrap_err(),
            EnvelopeError::TooShort
        );
    }
}
