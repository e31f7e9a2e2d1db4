//! Rate-independent play operator for backlash on the steering axes.

use thiserror::Error;

use crate::axis::Direction;
use crate::envelope::BacklashEnvelope;

/// Tolerance used when deciding whether the tip sits on a branch.
const ON_BRANCH_DEG: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
#[error("step position {steps} outside envelope range [{min}, {max}]")]
pub struct RangeError {
    pub steps: i64,
    pub min: i64,
    pub max: i64,
}

/// Memory of the play operator: the current tip angle of one steering axis.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HysteresisState {
    pub tip_deg: f64,
}

impl HysteresisState {
    /// Starts halfway between the branches at `steps`.
    pub fn at_midpoint(env: &BacklashEnvelope, steps: i64) -> Self {
        let s = steps as f64;
        HysteresisState {
            tip_deg: 0.5 * (env.ascending(s) + env.descending(s)),
        }
    }

    /// Whether engaging `dir` at `steps` leaves the tip unresponsive, i.e. the
    /// branch that direction follows is not the one the tip currently sits on.
    pub fn blocks(&self, env: &BacklashEnvelope, steps: i64, dir: Direction) -> bool {
        let s = steps as f64;
        match dir {
            Direction::Positive => self.tip_deg > env.ascending(s) + ON_BRANCH_DEG,
            Direction::Negative => self.tip_deg < env.descending(s) - ON_BRANCH_DEG,
        }
    }

    /// Strictly between the branches.
    pub fn inside_loop(&self, env: &BacklashEnvelope, steps: i64) -> bool {
        self.blocks(env, steps, Direction::Positive) && self.blocks(env, steps, Direction::Negative)
    }
}

/// Moves the play operator to step position `steps`.
///
/// The new tip angle is the old one clamped between the two branches, which
/// holds the output still while a reversal crosses the deadband. The result
/// depends only on the sequence of positions, never on timing.
pub fn play_update(
    env: &BacklashEnvelope,
    mem: HysteresisState,
    steps: i64,
) -> Result<HysteresisState, RangeError> {
    if !env.contains(steps) {
        return Err(RangeError {
            steps,
            min: env.min_steps(),
            max: env.max_steps(),
        });
    }
    let s = steps as f64;
    let tip = mem.tip_deg.max(env.ascending(s)).min(env.descending(s));
    Ok(HysteresisState { tip_deg: tip })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn on_ascending_at(env: &BacklashEnvelope, steps: i64) -> HysteresisState {
        HysteresisState {
            tip_deg: env.ascending(steps as f64),
        }
    }

    #[test]
    fn reversal_inside_deadband_holds_the_tip() {
        let env = BacklashEnvelope::default_steer_lr();
        let mem = on_ascending_at(&env, 4000);
        assert_eq!(mem.tip_deg, 10.0);
        let next = play_update(&env, mem, 3800).unwrap();
        assert_eq!(next.tip_deg, 10.0);
    }

    #[test]
    fn reversal_re_engages_after_1200_steps() {
        let env = BacklashEnvelope::default_steer_lr();
        let mem = on_ascending_at(&env, 4000);
        let at_edge = play_update(&env, mem, 2800).unwrap();
        assert!((at_edge.tip_deg - 10.0).abs() < 1e-12);
        assert!((env.descending(2800.0) - 10.0).abs() < 1e-12);
        let beyond = play_update(&env, at_edge, 2700).unwrap();
        assert!((beyond.tip_deg - 7.5).abs() < 1e-12);
    }

    #[test]
    fn monotone_up_sweep_follows_ascending_branch() {
        let env = BacklashEnvelope::default_steer_ud();
        let mut mem = on_ascending_at(&env, 0);
        for s in 0..=6000 {
            mem = play_update(&env, mem, s).unwrap();
            assert!((mem.tip_deg - env.ascending(s as f64)).abs() < 1e-12);
        }
    }

    #[test]
    fn out_of_range_is_an_error() {
        let env = BacklashEnvelope::default_steer_lr();
        let mem = HysteresisState::at_midpoint(&env, 3000);
        assert_eq!(
            play_update(&env, mem, 6001).unwrap_err(),
            RangeError {
                steps: 6001,
                min: 0,
                max: 6000
            }
        );
    }

    #[test]
    fn blocking_depends_on_direction() {
        let env = BacklashEnvelope::default_steer_lr();
        let mem = on_ascending_at(&env, 4000);
        assert!(!mem.blocks(&env, 4000, Direction::Positive));
        assert!(mem.blocks(&env, 4000, Direction::Negative));
        assert!(!mem.inside_loop(&env, 4000));
        let mid = HysteresisState::at_midpoint(&env, 3000);
        assert!(mid.inside_loop(&env, 3000));
    }
}
