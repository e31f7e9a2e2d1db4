//! The four-axis probe plant.
//!
//! [`ProbeState`] is plain data; [`ProbeModel`] carries the calibration and
//! implements the transitions. All mutation goes through
//! [`ProbeModel::apply_axis_command`] and [`ProbeModel::advance`].

use crate::axis::{AxisId, Direction, MotorAxis};
use crate::calib::Calibration;
use crate::hysteresis::{play_update, HysteresisState};

/// Simulation tick used in virtual-time mode.
pub const TICK_MS: u64 = 5;

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeState {
    axes: [MotorAxis; 4],
    hysteresis: [HysteresisState; 2],
    clock_ms: u64,
}

impl ProbeState {
    pub fn axis(&self, axis: AxisId) -> &MotorAxis {
        &self.axes[axis.index()]
    }

    pub fn position(&self, axis: AxisId) -> i64 {
        self.axes[axis.index()].position_steps()
    }

    /// Play-operator memory of a steering axis.
    pub fn hysteresis(&self, axis: AxisId) -> Option<HysteresisState> {
        axis.steering_index().map(|i| self.hysteresis[i])
    }

    pub fn clock_ms(&self) -> u64 {
        self.clock_ms
    }

    pub fn any_engaged(&self) -> bool {
        self.axes.iter().any(|a| a.engaged().is_some())
    }
}

/// Pose of the probe tip.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct TipPose {
    pub roll_deg: f64,
    pub pitch_deg: f64,
    pub yaw_deg: f64,
    pub insertion_mm: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ProbeModel {
    calibration: Calibration,
}

impl ProbeModel {
    pub fn new(calibration: Calibration) -> Self {
        ProbeModel { calibration }
    }

    pub fn calibration(&self) -> &Calibration {
        &self.calibration
    }

    /// All axes at neutral, steering memories halfway between the branches.
    pub fn initial_state(&self) -> ProbeState {
        let c = &self.calibration;
        let steer = |s: &crate::calib::SteeringCalibration| {
            MotorAxis::new(
                s.envelope.min_steps(),
                s.envelope.max_steps(),
                s.neutral_steps,
                s.rate_steps_per_s,
            )
        };
        let linear = |l: &crate::calib::LinearCalibration| {
            MotorAxis::new(l.min_steps, l.max_steps, l.neutral_steps, l.rate_steps_per_s)
        };
        ProbeState {
            axes: [
                linear(&c.translation),
                linear(&c.rotation),
                steer(&c.steer_lr),
                steer(&c.steer_ud),
            ],
            hysteresis: [
                HysteresisState::at_midpoint(&c.steer_lr.envelope, c.steer_lr.neutral_steps),
                HysteresisState::at_midpoint(&c.steer_ud.envelope, c.steer_ud.neutral_steps),
            ],
            clock_ms: 0,
        }
    }

    /// Engages `axis` in `dir` when `on`, otherwise stops it. Takes effect
    /// from the next [`advance`](Self::advance).
    pub fn apply_axis_command(&self, state: &mut ProbeState, axis: AxisId, dir: Direction, on: bool) {
        state.axes[axis.index()].set_engaged(on.then_some(dir));
    }

    pub fn stop_all(&self, state: &mut ProbeState) {
        for axis in &mut state.axes {
            axis.set_engaged(None);
        }
    }

    /// Integrates every engaged axis for `dt_ms` and updates the steering
    /// memories. Motion within one call is monotone per axis, so a single
    /// play update at the final position is exact.
    pub fn advance(&self, state: &mut ProbeState, dt_ms: u64) {
        if dt_ms == 0 {
            return;
        }
        for axis in AxisId::ALL {
            let motor = &mut state.axes[axis.index()];
            if motor.engaged().is_none() {
                continue;
            }
            let pos = motor.advance(dt_ms);
            if let (Some(i), Some(steer)) = (axis.steering_index(), self.calibration.steering(axis)) {
                state.hysteresis[i] = play_update(&steer.envelope, state.hysteresis[i], pos)
                    .expect("motor bounds coincide with the envelope grid");
            }
        }
        state.clock_ms += dt_ms;
    }

    pub fn tip_pose(&self, state: &ProbeState) -> TipPose {
        let c = &self.calibration;
        TipPose {
            roll_deg: c.rotation.output(state.position(AxisId::Rotation)),
            pitch_deg: state.hysteresis[1].tip_deg,
            yaw_deg: state.hysteresis[0].tip_deg,
            insertion_mm: c.translation.output(state.position(AxisId::Translation)),
        }
    }

    /// Whether engaging `dir` on a steering axis would start inside its
    /// deadband, so the tip does not respond at first.
    pub fn reversal_blocked(&self, state: &ProbeState, axis: AxisId, dir: Direction) -> bool {
        match (axis.steering_index(), self.calibration.steering(axis)) {
            (Some(i), Some(steer)) => {
                state.hysteresis[i].blocks(&steer.envelope, state.position(axis), dir)
            }
            _ => false,
        }
    }

    /// Puts a steering axis at `steps` with its memory on the branch of the
    /// given travel direction. Used to stage experiments.
    pub fn place_on_branch(&self, state: &mut ProbeState, axis: AxisId, steps: i64, branch: Direction) {
        let motor = &mut state.axes[axis.index()];
        motor.set_position(steps);
        let steps = motor.position_steps();
        if let (Some(i), Some(steer)) = (axis.steering_index(), self.calibration.steering(axis)) {
            let s = steps as f64;
            state.hysteresis[i].tip_deg = match branch {
                Direction::Positive => steer.envelope.ascending(s),
                Direction::Negative => steer.envelope.descending(s),
            };
        }
    }
}
