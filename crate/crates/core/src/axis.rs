//! Motor axes of the probe robot.

use core::fmt;

/// The four actuated degrees of freedom.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum AxisId {
    /// Insertion along the long axis of the probe.
    Translation,
    /// Rotation about the long axis.
    Rotation,
    /// Left-right bending of the tip.
    SteerLR,
    /// Up-down bending of the tip.
    SteerUD,
}

impl AxisId {
    pub const ALL: [AxisId; 4] = [
        AxisId::Translation,
        AxisId::Rotation,
        AxisId::SteerLR,
        AxisId::SteerUD,
    ];

    pub const STEERING: [AxisId; 2] = [AxisId::SteerLR, AxisId::SteerUD];

    pub fn index(self) -> usize {
        match self {
            AxisId::Translation => 0,
            AxisId::Rotation => 1,
            AxisId::SteerLR => 2,
            AxisId::SteerUD => 3,
        }
    }

    /// Only the wire-driven steering axes carry backlash.
    pub fn has_hysteresis(self) -> bool {
        matches!(self, AxisId::SteerLR | AxisId::SteerUD)
    }

    /// Index into the two-element steering arrays, if this is a steering axis.
    pub fn steering_index(self) -> Option<usize> {
        match self {
            AxisId::SteerLR => Some(0),
            AxisId::SteerUD => Some(1),
            _ => None,
        }
    }

    pub fn wire_code(self) -> &'static str {
        match self {
            AxisId::Translation => "TR",
            AxisId::Rotation => "RO",
            AxisId::SteerLR => "LR",
            AxisId::SteerUD => "UD",
        }
    }

    pub fn from_wire_code(code: &str) -> Option<Self> {
        match code {
            "TR" => Some(AxisId::Translation),
            "RO" => Some(AxisId::Rotation),
            "LR" => Some(AxisId::SteerLR),
            "UD" => Some(AxisId::SteerUD),
            _ => None,
        }
    }
}

impl fmt::Display for AxisId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.wire_code())
    }
}

/// Stepping direction of an engaged axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum Direction {
    Negative,
    Positive,
}

impl Direction {
    pub fn sign(self) -> i8 {
        match self {
            Direction::Negative => -1,
            Direction::Positive => 1,
        }
    }

    pub fn from_sign(sign: i64) -> Option<Self> {
        match sign {
            -1 => Some(Direction::Negative),
            1 => Some(Direction::Positive),
            _ => None,
        }
    }

    /// Direction that moves from `from` towards `to`; `None` when equal.
    pub fn towards(from: f64, to: f64) -> Option<Self> {
        if to > from {
            Some(Direction::Positive)
        } else if to < from {
            Some(Direction::Negative)
        } else {
            None
        }
    }

    pub fn reversed(self) -> Self {
        match self {
            Direction::Negative => Direction::Positive,
            Direction::Positive => Direction::Negative,
        }
    }
}

/// Rates are kept in milli-steps per second and motion is integrated in
/// micro-steps so that splitting an interval never changes the result.
const MICRO_PER_STEP: u64 = 1_000_000;

/// A constant-rate stepper axis with hard travel limits.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct MotorAxis {
    position_steps: i64,
    min_steps: i64,
    max_steps: i64,
    rate_milli_steps_per_s: u64,
    engaged: Option<Direction>,
    residual_micro_steps: u64,
}

impl MotorAxis {
    /// Panics if the bounds are inverted, the start lies outside them, or the
    /// rate is not a positive finite number.
    pub fn new(min_steps: i64, max_steps: i64, position_steps: i64, rate_steps_per_s: f64) -> Self {
        assert!(min_steps <= max_steps, "inverted axis bounds");
        assert!(
            (min_steps..=max_steps).contains(&position_steps),
            "start position outside axis bounds"
        );
        assert!(
            rate_steps_per_s.is_finite() && rate_steps_per_s > 0.0,
            "axis rate must be positive"
        );
        MotorAxis {
            position_steps,
            min_steps,
            max_steps,
            rate_milli_steps_per_s: libm::round(rate_steps_per_s * 1000.0) as u64,
            engaged: None,
            residual_micro_steps: 0,
        }
    }

    pub fn position_steps(&self) -> i64 {
        self.position_steps
    }

    pub fn min_steps(&self) -> i64 {
        self.min_steps
    }

    pub fn max_steps(&self) -> i64 {
        self.max_steps
    }

    pub fn rate_steps_per_s(&self) -> f64 {
        self.rate_milli_steps_per_s as f64 / 1000.0
    }

    pub fn engaged(&self) -> Option<Direction> {
        self.engaged
    }

    /// Engaged direction as -1, 0 or +1.
    pub fn engaged_dir(&self) -> i8 {
        self.engaged.map_or(0, Direction::sign)
    }

    pub fn set_engaged(&mut self, dir: Option<Direction>) {
        if self.engaged != dir {
            self.residual_micro_steps = 0;
        }
        self.engaged = dir;
    }

    /// Moves the axis for `dt_ms` at its rate; returns the new position.
    pub fn advance(&mut self, dt_ms: u64) -> i64 {
        let Some(dir) = self.engaged else {
            return self.position_steps;
        };
        // milli-steps/s * ms = micro-steps
        let total = self.residual_micro_steps + self.rate_milli_steps_per_s * dt_ms;
        let whole = (total / MICRO_PER_STEP) as i64;
        self.residual_micro_steps = total % MICRO_PER_STEP;
        let target = self.position_steps + i64::from(dir.sign()) * whole;
        let clamped = target.clamp(self.min_steps, self.max_steps);
        if clamped != target {
            self.residual_micro_steps = 0;
        }
        self.position_steps = clamped;
        clamped
    }

    /// Places the axis directly, e.g. when restoring a snapshot.
    pub fn set_position(&mut self, steps: i64) {
        self.position_steps = steps.clamp(self.min_steps, self.max_steps);
        self.residual_micro_steps = 0;
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn wire_codes_round_trip() {
        for axis in AxisId::ALL {
            assert_eq!(AxisId::from_wire_code(axis.wire_code()), Some(axis));
        }
        assert_eq!(AxisId::from_wire_code("XX"), None);
    }

    #[test]
    fn only_steering_axes_have_hysteresis() {
        let with: alloc::vec::Vec<_> = AxisId::ALL
            .iter()
            .filter(|a| a.has_hysteresis())
            .collect();
        assert_eq!(with, [&AxisId::SteerLR, &AxisId::SteerUD]);
    }

    #[test]
    fn one_second_at_400_steps_per_second() {
        let mut axis = MotorAxis::new(0, 6000, 3000, 400.0);
        axis.set_engaged(Some(Direction::Positive));
        assert_eq!(axis.advance(1000), 3400);
    }

    #[test]
    fn disengaged_axis_does_not_move() {
        let mut axis = MotorAxis::new(0, 6000, 3000, 400.0);
        axis.advance(10_000);
        assert_eq!(axis.position_steps(), 3000);
    }

    #[test]
    fn clamps_at_limits() {
        let mut axis = MotorAxis::new(0, 6000, 6000, 400.0);
        axis.set_engaged(Some(Direction::Positive));
        assert_eq!(axis.advance(1000), 6000);
        axis.set_engaged(Some(Direction::Negative));
        assert_eq!(axis.advance(100_000), 0);
    }

    #[test]
    fn fractional_steps_accumulate_exactly() {
        let mut split = MotorAxis::new(0, 6000, 0, 333.0);
        split.set_engaged(Some(Direction::Positive));
        for _ in 0..1000 {
            split.advance(1);
        }
        let mut whole = MotorAxis::new(0, 6000, 0, 333.0);
        whole.set_engaged(Some(Direction::Positive));
        whole.advance(1000);
        assert_eq!(split, whole);
        assert_eq!(whole.position_steps(), 333);
    }
}
