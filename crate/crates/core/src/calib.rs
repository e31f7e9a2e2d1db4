//! Calibration documents: envelopes for the steering axes and linear maps
//! for rotation and translation.
//!
//! Deadbands depend on how the flexible shaft is laid out, so every number
//! that shapes the plant lives in a JSON document rather than in code.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec::Vec;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::axis::AxisId;
use crate::envelope::{BacklashEnvelope, EnvelopeError};

pub const DEFAULT_RATE_STEPS_PER_S: f64 = 400.0;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CalibrationError {
    #[error("calibration parse error: {0}")]
    Parse(String),
    #[error("{axis} envelope invalid: {source}")]
    Envelope {
        axis: AxisId,
        #[source]
        source: EnvelopeError,
    },
    #[error("{axis}: {detail}")]
    Axis { axis: AxisId, detail: String },
    #[error("steps_per_wheel_degree must be positive")]
    WheelScale,
}

/// A steering axis: travel, neutral position and backlash envelope.
#[derive(Debug, Clone, PartialEq)]
pub struct SteeringCalibration {
    pub envelope: BacklashEnvelope,
    pub neutral_steps: i64,
    pub rate_steps_per_s: f64,
}

/// A hysteresis-free axis with a linear steps-to-output map.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearCalibration {
    /// Steps per degree (rotation) or per millimetre (translation).
    pub steps_per_unit: f64,
    pub min_steps: i64,
    pub max_steps: i64,
    pub neutral_steps: i64,
    pub rate_steps_per_s: f64,
}

impl LinearCalibration {
    pub fn output(&self, steps: i64) -> f64 {
        (steps - self.neutral_steps) as f64 / self.steps_per_unit
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Calibration {
    pub steps_per_wheel_degree: f64,
    pub steer_lr: SteeringCalibration,
    pub steer_ud: SteeringCalibration,
    pub rotation: LinearCalibration,
    pub translation: LinearCalibration,
}

impl Default for Calibration {
    fn default() -> Self {
        Calibration {
            steps_per_wheel_degree: 80.0,
            steer_lr: SteeringCalibration {
                envelope: BacklashEnvelope::default_steer_lr(),
                neutral_steps: 3000,
                rate_steps_per_s: DEFAULT_RATE_STEPS_PER_S,
            },
            steer_ud: SteeringCalibration {
                envelope: BacklashEnvelope::default_steer_ud(),
                neutral_steps: 3000,
                rate_steps_per_s: DEFAULT_RATE_STEPS_PER_S,
            },
            rotation: LinearCalibration {
                steps_per_unit: 10.0,
                min_steps: -1800,
                max_steps: 1800,
                neutral_steps: 0,
                rate_steps_per_s: DEFAULT_RATE_STEPS_PER_S,
            },
            translation: LinearCalibration {
                steps_per_unit: 100.0,
                min_steps: 0,
                max_steps: 6000,
                neutral_steps: 0,
                rate_steps_per_s: DEFAULT_RATE_STEPS_PER_S,
            },
        }
    }
}

impl Calibration {
    pub fn steering(&self, axis: AxisId) -> Option<&SteeringCalibration> {
        match axis {
            AxisId::SteerLR => Some(&self.steer_lr),
            AxisId::SteerUD => Some(&self.steer_ud),
            _ => None,
        }
    }

    /// Converts motor steps on a steering axis to handle-wheel degrees.
    pub fn steps_to_wheel_deg(&self, steps: f64) -> f64 {
        steps / self.steps_per_wheel_degree
    }

    pub fn from_json(text: &str) -> Result<Self, CalibrationError> {
        let doc: CalibrationDoc =
            serde_json::from_str(text).map_err(|e| CalibrationError::Parse(e.to_string()))?;
        doc.into_calibration()
    }

    pub fn to_json_pretty(&self) -> String {
        let doc = CalibrationDoc::from(self);
        let mut out = serde_json::to_string_pretty(&doc).expect("calibration serializes");
        out.push('\n');
        out
    }
}

#[derive(Debug, Serialize, Deserialize)]
struct CalibrationDoc {
    steps_per_wheel_degree: f64,
    axes: AxesDoc,
}

#[derive(Debug, Serialize, Deserialize)]
struct AxesDoc {
    steer_lr: SteeringDoc,
    steer_ud: SteeringDoc,
    rotation: RotationDoc,
    translation: TranslationDoc,
}

#[derive(Debug, Serialize, Deserialize)]
struct SteeringDoc {
    grid: Vec<i64>,
    ascending_deg: Vec<f64>,
    descending_deg: Vec<f64>,
    zone: [i64; 2],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    neutral_steps: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rate_steps_per_s: Option<f64>,
}

#[derive(Debug, Serialize, Deserialize)]
struct RotationDoc {
    steps_per_degree: f64,
    #[serde(flatten)]
    travel: TravelDoc,
}

#[derive(Debug, Serialize, Deserialize)]
struct TranslationDoc {
    steps_per_mm: f64,
    #[serde(flatten)]
    travel: TravelDoc,
}

#[derive(Debug, Default, Serialize, Deserialize)]
struct TravelDoc {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    min_steps: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    max_steps: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    neutral_steps: Option<i64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    rate_steps_per_s: Option<f64>,
}

fn check_rate(axis: AxisId, rate: f64) -> Result<f64, CalibrationError> {
    if rate.is_finite() && rate > 0.0 {
        Ok(rate)
    } else {
        Err(CalibrationError::Axis {
            axis,
            detail: format!("rate_steps_per_s must be positive, got {rate}"),
        })
    }
}

impl SteeringDoc {
    fn build(self, axis: AxisId) -> Result<SteeringCalibration, CalibrationError> {
        let envelope = BacklashEnvelope::new(
            self.grid,
            self.ascending_deg,
            self.descending_deg,
            (self.zone[0], self.zone[1]),
        )
        .map_err(|source| CalibrationError::Envelope { axis, source })?;
        let neutral = self
            .neutral_steps
            .unwrap_or((envelope.min_steps() + envelope.max_steps()) / 2);
        if !envelope.contains(neutral) {
            return Err(CalibrationError::Axis {
                axis,
                detail: format!("neutral_steps {neutral} outside the envelope grid"),
            });
        }
        Ok(SteeringCalibration {
            envelope,
            neutral_steps: neutral,
            rate_steps_per_s: check_rate(
                axis,
                self.rate_steps_per_s.unwrap_or(DEFAULT_RATE_STEPS_PER_S),
            )?,
        })
    }

    fn from_calibration(cal: &SteeringCalibration) -> Self {
        let env = &cal.envelope;
        SteeringDoc {
            grid: env.grid().to_vec(),
            ascending_deg: env.ascending_samples().to_vec(),
            descending_deg: env.descending_samples().to_vec(),
            zone: [env.zone().0, env.zone().1],
            neutral_steps: Some(cal.neutral_steps),
            rate_steps_per_s: Some(cal.rate_steps_per_s),
        }
    }
}

impl TravelDoc {
    fn build(
        self,
        axis: AxisId,
        steps_per_unit: f64,
        defaults: &LinearCalibration,
    ) -> Result<LinearCalibration, CalibrationError> {
        if !(steps_per_unit.is_finite() && steps_per_unit > 0.0) {
            return Err(CalibrationError::Axis {
                axis,
                detail: format!("linear map must be positive, got {steps_per_unit}"),
            });
        }
        let cal = LinearCalibration {
            steps_per_unit,
            min_steps: self.min_steps.unwrap_or(defaults.min_steps),
            max_steps: self.max_steps.unwrap_or(defaults.max_steps),
            neutral_steps: self.neutral_steps.unwrap_or(defaults.neutral_steps),
            rate_steps_per_s: check_rate(
                axis,
                self.rate_steps_per_s.unwrap_or(defaults.rate_steps_per_s),
            )?,
        };
        if cal.min_steps > cal.max_steps
            || !(cal.min_steps..=cal.max_steps).contains(&cal.neutral_steps)
        {
            return Err(CalibrationError::Axis {
                axis,
                detail: format!(
                    "travel [{}, {}] must contain neutral {}",
                    cal.min_steps, cal.max_steps, cal.neutral_steps
                ),
            });
        }
        Ok(cal)
    }

    fn from_calibration(cal: &LinearCalibration) -> Self {
        TravelDoc {
            min_steps: Some(cal.min_steps),
            max_steps: Some(cal.max_steps),
            neutral_steps: Some(cal.neutral_steps),
            rate_steps_per_s: Some(cal.rate_steps_per_s),
        }
    }
}

impl CalibrationDoc {
    fn into_calibration(self) -> Result<Calibration, CalibrationError> {
        if !(self.steps_per_wheel_degree.is_finite() && self.steps_per_wheel_degree > 0.0) {
            return Err(CalibrationError::WheelScale);
        }
        let defaults = Calibration::default();
        let axes = self.axes;
        Ok(Calibration {
            steps_per_wheel_degree: self.steps_per_wheel_degree,
            steer_lr: axes.steer_lr.build(AxisId::SteerLR)?,
            steer_ud: axes.steer_ud.build(AxisId::SteerUD)?,
            rotation: axes.rotation.travel.build(
                AxisId::Rotation,
                axes.rotation.steps_per_degree,
                &defaults.rotation,
            )?,
            translation: axes.translation.travel.build(
                AxisId::Translation,
                axes.translation.steps_per_mm,
                &defaults.translation,
            )?,
        })
    }
}

impl From<&Calibration> for CalibrationDoc {
    fn from(cal: &Calibration) -> Self {
        CalibrationDoc {
            steps_per_wheel_degree: cal.steps_per_wheel_degree,
            axes: AxesDoc {
                steer_lr: SteeringDoc::from_calibration(&cal.steer_lr),
                steer_ud: SteeringDoc::from_calibration(&cal.steer_ud),
                rotation: RotationDoc {
                    steps_per_degree: cal.rotation.steps_per_unit,
                    travel: TravelDoc::from_calibration(&cal.rotation),
                },
                translation: TranslationDoc {
                    steps_per_mm: cal.translation.steps_per_unit,
                    travel: TravelDoc::from_calibration(&cal.translation),
                },
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_round_trips_through_json() {
        let cal = Calibration::default();
        let back = Calibration::from_json(&cal.to_json_pretty()).unwrap();
        assert_eq!(back, cal);
    }

    #[test]
    fn wheel_degrees_are_consistent_with_quoted_deadbands() {
        let cal = Calibration::default();
        assert_eq!(cal.steps_to_wheel_deg(1200.0), 15.0);
        assert_eq!(cal.steps_to_wheel_deg(640.0), 8.0);
        assert_eq!(cal.steps_to_wheel_deg(2400.0), 30.0);
        assert_eq!(cal.steps_to_wheel_deg(1800.0 - 3000.0), -15.0);
        assert_eq!(cal.steps_to_wheel_deg(4200.0 - 3000.0), 15.0);
    }

    #[test]
    fn minimal_document_uses_defaults() {
        let text = r#"{
            "steps_per_wheel_degree": 80,
            "axes": {
                "steer_lr": {"grid": [0, 100], "ascending_deg": [0, 1], "descending_deg": [0, 1], "zone": [0, 0]},
                "steer_ud": {"grid": [0, 100], "ascending_deg": [0, 1], "descending_deg": [0.5, 1], "zone": [0, 100]},
                "rotation": {"steps_per_degree": 10},
                "translation": {"steps_per_mm": 100}
            }
        }"#;
        let cal = Calibration::from_json(text).unwrap();
        assert_eq!(cal.steer_lr.neutral_steps, 50);
        assert_eq!(cal.rotation.max_steps, 1800);
        assert_eq!(cal.translation.rate_steps_per_s, 400.0);
    }

    #[test]
    fn names_offending_grid_index() {
        let text = r#"{
            "steps_per_wheel_degree": 80,
            "axes": {
                "steer_lr": {"grid": [0, 100, 200], "ascending_deg": [0, 1, 2], "descending_deg": [0, 0.5, 2], "zone": [0, 200]},
                "steer_ud": {"grid": [0, 100], "ascending_deg": [0, 1], "descending_deg": [0, 1], "zone": [0, 100]},
                "rotation": {"steps_per_degree": 10},
                "translation": {"steps_per_mm": 100}
            }
        }"#;
        let err = Calibration::from_json(text).unwrap_err();
        assert_eq!(
            err,
            CalibrationError::Envelope {
                axis: AxisId::SteerLR,
                source: EnvelopeError::BranchOrder { index: 1 }
            }
        );
        assert!(err.to_string().contains("index 1"));
    }

    #[test]
    fn parse_errors_are_reported() {
        assert!(matches!(
            Calibration::from_json("{not json"),
            Err(CalibrationError::Parse(_))
        ));
        assert!(matches!(
            Calibration::from_json(r#"{"steps_per_wheel_degree": 80}"#),
            Err(CalibrationError::Parse(_))
        ));
    }
}
