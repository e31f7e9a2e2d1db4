//! Resolving command-line references to calibrations, profiles, scripts,
//! presets and seed lists.

use std::path::{Path, PathBuf};

use teleprobe_core::calib::CalibrationError;
use teleprobe_core::impair::ImpairmentModel;
use teleprobe_core::operator::{builtin_profile, default_target_script, OperatorProfile, ProfileError, ScriptError, TargetScript};
use teleprobe_core::{AxisId, Calibration};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Read {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {source}")]
    Calibration {
        path: PathBuf,
        #[source]
        source: CalibrationError,
    },
    #[error("profile {name}: {source}")]
    Profile {
        name: String,
        #[source]
        source: ProfileError,
    },
    #[error("script {name}: {source}")]
    Script {
        name: String,
        #[source]
        source: ScriptError,
    },
    #[error("unknown impairment preset {0:?} (expected none, lan or 5g)")]
    Preset(String),
    #[error("bad seed list {0:?}")]
    Seeds(String),
    #[error("{0}")]
    Invalid(String),
}

fn read(path: &Path) -> Result<String, ConfigError> {
    std::fs::read_to_string(path).map_err(|source| ConfigError::Read {
        path: path.to_path_buf(),
        source,
    })
}

/// The built-in calibration when no file is given.
pub fn load_calibration(path: Option<&Path>) -> Result<Calibration, ConfigError> {
    match path {
        None => Ok(Calibration::default()),
        Some(p) => Calibration::from_json(&read(p)?).map_err(|source| ConfigError::Calibration {
            path: p.to_path_buf(),
            source,
        }),
    }
}

/// A built-in profile name (manual, gamepad, joystick) or a JSON file.
pub fn resolve_profile(spec: &str) -> Result<OperatorProfile, ConfigError> {
    if let Some(p) = builtin_profile(spec) {
        return Ok(p);
    }
    OperatorProfile::from_json(&read(Path::new(spec))?).map_err(|source| ConfigError::Profile {
        name: spec.to_string(),
        source,
    })
}

pub fn builtin_script(name: &str) -> Option<TargetScript> {
    match name {
        "lr_default" => default_target_script(AxisId::SteerLR),
        "ud_default" => default_target_script(AxisId::SteerUD),
        _ => None,
    }
}

/// A built-in script name (lr_default, ud_default) or a JSON file, checked
/// against `calibration`.
pub fn resolve_script(spec: &str, calibration: &Calibration) -> Result<TargetScript, ConfigError> {
    let script = match builtin_script(spec) {
        Some(s) => s,
        None => TargetScript::from_json(&read(Path::new(spec))?).map_err(|source| ConfigError::Script {
            name: spec.to_string(),
            source,
        })?,
    };
    script.validate(calibration).map_err(|source| ConfigError::Script {
        name: spec.to_string(),
        source,
    })?;
    Ok(script)
}

pub fn resolve_preset(name: &str) -> Result<ImpairmentModel, ConfigError> {
    ImpairmentModel::preset(name).ok_or_else(|| ConfigError::Preset(name.to_string()))
}

/// Parses `7`, `1-20` or `1,4,9` (ranges may appear inside lists).
pub fn parse_seeds(spec: &str) -> Result<Vec<u64>, ConfigError> {
    let bad = || ConfigError::Seeds(spec.to_string());
    let mut seeds = Vec::new();
    for part in spec.split(',') {
        let part = part.trim();
        match part.split_once('-') {
            Some((a, b)) => {
                let (a, b): (u64, u64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
                if a > b {
                    return Err(bad());
                }
                seeds.extend(a..=b);
            }
            None => seeds.push(part.parse().map_err(|_| bad())?),
        }
    }
    Ok(seeds)
}

/// Directory label for a seed list: `7`, or `first-last` for a contiguous
/// range, or the list joined with `_`.
pub fn seed_label(seeds: &[u64]) -> String {
    match seeds {
        [] => "none".to_string(),
        [one] => one.to_string(),
        [first, .., last] if seeds.windows(2).all(|w| w[1] == w[0] + 1) => format!("{first}-{last}"),
        _ => seeds.iter().map(u64::to_string).collect::<Vec<_>>().join("_"),
    }
}
