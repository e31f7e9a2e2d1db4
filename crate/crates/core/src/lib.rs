//! Simulation core for a teleoperated robotic trans-esophageal ultrasound probe.
//!
//! Everything in this crate is deterministic and free of IO so it builds
//! without `std`. It covers:
//!
//! - the probe plant: constant-rate stepper axes, backlash hysteresis on the
//!   two steering axes (a play operator clamped between calibrated envelope
//!   branches), tip-pose composition and IMU emulation;
//! - the newline-delimited JSON wire protocol;
//! - sans-IO robot and relay nodes (command application, telemetry, heartbeat
//!   acknowledgement, failsafe watchdog, session pairing, link impairment);
//! - scripted bang-bang operator models for the target-reaching task;
//! - the metrics and statistics used to summarise experiments.
//!
//! The `teleprobe` crate wires these pieces to sockets, files and a CLI.

#![no_std]

extern crate alloc;

pub mod axis;
pub mod calib;
pub mod envelope;
pub mod hysteresis;
pub mod impair;
pub mod imu;
pub mod metrics;
pub mod operator;
pub mod probe;
pub mod protocol;
pub mod relay;
pub mod robot;
pub mod stats;

mod interp;

pub use axis::{AxisId, Direction, MotorAxis};
pub use calib::Calibration;
pub use envelope::BacklashEnvelope;
pub use hysteresis::{play_update, HysteresisState};
pub use imu::{ImuModel, ImuReading, ImuSampler};
pub use probe::{ProbeModel, ProbeState, TipPose};
pub use protocol::{decode, encode, Frame};


/// Protocol version spoken by every node in this crate.
pub const PROTO_VERSION: u32 = 1;

/// Connection handle used by the sans-IO nodes. The embedding runtime picks
/// the values; nodes only compare them.
pub type ConnId = u64;
