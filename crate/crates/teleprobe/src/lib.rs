//! Services, experiment harness and command-line front end for the
//! teleoperated probe twin built on `teleprobe-core`.

pub mod clients;
pub mod config;
pub mod harness;
pub mod services;
pub mod vnet;
