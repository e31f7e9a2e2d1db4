//! The three experiments and their report files.

pub mod exp1;
pub mod exp2;
pub mod exp3;
pub mod report;
