//! Configuration, orchestration and report layouts behind the `relnash` binary.

pub mod commands;
pub mod config;
pub mod error;
pub mod report;
