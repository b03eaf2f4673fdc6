//! Experiment harness behind the `gg` binary.

pub mod commands;
pub mod config;
pub mod experiment;
