//! Experiment runner for the liquid-filled pendulum laboratory: scenario
//! configuration, orchestration, artifacts, comparison and sweeps.

pub mod compare;
pub mod config;
pub mod error;
pub mod io;
pub mod run;
pub mod sweep;
pub mod toy;

pub use config::ExperimentConfig;
pub use error::LabError;
