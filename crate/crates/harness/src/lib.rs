//! Scenario runner for the `omnimanip` simulator.
//!
//! A scenario file describes the vehicle, gains, scene, disturbances, set
//! point source and assertions. [`runner::run_scenario`] closes the loop at
//! the configured rates and returns a [`log::RunLog`] whose CSV form is the
//! input of the plotting scripts.

pub mod analysis;
pub mod assertions;
pub mod catalog;
pub mod config;
pub mod drift;
pub mod log;
pub mod runner;
pub mod sensor;

pub use config::ScenarioConfig;
pub use log::RunLog;
pub use runner::{run_many, run_scenario, RunOutcome};

#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error("config: {0}")]
    Config(String),
    #[error("io: {0}")]
    Io(String),
    #[error("log: {0}")]
    Log(String),
    #[error("series lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error(transparent)]
    Core(#[from] omnimanip::Error),
}

#[cfg(doctest)]
#[doc = include_str!("../../../book/src/scenarios.md")]
mod book_scenarios {}
