//! Experiment runner for the sigma2 lab: scenario files, runners and plots.

pub mod cli;
pub mod config;
pub mod plot;
pub mod run;

pub use config::{Scenario, ScenarioKind};
pub use run::{run, LabError, Outcome, Verdict};
