//! Scenario runner behind the `lab` binary.
//!
//! A scenario file describes a mesh, coefficients, data, a time grid and a
//! list of named checks; see [`checks::CATALOG`] for the check names.

pub mod checks;
pub mod config;
pub mod runner;

pub use checks::{CheckOutcome, CheckSpec, CATALOG};
pub use config::Scenario;
pub use runner::{run_scenario, run_suite, RunOptions, ScenarioReport, SuiteReport};
