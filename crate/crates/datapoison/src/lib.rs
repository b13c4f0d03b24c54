//! IO, file formats and the command-line front end for `datapoison-core`.

pub mod campaign;
pub mod cli;
pub mod scenario;
pub mod tracefile;

pub use scenario::{load_scenario, parse_scenario, Scenario, ScenarioError, ScenarioSpec};
