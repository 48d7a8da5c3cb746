//! Scenario runner: catalog, configuration, deterministic reports and the
//! evaluation verbs behind the command line interface.

pub mod config;
pub mod report;
pub mod scenario;
pub mod verbs;

pub use config::RunConfig;
pub use report::{CheckRecord, RunReport};
pub use scenario::{build, find, run_scenario, ScenarioData, ScenarioInfo, CATALOG};
