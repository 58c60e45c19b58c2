//! Scenario files, simulation runs, exports and consistency reports for the
//! synergistic navigation controllers.

pub mod config;
pub mod error;
pub mod export;
pub mod report;
pub mod run;

pub use config::{load_config, parse_config, ControllerKind, ScenarioConfig};
pub use error::HarnessError;
pub use export::{export_csv, export_svg};
pub use report::{report_consistency, ConsistencyReport};
pub use run::{run_many, run_scenario, RunRecord, RunSummary};
