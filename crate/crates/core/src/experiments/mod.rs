//! Scenario configuration, drivers and CSV/JSON output.

pub mod config;
pub mod output;
pub mod scenarios;

pub use config::{EngineChoice, Fault, Scenario, ScenarioConfig};
pub use output::{read_csv, write_csv, write_run, ResultRow};
pub use scenarios::{run, ScenarioOutput};
