//! Config ingestion, command dispatch and report emission for `twogauge-core`.

pub mod config;
pub mod report;
pub mod run;

pub use config::{load_str, LoadedConfig, RunConfig, SchemaError};
pub use report::Report;
pub use run::{execute, Command, Outcome, Overrides, RunError, VerifyKind};
