//! Configuration, orchestration and serialization for the `mfg-timing`
//! experiment runner.

pub mod config;
pub mod emit;
pub mod error;
pub mod run;

pub use config::{ExperimentConfig, Format, TaskSection};
pub use emit::{emit, emit_csv, result_json};
pub use error::CliError;
pub use run::{run, RunRecord, TaskResult};
