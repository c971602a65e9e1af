//! Pipeline orchestration behind the `signcorpus` command.

pub mod commands;
pub mod config;
pub mod error;
pub mod pipeline;

pub use config::PipelineConfig;
pub use error::CliError;
pub use pipeline::{run_episodes, run_stage, Stage, StageReport};
