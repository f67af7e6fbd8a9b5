//! Command-line pipeline stages and the tutorial service.

pub mod commands;
pub mod service;

pub use commands::{cmd_ablation, cmd_parse, cmd_pipeline, CliError, PipelineConfig, PipelineReport};
pub use service::{router, AppState, Intent};
