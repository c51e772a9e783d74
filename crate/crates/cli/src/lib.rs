//! Experiment runner: dataset generation, teacher training, distillation
//! and paradigm comparison over the synthetic multilingual data.

pub mod commands;
pub mod config;
pub mod error;
pub mod pipeline;

pub use commands::{run_cli, Cli};
pub use error::CliError;
