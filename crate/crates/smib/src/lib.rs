//! Configuration, reports and the analysis pipeline behind the `smib`
//! command.

pub mod config;
pub mod output;
pub mod pipeline;

pub use config::{parse_config, AnalysisConfig, BasinConfig, ConfigError, MethodKind, SimConfig};
pub use output::to_json;
pub use pipeline::{run, write_outcome, Outcome, Report, Stage};
