//! Declarative experiment configuration, run orchestration across training
//! modes, result persistence, and table-style report generation for the
//! `flbench` CLI.

pub mod config;
pub mod experiment;
pub mod presets;
pub mod report;

pub use config::{parse_config, parse_config_str, ExperimentConfig};
pub use experiment::{run_experiment, write_partition_plan, ResultRow};
pub use report::{render_report, ReportFormat};
