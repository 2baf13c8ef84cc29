//! Config-driven experiment runner: configuration schema, pinned presets,
//! report/CSV artifacts, and the execution pipeline.

pub mod config;
pub mod presets;
pub mod report;
pub mod run;

pub use config::{AnalysisConfig, ExperimentConfig, PipelineConfig};
pub use presets::{preset, PRESET_NAMES};
pub use report::{Assertion, Report};
pub use run::run_experiment;
