//! Std companion of `filippov-core`: TOML configuration with a canonical
//! digest, the staged analysis pipeline with its run manifest, CSV/JSON
//! exports and plot-file extraction.

pub mod config;
pub mod export;
pub mod pipeline;
pub mod viz;

pub use config::{AnalysisConfig, ConfigFileError};
pub use pipeline::{run_integration, run_pipeline, PipelineError, RunManifest, RunOutcome, Stage};
pub use viz::{export_viz, VizKind};
