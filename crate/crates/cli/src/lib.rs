//! Experiment harness around `lindiff-core`: config resolution, the six
//! experiments, CSV/SVG artifact emission, and reproducibility manifests.

pub mod config;
pub mod experiments;
pub mod svg;

pub use config::{ConfigError, ExperimentConfig, ExperimentKind, Overrides};
pub use experiments::{run, Manifest, RunOptions, RunSummary};
