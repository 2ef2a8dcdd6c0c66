//! Experiment plumbing around `ltm-core`: configuration files, binary
//! datasets and checkpoints, a resumable generate/train/evaluate pipeline,
//! and CSV reports.

pub mod checkpoint;
pub mod config;
pub mod dataset;
pub mod error;
pub mod fsio;
pub mod manifest;
pub mod pipeline;
pub mod report;
pub mod results;

pub use config::{Cell, ExperimentConfig, Layout};
pub use error::{HarnessError, Result};
pub use manifest::{RunKind, RunManifest, RunRecord, RunSpec};
pub use pipeline::{replay, Harness};
pub use results::ResultRow;

/// Environment variable naming the default output root.
pub const OUT_ENV: &str = "LTM_OUT";
/// Output root when neither `--out` nor the environment variable is set.
pub const DEFAULT_OUT: &str = "ltm-out";
