use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use ltm_core::evaluation::EvalConfig;
use ltm_core::neural::{Activation, HiddenLayers};
use ltm_core::{FeatureOptions, TrainConfig};

use crate::config::{Cell, ExperimentConfig};
use crate::error::Result;
use crate::fsio::{read_to_string, write_string_atomic};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunKind {
    Gen,
    Train,
    Eval,
    Baseline,
}

/// The resolved settings one run depends on. Settings a kind does not use
/// are left out, so changing them does not invalidate finished runs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSpec {
    pub kind: RunKind,
    pub cell: Cell,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub hidden: Option<HiddenLayers>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub policy: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train_size: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub features: Option<FeatureOptions>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub activation: Option<Activation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub train: Option<TrainConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub eval: Option<EvalConfig>,
    /// Derived stream seeds, by purpose.
    pub seeds: BTreeMap<String, u64>,
}

impl RunSpec {
    /// A single-cell configuration that reruns this spec from scratch.
    pub fn to_config(&self) -> ExperimentConfig {
        let defaults = ExperimentConfig::default();
        ExperimentConfig {
            methods: vec![self.cell.method],
            models: vec![self.cell.model],
            voters: vec![self.cell.n],
            candidates: vec![self.cell.m],
            infos: vec![self.cell.info],
            labeling: self.cell.labeling,
            hidden: self.hidden.clone().map_or(defaults.hidden, |h| vec![h]),
            activation: self.activation.unwrap_or(defaults.activation),
            features: self.features.unwrap_or(defaults.features),
            train_size: self.train_size.unwrap_or(defaults.train_size),
            train: self.train.clone().unwrap_or(defaults.train),
            eval: self.eval.unwrap_or(defaults.eval),
            seeds: vec![self.cell.seed],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub spec: RunSpec,
    pub started_unix_ms: u64,
    pub finished_unix_ms: u64,
    /// Files written, relative to the experiment root.
    pub outputs: Vec<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mean_profitability: Option<f64>,
}

/// Everything needed to replay the runs under one experiment root.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub code_version: String,
    /// Resolved configuration of the latest invocation.
    pub config: ExperimentConfig,
    pub runs: Vec<RunRecord>,
}

pub fn unix_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_millis() as u64).unwrap_or(0)
}

impl RunManifest {
    pub fn new(config: ExperimentConfig) -> Self {
        RunManifest { code_version: env!("CARGO_PKG_VERSION").to_string(), config, runs: Vec::new() }
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&read_to_string(path)?)?)
    }

    /// Loads the manifest at `path` if present and adopts `config`.
    pub fn open(path: &Path, config: ExperimentConfig) -> Result<Self> {
        let mut manifest = if path.exists() { Self::load(path)? } else { Self::new(config.clone()) };
        manifest.config = config;
        Ok(manifest)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_string_atomic(path, &serde_json::to_string_pretty(self)?)
    }

    pub fn find(&self, spec: &RunSpec) -> Option<&RunRecord> {
        self.runs.iter().find(|r| r.spec == *spec)
    }

    /// Adds `record`, replacing an earlier record of the same spec.
    pub fn record(&mut self, record: RunRecord) {
        self.runs.retain(|r| r.spec != record.spec);
        self.runs.push(record);
    }
}
