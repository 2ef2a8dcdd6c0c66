use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use ltm_core::evaluation::EvalConfig;
use ltm_core::neural::{default_size_grid, Activation, HiddenLayers};
use ltm_core::oracle::MAX_ORACLE_CANDIDATES;
use ltm_core::samplers::{derive_seed, mix64};
use ltm_core::{FeatureOptions, InfoType, Labeling, MethodId, ProbModel, TrainConfig};

use crate::error::{HarnessError, Result};
use crate::fsio::read_to_string;

/// Everything an experiment needs; each field falls back to its default
/// when absent from the config file.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub methods: Vec<MethodId>,
    pub models: Vec<ProbModel>,
    pub voters: Vec<usize>,
    pub candidates: Vec<usize>,
    pub infos: Vec<InfoType>,
    pub labeling: Labeling,
    pub hidden: Vec<HiddenLayers>,
    pub activation: Activation,
    pub features: FeatureOptions,
    /// Training instances generated per cell.
    pub train_size: usize,
    pub train: TrainConfig,
    pub eval: EvalConfig,
    /// Top-level seeds; each one is an independent generation.
    pub seeds: Vec<u64>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            methods: MethodId::ALL.to_vec(),
            models: vec![ProbModel::Uniform, ProbModel::Spatial2D, ProbModel::mallows()],
            voters: vec![5, 6, 10, 11, 20, 21],
            candidates: vec![3, 4, 5, 6],
            infos: InfoType::ALL.to_vec(),
            labeling: Labeling::Optimizing,
            hidden: default_size_grid(),
            activation: Activation::Relu,
            features: FeatureOptions::default(),
            train_size: 131_072,
            train: TrainConfig::default(),
            eval: EvalConfig::default(),
            seeds: vec![0],
        }
    }
}

impl ExperimentConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let config: ExperimentConfig = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_toml(&read_to_string(path)?)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(HarnessError::Config(msg));
        let lists = [
            ("methods", self.methods.is_empty()),
            ("models", self.models.is_empty()),
            ("voters", self.voters.is_empty()),
            ("candidates", self.candidates.is_empty()),
            ("infos", self.infos.is_empty()),
            ("hidden", self.hidden.is_empty()),
            ("seeds", self.seeds.is_empty()),
        ];
        if let Some((name, _)) = lists.iter().find(|(_, empty)| *empty) {
            return bad(format!("{name} must not be empty"));
        }
        if let Some(m) = self.candidates.iter().find(|m| !(2..=MAX_ORACLE_CANDIDATES).contains(m)) {
            return bad(format!("candidates must lie in 2..={MAX_ORACLE_CANDIDATES}, got {m}"));
        }
        if let Some(n) = self.voters.iter().find(|&&n| n == 0 || n > u16::MAX as usize) {
            return bad(format!("voters must lie in 1..=65535, got {n}"));
        }
        if let Some(h) = self.hidden.iter().find(|h| h.0.len() > 3 || h.0.contains(&0)) {
            return bad(format!("hidden layers {h:?}: at most three positive widths"));
        }
        if self.train_size == 0 {
            return bad("train_size must be positive".into());
        }
        self.train.validate().map_err(|e| HarnessError::Config(e.to_string()))?;
        if self.eval.min_samples < 2 || self.eval.chunk == 0 || self.eval.max_samples < self.eval.min_samples || !(self.eval.target_sem > 0.0) {
            return bad("bad evaluation settings".into());
        }
        Ok(())
    }

    /// Cartesian product of seeds, methods, models, voters, candidates and
    /// information types.
    pub fn cells(&self) -> Vec<Cell> {
        let mut cells = Vec::new();
        for &seed in &self.seeds {
            for &method in &self.methods {
                for &model in &self.models {
                    for &n in &self.voters {
                        for &m in &self.candidates {
                            for &info in &self.infos {
                                cells.push(Cell { method, model, n, m, info, labeling: self.labeling, seed });
                            }
                        }
                    }
                }
            }
        }
        cells
    }

    /// Distinct `(method, model, n, m, seed)` combinations for baselines.
    pub fn baseline_cells(&self) -> Vec<Cell> {
        let mut cells: Vec<Cell> = Vec::new();
        for cell in self.cells() {
            let base = cell.baseline();
            if !cells.contains(&base) {
                cells.push(base);
            }
        }
        cells
    }
}

/// One experimental condition.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub method: MethodId,
    pub model: ProbModel,
    pub n: usize,
    pub m: usize,
    pub info: InfoType,
    pub labeling: Labeling,
    pub seed: u64,
}

/// What a derived seed is used for.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[repr(u64)]
pub enum Purpose {
    Data = 1,
    Validation = 2,
    Shuffle = 3,
    Init = 4,
    Eval = 5,
    Baseline = 6,
}

impl Cell {
    /// Baseline cells ignore the information type and labeling.
    pub fn baseline(&self) -> Cell {
        Cell { info: InfoType::PluralityScores, labeling: Labeling::Optimizing, ..*self }
    }

    /// File-name stem, e.g. `borda_uniform_n11_m3_majority-matrix_optimizing_s0`.
    pub fn slug(&self) -> String {
        format!(
            "{}_{}_n{}_m{}_{}_{}_s{}",
            self.method,
            self.model.to_string().replace(':', "-"),
            self.n,
            self.m,
            self.info,
            self.labeling,
            self.seed
        )
    }

    pub fn baseline_slug(&self) -> String {
        format!("{}_{}_n{}_m{}_s{}", self.method, self.model.to_string().replace(':', "-"), self.n, self.m, self.seed)
    }

    fn key(&self, with_info: bool) -> u64 {
        let dispersion = match self.model {
            ProbModel::Mallows { rel_phi } => rel_phi.to_bits(),
            _ => 0,
        };
        let mut parts = vec![self.method.code() as u64, self.model.code() as u64, dispersion, self.n as u64, self.m as u64];
        if with_info {
            parts.extend([self.info.code() as u64, self.labeling.code() as u64]);
        }
        parts.into_iter().fold(0x6c74_6d63_656c_6cu64, |h, p| mix64(h ^ p))
    }

    /// Seed of one random stream of this cell.
    pub fn seed_for(&self, purpose: Purpose) -> u64 {
        let with_info = purpose != Purpose::Baseline;
        derive_seed(derive_seed(self.seed, self.key(with_info)), purpose as u64)
    }

    /// Initialization seed of the network with the given hidden layers.
    pub fn init_seed(&self, hidden: &HiddenLayers) -> u64 {
        let shape = hidden.0.iter().fold(hidden.0.len() as u64, |h, &w| mix64(h ^ w as u64));
        derive_seed(self.seed_for(Purpose::Init), shape)
    }
}

/// Output locations under an experiment root.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Layout { root: root.into() }
    }

    pub fn manifest(&self) -> PathBuf {
        self.root.join("manifest.json")
    }

    pub fn dataset(&self, cell: &Cell) -> PathBuf {
        self.root.join("data").join(format!("{}.ltmd", cell.slug()))
    }

    pub fn run_name(cell: &Cell, hidden: &HiddenLayers) -> String {
        format!("{}__h{}", cell.slug(), hidden)
    }

    pub fn checkpoint(&self, cell: &Cell, hidden: &HiddenLayers) -> PathBuf {
        self.root.join("nets").join(format!("{}.ltmw", Self::run_name(cell, hidden)))
    }

    pub fn train_log(&self, cell: &Cell, hidden: &HiddenLayers) -> PathBuf {
        self.root.join("logs").join(format!("{}.csv", Self::run_name(cell, hidden)))
    }

    pub fn results_dir(&self) -> PathBuf {
        self.root.join("results")
    }

    pub fn net_result(&self, cell: &Cell, hidden: &HiddenLayers) -> PathBuf {
        self.results_dir().join("net").join(format!("{}.csv", Self::run_name(cell, hidden)))
    }

    pub fn baseline_result(&self, cell: &Cell, policy: &str) -> PathBuf {
        self.results_dir().join(policy).join(format!("{}.csv", cell.baseline_slug()))
    }

    pub fn report_dir(&self) -> PathBuf {
        self.root.join("report")
    }
}
