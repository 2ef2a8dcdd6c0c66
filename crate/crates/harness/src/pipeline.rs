use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Mutex;

use rayon::prelude::*;
use serde::Serialize;

use ltm_core::evaluation::{evaluate, EvalResult, Policy};
use ltm_core::neural::{train, HiddenLayers, NetConfig, TrainingLog, ValidationSet};
use ltm_core::oracle::{make_instance, num_classes};
use ltm_core::{LabeledInstance, Net, RandomStream, Utilities};

use crate::checkpoint::{read_checkpoint, write_checkpoint};
use crate::config::{Cell, ExperimentConfig, Layout, Purpose};
use crate::dataset::{read_dataset, write_dataset, DatasetHeader};
use crate::error::{HarnessError, Result};
use crate::manifest::{unix_ms, RunKind, RunManifest, RunRecord, RunSpec};
use crate::results::{write_rows, ResultRow};

/// Manipulator index used for every generated instance.
const MANIPULATOR: usize = ltm_core::evaluation::MANIPULATOR;

/// Labeled training instances of one cell, generated in parallel from
/// per-instance streams.
pub fn generate_instances(cell: &Cell, count: usize, config: &ExperimentConfig) -> Result<Vec<LabeledInstance<f64>>> {
    let sampler = cell.model.sampler(cell.n, cell.m)?;
    let seed = cell.seed_for(Purpose::Data);
    (0..count as u64)
        .into_par_iter()
        .map(|i| {
            let u: Utilities = sampler.sample(&mut RandomStream::derive(seed, i));
            Ok(make_instance(cell.method, &u, MANIPULATOR, cell.info, cell.labeling, config.features)?)
        })
        .collect()
}

/// Validation elections of one cell with every ballot's profitability.
pub fn validation_set(cell: &Cell, config: &ExperimentConfig) -> Result<ValidationSet<f64>> {
    let sampler = cell.model.sampler(cell.n, cell.m)?;
    let seed = cell.seed_for(Purpose::Validation);
    let elections: Vec<Utilities> = (0..config.train.validation_size as u64)
        .into_par_iter()
        .map(|i| sampler.sample(&mut RandomStream::derive(seed, i)))
        .collect();
    Ok(ValidationSet::build(cell.method, cell.info, config.features, &elections)?)
}

fn seeds(pairs: &[(&str, u64)]) -> BTreeMap<String, u64> {
    pairs.iter().map(|(k, v)| (k.to_string(), *v)).collect()
}

#[derive(Clone, Debug, Serialize)]
struct LogRow {
    iteration: usize,
    train_loss: f64,
    validation_profitability: f64,
}

pub fn write_train_log(path: &Path, log: &TrainingLog) -> Result<()> {
    let rows: Vec<LogRow> = log
        .entries
        .iter()
        .map(|e| LogRow { iteration: e.iteration, train_loss: e.train_loss, validation_profitability: e.validation_profitability })
        .collect();
    write_rows(path, &rows)
}

/// Runs experiment stages under one output root, skipping runs the
/// manifest already lists as finished.
pub struct Harness {
    pub config: ExperimentConfig,
    pub layout: Layout,
    manifest: Mutex<RunManifest>,
    pool: rayon::ThreadPool,
}

impl Harness {
    /// `workers == 0` uses one worker per core.
    pub fn new(config: ExperimentConfig, root: impl Into<PathBuf>, workers: usize) -> Result<Self> {
        config.validate()?;
        let layout = Layout::new(root);
        let manifest = RunManifest::open(&layout.manifest(), config.clone())?;
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| HarnessError::Config(format!("worker pool: {e}")))?;
        Ok(Harness { config, layout, manifest: Mutex::new(manifest), pool })
    }

    pub fn manifest(&self) -> RunManifest {
        self.manifest.lock().unwrap().clone()
    }

    fn finished(&self, spec: &RunSpec, outputs: &[PathBuf]) -> Option<RunRecord> {
        let manifest = self.manifest.lock().unwrap();
        let record = manifest.find(spec)?;
        outputs.iter().all(|p| p.exists()).then(|| record.clone())
    }

    fn commit(&self, spec: RunSpec, started: u64, outputs: &[PathBuf], mean: Option<f64>) -> Result<RunRecord> {
        let relative = outputs.iter().map(|p| p.strip_prefix(&self.layout.root).unwrap_or(p).to_path_buf()).collect();
        let record = RunRecord { spec, started_unix_ms: started, finished_unix_ms: unix_ms(), outputs: relative, mean_profitability: mean };
        let mut manifest = self.manifest.lock().unwrap();
        manifest.record(record.clone());
        manifest.save(&self.layout.manifest())?;
        Ok(record)
    }

    /// Persists the manifest even when every run was skipped.
    fn save_manifest(&self) -> Result<()> {
        self.manifest.lock().unwrap().save(&self.layout.manifest())
    }

    fn gen_spec(&self, cell: &Cell) -> RunSpec {
        RunSpec {
            kind: RunKind::Gen,
            cell: *cell,
            hidden: None,
            policy: None,
            train_size: Some(self.config.train_size),
            features: Some(self.config.features),
            activation: None,
            train: None,
            eval: None,
            seeds: seeds(&[("data", cell.seed_for(Purpose::Data))]),
        }
    }

    fn train_spec(&self, cell: &Cell, hidden: &HiddenLayers) -> RunSpec {
        RunSpec {
            kind: RunKind::Train,
            hidden: Some(hidden.clone()),
            activation: Some(self.config.activation),
            train: Some(self.config.train.clone()),
            seeds: seeds(&[
                ("data", cell.seed_for(Purpose::Data)),
                ("validation", cell.seed_for(Purpose::Validation)),
                ("shuffle", cell.seed_for(Purpose::Shuffle)),
                ("init", cell.init_seed(hidden)),
            ]),
            ..self.gen_spec(cell)
        }
    }

    fn eval_spec(&self, cell: &Cell, hidden: &HiddenLayers) -> RunSpec {
        let mut spec = self.train_spec(cell, hidden);
        spec.kind = RunKind::Eval;
        spec.eval = Some(self.config.eval);
        spec.seeds.insert("eval".into(), cell.seed_for(Purpose::Eval));
        spec
    }

    fn baseline_spec(&self, cell: &Cell, policy: &str) -> RunSpec {
        RunSpec {
            kind: RunKind::Baseline,
            cell: cell.baseline(),
            hidden: None,
            policy: Some(policy.to_string()),
            train_size: None,
            features: None,
            activation: None,
            train: None,
            eval: Some(self.config.eval),
            seeds: seeds(&[("eval", cell.seed_for(Purpose::Baseline))]),
        }
    }

    /// Writes one dataset file per cell.
    pub fn gen_data(&self) -> Result<Vec<PathBuf>> {
        self.pool.install(|| {
            let mut written = Vec::new();
            for cell in self.config.cells() {
                let path = self.layout.dataset(&cell);
                let spec = self.gen_spec(&cell);
                if self.finished(&spec, std::slice::from_ref(&path)).is_none() {
                    let started = unix_ms();
                    let instances = generate_instances(&cell, self.config.train_size, &self.config)?;
                    let header = DatasetHeader::new(cell.method, cell.info, cell.model, cell.n, cell.m, cell.labeling, instances.len() as u64);
                    write_dataset(&path, &header, &instances)?;
                    self.commit(spec, started, std::slice::from_ref(&path), None)?;
                }
                written.push(path);
            }
            self.save_manifest()?;
            Ok(written)
        })
    }

    /// Trains one network per cell and hidden configuration; returns the
    /// checkpoint paths.
    pub fn train_grid(&self) -> Result<Vec<PathBuf>> {
        self.pool.install(|| {
            let per_cell: Vec<Vec<PathBuf>> = self
                .config
                .cells()
                .par_iter()
                .map(|cell| self.train_cell(cell))
                .collect::<Result<_>>()?;
            self.save_manifest()?;
            Ok(per_cell.into_iter().flatten().collect())
        })
    }

    fn train_cell(&self, cell: &Cell) -> Result<Vec<PathBuf>> {
        let pending: Vec<&HiddenLayers> = self
            .config
            .hidden
            .iter()
            .filter(|h| {
                let outputs = [self.layout.checkpoint(cell, h), self.layout.train_log(cell, h)];
                self.finished(&self.train_spec(cell, h), &outputs).is_none()
            })
            .collect();
        if !pending.is_empty() {
            let path = self.layout.dataset(cell);
            if !path.exists() {
                return Err(HarnessError::MissingDataset { cell: cell.slug(), path });
            }
            let data = read_dataset(&path)?;
            let validation = validation_set(cell, &self.config)?;
            pending.par_iter().map(|h| self.train_one(cell, h, &data.instances, &validation)).collect::<Result<Vec<_>>>()?;
        }
        Ok(self.config.hidden.iter().map(|h| self.layout.checkpoint(cell, h)).collect())
    }

    fn train_one(&self, cell: &Cell, hidden: &HiddenLayers, data: &[LabeledInstance<f64>], validation: &ValidationSet<f64>) -> Result<()> {
        let started = unix_ms();
        let net_config = NetConfig {
            input_dim: cell.info.feature_len(cell.m),
            hidden: hidden.clone(),
            output_dim: num_classes(cell.m),
            activation: self.config.activation,
            init_seed: cell.init_seed(hidden),
        };
        let mut stream = RandomStream::new(cell.seed_for(Purpose::Shuffle));
        let trained = train(Net::new(net_config)?, data, validation, &self.config.train, &mut stream)?;
        let outputs = [self.layout.checkpoint(cell, hidden), self.layout.train_log(cell, hidden)];
        write_checkpoint(&outputs[0], &trained.net)?;
        write_train_log(&outputs[1], &trained.log)?;
        self.commit(self.train_spec(cell, hidden), started, &outputs, None)?;
        Ok(())
    }

    /// Evaluates every trained network.
    pub fn eval(&self) -> Result<Vec<ResultRow>> {
        self.pool.install(|| {
            let mut rows = Vec::new();
            for cell in self.config.cells() {
                for hidden in &self.config.hidden {
                    rows.push(self.eval_one(&cell, hidden)?);
                }
            }
            self.save_manifest()?;
            Ok(rows)
        })
    }

    fn eval_one(&self, cell: &Cell, hidden: &HiddenLayers) -> Result<ResultRow> {
        let out = self.layout.net_result(cell, hidden);
        let spec = self.eval_spec(cell, hidden);
        if self.finished(&spec, std::slice::from_ref(&out)).is_some() {
            if let Some(row) = crate::results::read_rows(&out)?.into_iter().next() {
                return Ok(row);
            }
        }
        let started = unix_ms();
        let path = self.layout.checkpoint(cell, hidden);
        if !path.exists() {
            return Err(HarnessError::MissingCheckpoint { run: Layout::run_name(cell, hidden), path });
        }
        let net = read_checkpoint(&path)?;
        let policy = Policy::Net { net: &net, info: cell.info, opts: self.config.features };
        let result = evaluate(&policy, cell.method, cell.model, cell.n, cell.m, cell.seed_for(Purpose::Eval), &self.config.eval)?;
        let row = ResultRow::from_eval(&result, Some(cell.labeling), hidden.to_string(), cell.seed);
        write_rows(&out, std::slice::from_ref(&row))?;
        self.commit(spec, started, &[out], Some(row.mean_profitability))?;
        Ok(row)
    }

    /// Ideal and sincere baselines for every distinct election setting.
    pub fn baseline(&self) -> Result<Vec<ResultRow>> {
        self.pool.install(|| {
            let mut rows = Vec::new();
            for cell in self.config.baseline_cells() {
                for policy in [Policy::<f64>::Ideal, Policy::Sincere] {
                    rows.push(self.baseline_one(&cell, &policy)?);
                }
            }
            self.save_manifest()?;
            Ok(rows)
        })
    }

    fn baseline_one(&self, cell: &Cell, policy: &Policy<'_, f64>) -> Result<ResultRow> {
        let out = self.layout.baseline_result(cell, policy.name());
        let spec = self.baseline_spec(cell, policy.name());
        if self.finished(&spec, std::slice::from_ref(&out)).is_some() {
            if let Some(row) = crate::results::read_rows(&out)?.into_iter().next() {
                return Ok(row);
            }
        }
        let started = unix_ms();
        let result = evaluate(policy, cell.method, cell.model, cell.n, cell.m, cell.seed_for(Purpose::Baseline), &self.config.eval)?;
        let row = ResultRow::from_eval(&result, None, policy.name().to_string(), cell.seed);
        write_rows(&out, std::slice::from_ref(&row))?;
        self.commit(spec, started, &[out], Some(row.mean_profitability))?;
        Ok(row)
    }

    /// Generation, training and evaluation in sequence.
    pub fn run_all(&self) -> Result<Vec<ResultRow>> {
        self.gen_data()?;
        self.train_grid()?;
        self.eval()
    }
}

/// Reruns a recorded evaluation or baseline from its spec alone in a fresh
/// directory and returns the new result.
pub fn replay(spec: &RunSpec, scratch: &Path, workers: usize) -> Result<EvalResult> {
    let config = spec.to_config();
    let harness = Harness::new(config, scratch, workers)?;
    let row = match spec.kind {
        RunKind::Eval => {
            let hidden = spec.hidden.clone().ok_or_else(|| HarnessError::Config("eval run without hidden layers".into()))?;
            harness.gen_data()?;
            harness.train_grid()?;
            harness.eval_one(&spec.cell, &hidden)?
        }
        RunKind::Baseline => {
            let policy = match spec.policy.as_deref() {
                Some("ideal") => Policy::Ideal,
                Some("sincere") => Policy::Sincere,
                other => return Err(HarnessError::Config(format!("unknown baseline policy {other:?}"))),
            };
            harness.baseline_one(&spec.cell, &policy)?
        }
        kind => return Err(HarnessError::Config(format!("{kind:?} runs have no result to replay"))),
    };
    Ok(EvalResult {
        policy: spec.policy.clone().unwrap_or_else(|| "net".into()),
        method: row.method,
        model: row.model,
        n: row.n,
        m: row.m,
        info: row.info,
        seed: spec.seeds.get("eval").copied().unwrap_or(row.seed),
        mean_profitability: row.mean_profitability,
        sem: row.sem,
        samples: row.samples,
        capped: !row.flag.is_empty(),
    })
}
