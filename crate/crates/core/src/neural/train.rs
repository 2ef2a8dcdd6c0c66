use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::elections::UtilityProfile;
use crate::error::{Error, Result};
use crate::information::{features_for_profile, FeatureOptions, InfoType};
use crate::neural::loss::LossKind;
use crate::neural::mlp::{argmax_first, Gradients, Mlp};
use crate::oracle::{num_classes, LabeledInstance, Responses};
use crate::samplers::RandomStream;
use crate::scalar::Scalar;
use crate::voting::MethodId;

/// Adam moment decay rates and stabilizer.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub batch_size: usize,
    pub learning_rate: f64,
    pub min_iterations: usize,
    pub validate_every: usize,
    pub patience: usize,
    pub min_improvement: f64,
    pub validation_size: usize,
    pub loss: LossKind,
    pub adam: AdamConfig,
    /// Hard stop regardless of the validation curve.
    pub max_iterations: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            batch_size: 512,
            learning_rate: 6e-3,
            min_iterations: 220,
            validate_every: 20,
            patience: 10,
            min_improvement: 0.001,
            validation_size: 4096,
            loss: LossKind::MaskedMse,
            adam: AdamConfig::default(),
            max_iterations: 100_000,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [self.batch_size, self.min_iterations, self.validate_every, self.patience, self.validation_size, self.max_iterations];
        let reals = [self.learning_rate, self.min_improvement, self.adam.beta1, self.adam.beta2, self.adam.eps];
        if counts.contains(&0) || reals.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
            return Err(Error::InvalidArgument("training settings must be positive".into()));
        }
        if self.adam.beta1 >= 1.0 || self.adam.beta2 >= 1.0 {
            return Err(Error::InvalidArgument("adam decay rates must be below one".into()));
        }
        Ok(())
    }
}

/// Adam with bias-corrected moments.
#[derive(Clone, Debug)]
pub struct Adam<S> {
    lr: S,
    beta1: S,
    beta2: S,
    eps: S,
    step: i32,
    first: Vec<S>,
    second: Vec<S>,
}

impl<S: Scalar> Adam<S> {
    pub fn new(param_count: usize, learning_rate: f64, config: AdamConfig) -> Self {
        Adam {
            lr: S::of(learning_rate),
            beta1: S::of(config.beta1),
            beta2: S::of(config.beta2),
            eps: S::of(config.eps),
            step: 0,
            first: vec![S::zero(); param_count],
            second: vec![S::zero(); param_count],
        }
    }

    pub fn step(&mut self, net: &mut Mlp<S>, grads: &Gradients<S>) {
        self.step += 1;
        let c1 = S::one() - self.beta1.powi(self.step);
        let c2 = S::one() - self.beta2.powi(self.step);
        let mut offset = 0;
        for (layer, g) in net.layers_mut().iter_mut().zip(&grads.layers) {
            for (params, grad) in [(&mut layer.weights, &g.weights), (&mut layer.bias, &g.bias)] {
                let first = &mut self.first[offset..offset + params.len()];
                let second = &mut self.second[offset..offset + params.len()];
                for (((p, &g), m), v) in params.iter_mut().zip(grad.iter()).zip(first).zip(second) {
                    *m = self.beta1 * *m + (S::one() - self.beta1) * g;
                    *v = self.beta2 * *v + (S::one() - self.beta2) * g * g;
                    *p -= self.lr * (*m / c1) / ((*v / c2).sqrt() + self.eps);
                }
                offset += params.len();
            }
        }
    }
}

/// Pre-computed validation elections: features plus the profitability of
/// every ballot, so scoring a network needs no oracle calls.
#[derive(Clone, Debug)]
pub struct ValidationSet<S> {
    input_dim: usize,
    classes: usize,
    features: Vec<S>,
    profits: Vec<f64>,
}

impl<S: Scalar> ValidationSet<S> {
    /// Builds from elections with voter 0 as the manipulator.
    pub fn build(
        method: MethodId,
        info: InfoType,
        opts: FeatureOptions,
        elections: &[UtilityProfile<S>],
    ) -> Result<Self> {
        let first = elections.first().ok_or_else(|| Error::InvalidArgument("no validation elections".into()))?;
        let m = first.m();
        let mut set = ValidationSet {
            input_dim: info.feature_len(m),
            classes: num_classes(m),
            features: Vec::new(),
            profits: Vec::new(),
        };
        for u in elections {
            if u.m() != m {
                return Err(Error::MismatchedCandidates { expected: m, found: u.m() });
            }
            let sincere = u.induced_profile();
            let responses = Responses::compute_with_profile(method, u, &sincere, 0)?;
            set.features.extend(features_for_profile(u, &sincere, 0, info, method, opts));
            set.profits.extend((0..set.classes).map(|k| responses.profitability(k).as_f64()));
        }
        Ok(set)
    }

    /// `features` is row-major `len × input_dim`, `profits` row-major
    /// `len × classes`.
    pub fn from_parts(input_dim: usize, classes: usize, features: Vec<S>, profits: Vec<f64>) -> Result<Self> {
        let len = profits.len() / classes.max(1);
        if classes == 0 || input_dim == 0 || len == 0 || profits.len() != len * classes || features.len() != len * input_dim {
            return Err(Error::InvalidArgument("inconsistent validation arrays".into()));
        }
        Ok(ValidationSet { input_dim, classes, features, profits })
    }

    pub fn len(&self) -> usize {
        self.profits.len() / self.classes
    }

    pub fn is_empty(&self) -> bool {
        self.profits.is_empty()
    }

    /// Mean profitability of the network's argmax ballot.
    pub fn profitability(&self, net: &Mlp<S>) -> Result<f64> {
        if net.input_dim() != self.input_dim || net.output_dim() != self.classes {
            return Err(Error::DimensionMismatch { expected: self.input_dim, found: net.input_dim() });
        }
        const CHUNK: usize = 512;
        let mut total = 0.0;
        for (inputs, profits) in self.features.chunks(CHUNK * self.input_dim).zip(self.profits.chunks(CHUNK * self.classes)) {
            let logits = net.logits_batch(inputs)?;
            for (z, p) in logits.chunks_exact(self.classes).zip(profits.chunks_exact(self.classes)) {
                total += p[argmax_first(z)];
            }
        }
        Ok(total / self.len() as f64)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LogEntry {
    pub iteration: usize,
    /// Mean batch loss since the previous entry.
    pub train_loss: f64,
    pub validation_profitability: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainingLog {
    pub entries: Vec<LogEntry>,
    pub iterations: usize,
    pub best_validation: f64,
}

#[derive(Clone, Debug)]
pub struct Trained<S> {
    pub net: Mlp<S>,
    pub log: TrainingLog,
}

/// Minibatch training with early stopping on validation profitability.
///
/// Batches are cut from epochs reshuffled by `stream`. Every
/// `validate_every` iterations the validation profitability is logged; a
/// validation counts as an improvement when it beats the best so far by at
/// least `min_improvement`. Training stops once `min_iterations` have run and
/// `patience` validations in a row failed to improve. The final weights are
/// returned.
pub fn train<S: Scalar>(
    mut net: Mlp<S>,
    data: &[LabeledInstance<S>],
    validation: &ValidationSet<S>,
    config: &TrainConfig,
    stream: &mut RandomStream,
) -> Result<Trained<S>> {
    config.validate()?;
    if data.is_empty() {
        return Err(Error::InvalidArgument("empty training set".into()));
    }
    for inst in data {
        if inst.features.len() != net.input_dim() {
            return Err(Error::DimensionMismatch { expected: net.input_dim(), found: inst.features.len() });
        }
        if inst.labels.len() != net.output_dim() {
            return Err(Error::DimensionMismatch { expected: net.output_dim(), found: inst.labels.len() });
        }
    }

    let batch_size = config.batch_size.min(data.len());
    let mut adam = Adam::new(net.param_count(), config.learning_rate, config.adam);
    let mut order: Vec<usize> = (0..data.len()).collect();
    order.shuffle(stream);
    let mut cursor = 0;
    let mut inputs: Vec<S> = Vec::with_capacity(batch_size * net.input_dim());
    let mut batch: Vec<usize> = Vec::with_capacity(batch_size);

    let mut log = TrainingLog { best_validation: f64::NEG_INFINITY, ..Default::default() };
    let mut stale = 0;
    let mut loss_sum = 0.0;
    let mut loss_count = 0;
    for iteration in 1..=config.max_iterations {
        batch.clear();
        while batch.len() < batch_size {
            if cursor == order.len() {
                order.shuffle(stream);
                cursor = 0;
            }
            let take = (batch_size - batch.len()).min(order.len() - cursor);
            batch.extend_from_slice(&order[cursor..cursor + take]);
            cursor += take;
        }
        inputs.clear();
        for &i in &batch {
            inputs.extend_from_slice(&data[i].features);
        }
        let masks: Vec<_> = batch.iter().map(|&i| &data[i].labels).collect();
        let (loss, grads) = net.loss_and_gradients(&inputs, &masks, config.loss)?;
        adam.step(&mut net, &grads);
        loss_sum += loss.as_f64();
        loss_count += 1;
        log.iterations = iteration;

        if iteration % config.validate_every == 0 {
            let value = validation.profitability(&net)?;
            log.entries.push(LogEntry {
                iteration,
                train_loss: loss_sum / loss_count as f64,
                validation_profitability: value,
            });
            loss_sum = 0.0;
            loss_count = 0;
            if value >= log.best_validation + config.min_improvement {
                log.best_validation = value;
                stale = 0;
            } else {
                stale += 1;
            }
            if iteration >= config.min_iterations && stale >= config.patience {
                break;
            }
        }
    }
    Ok(Trained { net, log })
}
