//! Policies and Monte-Carlo estimates of their average profitability.
//!
//! Sample `i` of a run draws its election from the stream derived from
//! `(seed, i)`, so results do not depend on how many threads computed them.
//! Samples are accumulated in index order and the run stops at the first
//! count that meets the stopping rule.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::elections::{Profile, Ranking, UtilityProfile};
use crate::error::{Error, Result};
use crate::information::{features_for_profile, FeatureOptions, InfoType};
use crate::neural::Mlp;
use crate::oracle::{ideal_profitability, MAX_ORACLE_CANDIDATES, outcome_with_profile, rankings, Responses};
use crate::samplers::{ProbModel, RandomStream};
use crate::scalar::Scalar;
use crate::voting::MethodId;

/// Index of the manipulating voter in every sampled election.
pub const MANIPULATOR: usize = 0;

/// How the manipulator chooses a ballot.
#[derive(Clone, Copy, Debug)]
pub enum Policy<'a, S> {
    /// Argmax of a trained network fed limited information.
    Net { net: &'a Mlp<S>, info: InfoType, opts: FeatureOptions },
    /// Always the sincere ballot.
    Sincere,
    /// Full information: the lowest-index optimal ballot.
    Ideal,
}

impl<S> Policy<'_, S> {
    pub fn name(&self) -> &'static str {
        match self {
            Policy::Net { .. } => "net",
            Policy::Sincere => "sincere",
            Policy::Ideal => "ideal",
        }
    }

    pub fn info(&self) -> Option<InfoType> {
        match self {
            Policy::Net { info, .. } => Some(*info),
            _ => None,
        }
    }
}

impl<S: Scalar> Policy<'_, S> {
    fn check(&self, m: usize) -> Result<()> {
        if let Policy::Net { net, info, .. } = self {
            if net.input_dim() != info.feature_len(m) {
                return Err(Error::DimensionMismatch { expected: info.feature_len(m), found: net.input_dim() });
            }
            if net.output_dim() != rankings(m).len() {
                return Err(Error::DimensionMismatch { expected: rankings(m).len(), found: net.output_dim() });
            }
        }
        Ok(())
    }

    fn decide_with_profile(&self, method: MethodId, u: &UtilityProfile<S>, sincere: &Profile, voter: usize) -> Result<Ranking> {
        match self {
            Policy::Sincere => Ok(*sincere.ballot(voter)),
            Policy::Ideal => {
                let responses = Responses::compute_with_profile(method, u, sincere, voter)?;
                Ok(rankings(u.m())[responses.ideal_choice()])
            }
            Policy::Net { net, info, opts } => {
                let features = features_for_profile(u, sincere, voter, *info, method, *opts);
                Ok(rankings(u.m())[net.argmax(&features)?])
            }
        }
    }

    /// The ballot this policy submits for `voter`.
    pub fn decide(&self, method: MethodId, u: &UtilityProfile<S>, voter: usize) -> Result<Ranking> {
        self.check(u.m())?;
        if voter >= u.n() {
            return Err(Error::InvalidVoter { voter, n: u.n() });
        }
        self.decide_with_profile(method, u, &u.induced_profile(), voter)
    }

    /// Profitability of the policy's ballot on one election.
    pub fn profitability(&self, method: MethodId, u: &UtilityProfile<S>) -> Result<S> {
        let sincere = u.induced_profile();
        match self {
            Policy::Ideal => ideal_profitability(method, u, &sincere, MANIPULATOR),
            _ => {
                let ballot = self.decide_with_profile(method, u, &sincere, MANIPULATOR)?;
                Ok(outcome_with_profile(method, u, &sincere, MANIPULATOR, ballot)?.profitability)
            }
        }
    }
}

/// Running mean and sample variance (Welford).
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct SemAccumulator {
    count: u64,
    mean: f64,
    m2: f64,
}

impl SemAccumulator {
    pub fn push(&mut self, x: f64) {
        self.count += 1;
        let delta = x - self.mean;
        self.mean += delta / self.count as f64;
        self.m2 += delta * (x - self.mean);
    }

    pub fn count(&self) -> u64 {
        self.count
    }

    pub fn mean(&self) -> f64 {
        self.mean
    }

    /// Sample standard deviation with denominator `N - 1`.
    pub fn sd(&self) -> f64 {
        if self.count < 2 {
            return f64::INFINITY;
        }
        (self.m2 / (self.count - 1) as f64).sqrt()
    }

    pub fn sem(&self) -> f64 {
        self.sd() / (self.count as f64).sqrt()
    }
}

/// Stopping rule of an evaluation run.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvalConfig {
    pub min_samples: u64,
    pub target_sem: f64,
    /// Runs reaching this many samples stop and are flagged.
    pub max_samples: u64,
    /// Samples computed in parallel between stopping checks.
    pub chunk: u64,
}

impl Default for EvalConfig {
    fn default() -> Self {
        EvalConfig { min_samples: 4096, target_sem: 5e-4, max_samples: 1_000_000, chunk: 4096 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub policy: String,
    pub method: MethodId,
    pub model: ProbModel,
    pub n: usize,
    pub m: usize,
    pub info: Option<InfoType>,
    pub seed: u64,
    pub mean_profitability: f64,
    pub sem: f64,
    pub samples: u64,
    /// True when the run hit `max_samples` before the SEM target.
    pub capped: bool,
}

/// Election number `index` of the run seeded by `seed`.
pub fn sample_election<S: Scalar>(model: ProbModel, n: usize, m: usize, seed: u64, index: u64) -> Result<UtilityProfile<S>> {
    let sampler = model.sampler(n, m)?;
    Ok(sampler.sample(&mut RandomStream::derive(seed, index)))
}

/// Average profitability of `policy`, sampling until at least
/// `min_samples` elections were seen and the SEM is below `target_sem`.
pub fn evaluate<S: Scalar>(
    policy: &Policy<'_, S>,
    method: MethodId,
    model: ProbModel,
    n: usize,
    m: usize,
    seed: u64,
    config: &EvalConfig,
) -> Result<EvalResult> {
    policy.check(m)?;
    if config.min_samples < 2 || config.chunk == 0 || config.max_samples < config.min_samples || !(config.target_sem > 0.0) {
        return Err(Error::InvalidArgument("bad evaluation settings".into()));
    }
    let sampler = model.sampler(n, m)?;
    if m > MAX_ORACLE_CANDIDATES {
        return Err(Error::UnsupportedCandidates { m, min: 2, max: MAX_ORACLE_CANDIDATES });
    }

    let mut acc = SemAccumulator::default();
    let mut next = 0u64;
    let mut capped = false;
    'outer: loop {
        let size = if next == 0 { config.min_samples.max(config.chunk) } else { config.chunk };
        let end = (next + size).min(config.max_samples);
        let values: Vec<f64> = (next..end)
            .into_par_iter()
            .map(|i| {
                let u: UtilityProfile<S> = sampler.sample(&mut RandomStream::derive(seed, i));
                policy.profitability(method, &u).map(Scalar::as_f64)
            })
            .collect::<Result<_>>()?;
        for x in values {
            acc.push(x);
            if acc.count() >= config.min_samples && acc.sem() < config.target_sem {
                break 'outer;
            }
        }
        next = end;
        if next >= config.max_samples {
            capped = true;
            break;
        }
    }
    Ok(EvalResult {
        policy: policy.name().to_string(),
        method,
        model,
        n,
        m,
        info: policy.info(),
        seed,
        mean_profitability: acc.mean(),
        sem: acc.sem(),
        samples: acc.count(),
        capped,
    })
}

/// [`evaluate`] with the ideal manipulator.
pub fn ideal_baseline(method: MethodId, model: ProbModel, n: usize, m: usize, seed: u64, config: &EvalConfig) -> Result<EvalResult> {
    evaluate::<f64>(&Policy::Ideal, method, model, n, m, seed, config)
}
