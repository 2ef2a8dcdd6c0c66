use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::oracle::LabelMask;
use crate::scalar::Scalar;

/// Losses on the probability the network puts on the labeled ballots.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum LossKind {
    /// `(1 - p)^2`.
    #[default]
    MaskedMse,
    /// `-ln p`.
    MaskedBce,
}

impl LossKind {
    pub fn name(self) -> &'static str {
        match self {
            LossKind::MaskedMse => "masked-mse",
            LossKind::MaskedBce => "masked-bce",
        }
    }
}

impl fmt::Display for LossKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LossKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().replace('_', "-").as_str() {
            "masked-mse" | "mse" => Ok(LossKind::MaskedMse),
            "masked-bce" | "bce" => Ok(LossKind::MaskedBce),
            _ => Err(Error::InvalidArgument(format!("unknown loss {s:?}"))),
        }
    }
}

impl From<LossKind> for String {
    fn from(k: LossKind) -> String {
        k.name().to_string()
    }
}

impl TryFrom<String> for LossKind {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// Smallest probability used inside the logarithm of [`masked_loss`].
pub const PROBABILITY_FLOOR: f64 = 1e-12;

fn check_mask(len: usize, mask: &LabelMask) -> Result<()> {
    if mask.len() != len {
        return Err(Error::DimensionMismatch { expected: len, found: mask.len() });
    }
    if mask.is_empty() {
        return Err(Error::EmptyMask);
    }
    Ok(())
}

/// Loss of a probability distribution against a label mask.
pub fn masked_loss<S: Scalar>(dist: &[S], mask: &LabelMask, kind: LossKind) -> Result<S> {
    check_mask(dist.len(), mask)?;
    let p = mask.ones().map(|k| dist[k]).sum::<S>();
    Ok(match kind {
        LossKind::MaskedMse => (S::one() - p).powi(2),
        LossKind::MaskedBce => -p.max(S::of(PROBABILITY_FLOOR)).ln(),
    })
}

fn log_sum_exp<S: Scalar>(values: impl Iterator<Item = S> + Clone) -> S {
    let hi = values.clone().fold(S::neg_infinity(), S::max);
    hi + values.map(|v| (v - hi).exp()).sum::<S>().ln()
}

/// Loss from logits `z`; writes `dL/dz` into `grad`.
pub(crate) fn loss_gradient<S: Scalar>(z: &[S], mask: &LabelMask, kind: LossKind, grad: &mut [S]) -> Result<S> {
    check_mask(z.len(), mask)?;
    let lse_all = log_sum_exp(z.iter().copied());
    match kind {
        LossKind::MaskedMse => {
            for (g, &v) in grad.iter_mut().zip(z) {
                *g = (v - lse_all).exp();
            }
            let p = mask.ones().map(|k| grad[k]).sum::<S>();
            let two_gap = S::of(2.0) * (S::one() - p);
            for (k, g) in grad.iter_mut().enumerate() {
                let indicator = if mask.get(k) { S::one() } else { S::zero() };
                *g = -two_gap * *g * (indicator - p);
            }
            Ok((S::one() - p).powi(2))
        }
        LossKind::MaskedBce => {
            let lse_mask = log_sum_exp(mask.ones().map(|k| z[k]));
            for (k, (g, &v)) in grad.iter_mut().zip(z).enumerate() {
                let q = if mask.get(k) { (v - lse_mask).exp() } else { S::zero() };
                *g = (v - lse_all).exp() - q;
            }
            Ok(lse_all - lse_mask)
        }
    }
}
