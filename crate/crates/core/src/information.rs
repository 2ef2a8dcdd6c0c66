//! Limited polling information about the sincere profile, and the feature
//! vectors fed to a manipulation policy.
//!
//! A feature vector is the manipulator's `m` utilities followed by one
//! flattened information block: `m` entries for the score-like types and
//! `m * m` row-major entries for the matrix types.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::elections::{Profile, UtilityProfile};
use crate::error::{Error, Result};
use crate::scalar::Scalar;
use crate::voting::MethodId;

/// Stable codes 0..=5.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
#[repr(u8)]
pub enum InfoType {
    PluralityScores = 0,
    PluralityRanking = 1,
    MarginMatrix = 2,
    MajorityMatrix = 3,
    QualitativeMarginMatrix = 4,
    SincereWinners = 5,
}

impl InfoType {
    pub const ALL: [InfoType; 6] = [
        InfoType::PluralityScores,
        InfoType::PluralityRanking,
        InfoType::MarginMatrix,
        InfoType::MajorityMatrix,
        InfoType::QualitativeMarginMatrix,
        InfoType::SincereWinners,
    ];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Result<Self> {
        Self::ALL.get(code as usize).copied().ok_or(Error::UnknownCode { kind: "info", code })
    }

    pub fn name(self) -> &'static str {
        match self {
            InfoType::PluralityScores => "plurality-scores",
            InfoType::PluralityRanking => "plurality-ranking",
            InfoType::MarginMatrix => "margin-matrix",
            InfoType::MajorityMatrix => "majority-matrix",
            InfoType::QualitativeMarginMatrix => "qualitative-margin-matrix",
            InfoType::SincereWinners => "sincere-winners",
        }
    }

    /// Length of the information block for `m` candidates.
    pub fn info_len(self, m: usize) -> usize {
        match self {
            InfoType::PluralityScores | InfoType::PluralityRanking | InfoType::SincereWinners => m,
            _ => m * m,
        }
    }

    /// Utilities plus information block.
    pub fn feature_len(self, m: usize) -> usize {
        m + self.info_len(m)
    }

    /// The raw integer information block of `profile`.
    pub fn extract(self, profile: &Profile, method: MethodId) -> Vec<i32> {
        match self {
            InfoType::PluralityScores => plurality_scores(profile),
            InfoType::PluralityRanking => plurality_ranking(profile),
            InfoType::MarginMatrix => margin_matrix(profile),
            InfoType::MajorityMatrix => majority_matrix(profile),
            InfoType::QualitativeMarginMatrix => qualitative_margin_matrix(profile),
            InfoType::SincereWinners => sincere_winners(profile, method),
        }
    }
}

impl fmt::Display for InfoType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for InfoType {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('_', "-");
        if let Ok(code) = key.parse::<u8>() {
            return Self::from_code(code);
        }
        let alias = match key.as_str() {
            "margin" => "margin-matrix",
            "majority" => "majority-matrix",
            "qualitative" | "qualitative-margin" => "qualitative-margin-matrix",
            other => other,
        };
        Self::ALL
            .into_iter()
            .find(|i| i.name() == alias)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown information type {s:?}")))
    }
}

impl From<InfoType> for String {
    fn from(i: InfoType) -> String {
        i.name().to_string()
    }
}

impl TryFrom<String> for InfoType {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// First-place votes per candidate.
pub fn plurality_scores(profile: &Profile) -> Vec<i32> {
    profile.plurality_scores().into_iter().map(|c| c as i32).collect()
}

/// Entry `c` counts the candidates with strictly more first-place votes
/// than `c`; tied candidates share a value and 0 is the top.
pub fn plurality_ranking(profile: &Profile) -> Vec<i32> {
    let scores = profile.plurality_scores();
    scores.iter().map(|s| scores.iter().filter(|t| *t > s).count() as i32).collect()
}

/// Row-major margins.
pub fn margin_matrix(profile: &Profile) -> Vec<i32> {
    profile.margin_matrix().to_rows().concat()
}

/// Signs of the margins.
pub fn majority_matrix(profile: &Profile) -> Vec<i32> {
    majority_from_margins(&margin_matrix(profile))
}

pub fn majority_from_margins(margins: &[i32]) -> Vec<i32> {
    margins.iter().map(|x| x.signum()).collect()
}

/// Each positive margin becomes its 1-based rank among the distinct positive
/// margin values (ascending); the negative half mirrors it and zeros stay.
pub fn qualitative_margin_matrix(profile: &Profile) -> Vec<i32> {
    qualitative_from_margins(&margin_matrix(profile))
}

pub fn qualitative_from_margins(margins: &[i32]) -> Vec<i32> {
    let mut levels: Vec<i32> = margins.iter().copied().filter(|&x| x > 0).collect();
    levels.sort_unstable();
    levels.dedup();
    let rank = |x: i32| levels.binary_search(&x).expect("positive margin is a level") as i32 + 1;
    margins
        .iter()
        .map(|&x| match x.signum() {
            1 => rank(x),
            -1 => -rank(-x),
            _ => 0,
        })
        .collect()
}

/// Indicator of the sincere winners under `method`.
pub fn sincere_winners(profile: &Profile, method: MethodId) -> Vec<i32> {
    let winners = method.winners(profile);
    (0..profile.m()).map(|c| winners.contains(c) as i32).collect()
}

/// Feature-assembly options.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct FeatureOptions {
    /// Divide plurality scores and margins by the number of voters.
    #[serde(default)]
    pub normalize: bool,
}

/// Manipulator utilities followed by the information block computed on the
/// full sincere profile (the manipulator's own sincere ballot included).
pub fn build_features<S: Scalar>(
    u: &UtilityProfile<S>,
    manipulator: usize,
    info: InfoType,
    method: MethodId,
    opts: FeatureOptions,
) -> Result<Vec<S>> {
    if manipulator >= u.n() {
        return Err(Error::InvalidVoter { voter: manipulator, n: u.n() });
    }
    Ok(features_for_profile(u, &u.induced_profile(), manipulator, info, method, opts))
}

/// [`build_features`] with the sincere profile already induced.
pub fn features_for_profile<S: Scalar>(
    u: &UtilityProfile<S>,
    sincere: &Profile,
    manipulator: usize,
    info: InfoType,
    method: MethodId,
    opts: FeatureOptions,
) -> Vec<S> {
    let block = info.extract(sincere, method);
    let scale = match info {
        InfoType::PluralityScores | InfoType::MarginMatrix if opts.normalize => 1.0 / sincere.n() as f64,
        _ => 1.0,
    };
    let mut out = Vec::with_capacity(info.feature_len(u.m()));
    out.extend_from_slice(u.row(manipulator));
    out.extend(block.into_iter().map(|x| S::of(x as f64 * scale)));
    out
}
