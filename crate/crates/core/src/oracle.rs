//! Exhaustive best responses of a single voter.
//!
//! For every one of the `m!` ballots the manipulator could submit, the
//! method is rerun on the profile with that ballot swapped in and the
//! manipulator's expected utility of the even-chance lottery over the
//! winners is recorded. Labels and profitability are read off that table.

use std::fmt;
use std::str::FromStr;
use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::elections::{factorial, MarginMatrix, Profile, Ranking, UtilityProfile, WinnerSet, MAX_CANDIDATES};
use crate::error::{Error, Result};
use crate::information::{features_for_profile, FeatureOptions, InfoType};
use crate::scalar::Scalar;
use crate::voting::{lottery_eu, Election, MethodId};

/// Largest candidate count the brute-force oracle accepts (720 ballots).
pub const MAX_ORACLE_CANDIDATES: usize = 6;

/// Absolute tolerance for comparing lottery expected utilities.
pub const EU_TOLERANCE: f64 = 1e-12;

/// All rankings of `m` candidates in index order, computed once per `m`.
pub fn rankings(m: usize) -> &'static [Ranking] {
    static TABLES: [OnceLock<Vec<Ranking>>; MAX_CANDIDATES + 1] = [const { OnceLock::new() }; MAX_CANDIDATES + 1];
    TABLES[m].get_or_init(|| Ranking::all(m).expect("supported candidate count"))
}

fn check_oracle_m(m: usize) -> Result<()> {
    if (2..=MAX_ORACLE_CANDIDATES).contains(&m) {
        Ok(())
    } else {
        Err(Error::UnsupportedCandidates { m, min: 2, max: MAX_ORACLE_CANDIDATES })
    }
}

fn tolerance<S: Scalar>(utilities: &[S]) -> S {
    let scale = utilities.iter().fold(S::one(), |acc, u| acc.max(u.abs()));
    S::of(EU_TOLERANCE).max(S::epsilon() * S::of(8.0) * scale)
}

/// Which ballots get a positive label.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
#[repr(u8)]
pub enum Labeling {
    /// Every expected-utility-maximizing ballot.
    Optimizing = 0,
    /// Every profitable ballot, or if there is none every ballot at least as
    /// good as the sincere one.
    Satisficing = 1,
}

impl Labeling {
    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(Labeling::Optimizing),
            1 => Ok(Labeling::Satisficing),
            _ => Err(Error::UnknownCode { kind: "labeling", code }),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Labeling::Optimizing => "optimizing",
            Labeling::Satisficing => "satisficing",
        }
    }
}

impl fmt::Display for Labeling {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Labeling {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "0" | "optimizing" => Ok(Labeling::Optimizing),
            "1" | "satisficing" => Ok(Labeling::Satisficing),
            _ => Err(Error::InvalidArgument(format!("unknown labeling {s:?}"))),
        }
    }
}

impl From<Labeling> for String {
    fn from(l: Labeling) -> String {
        l.name().to_string()
    }
}

impl TryFrom<String> for Labeling {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// Bit mask over ranking indices.
#[derive(Clone, PartialEq, Eq, Hash)]
pub struct LabelMask {
    len: usize,
    words: Vec<u64>,
}

impl LabelMask {
    pub fn empty(len: usize) -> Self {
        LabelMask { len, words: vec![0; len.div_ceil(64)] }
    }

    pub fn full(len: usize) -> Self {
        let mut mask = LabelMask::empty(len);
        for k in 0..len {
            mask.set(k);
        }
        mask
    }

    pub fn from_indices(len: usize, indices: impl IntoIterator<Item = usize>) -> Self {
        let mut mask = LabelMask::empty(len);
        for k in indices {
            mask.set(k);
        }
        mask
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn set(&mut self, k: usize) {
        assert!(k < self.len, "label {k} out of range");
        self.words[k / 64] |= 1 << (k % 64);
    }

    pub fn get(&self, k: usize) -> bool {
        self.words[k / 64] >> (k % 64) & 1 == 1
    }

    pub fn count(&self) -> usize {
        self.words.iter().map(|w| w.count_ones() as usize).sum()
    }

    /// No bit set.
    pub fn is_empty(&self) -> bool {
        self.words.iter().all(|&w| w == 0)
    }

    pub fn ones(&self) -> impl Iterator<Item = usize> + Clone + '_ {
        (0..self.len).filter(|&k| self.get(k))
    }

    pub fn is_subset(&self, other: &LabelMask) -> bool {
        self.words.iter().zip(&other.words).all(|(a, b)| a & !b == 0)
    }

    /// `ceil(len / 8)` bytes, least significant bit first.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut bytes: Vec<u8> = self.words.iter().flat_map(|w| w.to_le_bytes()).collect();
        bytes.truncate(self.len.div_ceil(8));
        bytes
    }

    pub fn from_bytes(len: usize, bytes: &[u8]) -> Result<Self> {
        if bytes.len() != len.div_ceil(8) {
            return Err(Error::InvalidArgument(format!("{} label bytes for {len} labels", bytes.len())));
        }
        let mut mask = LabelMask::empty(len);
        for (i, chunk) in bytes.chunks(8).enumerate() {
            let mut buf = [0u8; 8];
            buf[..chunk.len()].copy_from_slice(chunk);
            mask.words[i] = u64::from_le_bytes(buf);
        }
        if mask.ones().count() != mask.count() {
            return Err(Error::InvalidArgument("label bits beyond the class count".into()));
        }
        Ok(mask)
    }
}

impl fmt::Debug for LabelMask {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.ones()).finish()
    }
}

/// Expected utilities of every ballot `voter` could submit.
#[derive(Clone, Debug)]
pub struct Responses<S> {
    eus: Vec<S>,
    sincere: usize,
    range: S,
    tol: S,
}

impl<S: Scalar> Responses<S> {
    pub fn compute(method: MethodId, u: &UtilityProfile<S>, voter: usize) -> Result<Self> {
        let sincere = u.induced_profile();
        Self::compute_with_profile(method, u, &sincere, voter)
    }

    /// Same as [`Responses::compute`] with the sincere profile supplied.
    pub fn compute_with_profile(
        method: MethodId,
        u: &UtilityProfile<S>,
        sincere: &Profile,
        voter: usize,
    ) -> Result<Self> {
        let mut responder = Responder::new(method, u, sincere, voter)?;
        let utilities = u.row(voter);
        let eus = rankings(u.m())
            .iter()
            .map(|r| lottery_eu(responder.winners(r), utilities).expect("methods return winners"))
            .collect();
        Ok(Responses {
            eus,
            sincere: sincere.ballot(voter).index() as usize,
            range: u.utility_range(voter),
            tol: tolerance(utilities),
        })
    }

    /// Entry `k` belongs to ranking index `k`.
    pub fn eus(&self) -> &[S] {
        &self.eus
    }

    pub fn sincere_index(&self) -> usize {
        self.sincere
    }

    pub fn eu_sincere(&self) -> S {
        self.eus[self.sincere]
    }

    pub fn best_eu(&self) -> S {
        self.eus.iter().copied().fold(S::neg_infinity(), S::max)
    }

    pub fn optimizing_labels(&self) -> LabelMask {
        let best = self.best_eu();
        LabelMask::from_indices(self.eus.len(), (0..self.eus.len()).filter(|&k| self.eus[k] >= best - self.tol))
    }

    pub fn satisficing_labels(&self) -> LabelMask {
        let base = self.eu_sincere();
        let profitable: Vec<usize> = (0..self.eus.len()).filter(|&k| self.eus[k] > base + self.tol).collect();
        if profitable.is_empty() {
            LabelMask::from_indices(self.eus.len(), (0..self.eus.len()).filter(|&k| self.eus[k] >= base - self.tol))
        } else {
            LabelMask::from_indices(self.eus.len(), profitable)
        }
    }

    pub fn labels(&self, labeling: Labeling) -> LabelMask {
        match labeling {
            Labeling::Optimizing => self.optimizing_labels(),
            Labeling::Satisficing => self.satisficing_labels(),
        }
    }

    /// Lowest-index optimal ballot.
    pub fn ideal_choice(&self) -> usize {
        let best = self.best_eu();
        (0..self.eus.len()).find(|&k| self.eus[k] >= best - self.tol).expect("nonempty")
    }

    /// Gain of submitting ranking `k` over the sincere ballot, normalized by
    /// the voter's utility range.
    pub fn profitability(&self, k: usize) -> S {
        (self.eus[k] - self.eu_sincere()) / self.range
    }
}

// Reruns one method with a single ballot swapped, reusing the other voters'
// margins.
struct Responder {
    method: MethodId,
    profile: Profile,
    others: MarginMatrix,
    voter: usize,
}

impl Responder {
    fn new<S: Scalar>(method: MethodId, u: &UtilityProfile<S>, sincere: &Profile, voter: usize) -> Result<Self> {
        check_oracle_m(u.m())?;
        if voter >= u.n() {
            return Err(Error::InvalidVoter { voter, n: u.n() });
        }
        let mut others = sincere.margin_matrix();
        others.remove_ballot(sincere.ballot(voter));
        Ok(Responder { method, profile: sincere.clone(), others, voter })
    }

    fn winners(&mut self, r: &Ranking) -> WinnerSet {
        self.profile.set_ballot(self.voter, *r);
        let mut margins = self.others;
        margins.add_ballot(r);
        self.method.winners_in(&Election::with_margins(&self.profile, margins))
    }
}

/// Expected utility of every possible ballot of `voter`, by ranking index.
pub fn response_eus<S: Scalar>(method: MethodId, u: &UtilityProfile<S>, voter: usize) -> Result<Vec<S>> {
    Ok(Responses::compute(method, u, voter)?.eus)
}

pub fn optimizing_labels<S: Scalar>(method: MethodId, u: &UtilityProfile<S>, voter: usize) -> Result<LabelMask> {
    Ok(Responses::compute(method, u, voter)?.optimizing_labels())
}

pub fn satisficing_labels<S: Scalar>(method: MethodId, u: &UtilityProfile<S>, voter: usize) -> Result<LabelMask> {
    Ok(Responses::compute(method, u, voter)?.satisficing_labels())
}

/// What happens when `voter` submits `submitted` instead of their sincere
/// ballot.
#[derive(Clone, Debug, PartialEq)]
pub struct ManipulationOutcome<S> {
    pub submitted: Ranking,
    pub winners: WinnerSet,
    pub eu_submitted: S,
    pub eu_sincere: S,
    pub profitability: S,
}

pub fn outcome<S: Scalar>(
    method: MethodId,
    u: &UtilityProfile<S>,
    voter: usize,
    submitted: Ranking,
) -> Result<ManipulationOutcome<S>> {
    let sincere = u.induced_profile();
    outcome_with_profile(method, u, &sincere, voter, submitted)
}

/// [`outcome`] with the sincere profile supplied.
pub fn outcome_with_profile<S: Scalar>(
    method: MethodId,
    u: &UtilityProfile<S>,
    sincere: &Profile,
    voter: usize,
    submitted: Ranking,
) -> Result<ManipulationOutcome<S>> {
    let utilities = u.row(voter);
    let eu_sincere = lottery_eu(method.winners(sincere), utilities)?;
    let (winners, eu_submitted) = if submitted == *sincere.ballot(voter) {
        (method.winners(sincere), eu_sincere)
    } else {
        let changed = sincere.replace_ballot(voter, submitted)?;
        let winners = method.winners(&changed);
        (winners, lottery_eu(winners, utilities)?)
    };
    Ok(ManipulationOutcome {
        submitted,
        winners,
        eu_submitted,
        eu_sincere,
        profitability: (eu_submitted - eu_sincere) / u.utility_range(voter),
    })
}

pub fn profitability<S: Scalar>(method: MethodId, u: &UtilityProfile<S>, voter: usize, submitted: Ranking) -> Result<S> {
    Ok(outcome(method, u, voter, submitted)?.profitability)
}

/// Profitability of an optimal ballot, without building the full table.
///
/// Stops at the first ballot that elects the voter's favorite alone, since
/// nothing does better. Agrees with the profitability of
/// [`Responses::ideal_choice`] up to the comparison tolerance.
pub fn ideal_profitability<S: Scalar>(method: MethodId, u: &UtilityProfile<S>, sincere: &Profile, voter: usize) -> Result<S> {
    let mut responder = Responder::new(method, u, sincere, voter)?;
    let utilities = u.row(voter);
    let top = utilities.iter().copied().fold(S::neg_infinity(), S::max);
    let tol = tolerance(utilities);
    let eu_sincere = lottery_eu(responder.winners(sincere.ballot(voter)), utilities)?;
    let mut best = eu_sincere;
    if best < top - tol {
        for r in rankings(u.m()) {
            best = best.max(lottery_eu(responder.winners(r), utilities)?);
            if best >= top - tol {
                break;
            }
        }
    }
    Ok((best - eu_sincere) / u.utility_range(voter))
}

/// Identifies the cell an instance belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct InstanceMeta {
    pub method: MethodId,
    pub info: InfoType,
    pub n: usize,
    pub m: usize,
}

/// A training example: features plus a mask of positively labeled ballots.
#[derive(Clone, Debug, PartialEq)]
pub struct LabeledInstance<S> {
    pub features: Vec<S>,
    pub labels: LabelMask,
    pub meta: InstanceMeta,
}

pub fn make_instance<S: Scalar>(
    method: MethodId,
    u: &UtilityProfile<S>,
    manipulator: usize,
    info: InfoType,
    labeling: Labeling,
    opts: FeatureOptions,
) -> Result<LabeledInstance<S>> {
    let sincere = u.induced_profile();
    let responses = Responses::compute_with_profile(method, u, &sincere, manipulator)?;
    let labels = responses.labels(labeling);
    if labels.is_empty() {
        return Err(Error::EmptyMask);
    }
    Ok(LabeledInstance {
        features: features_for_profile(u, &sincere, manipulator, info, method, opts),
        labels,
        meta: InstanceMeta { method, info, n: u.n(), m: u.m() },
    })
}

/// Number of classes (ballots) for `m` candidates.
pub fn num_classes(m: usize) -> usize {
    factorial(m)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elections::fixtures::*;
    use crate::samplers::{ProbModel, RandomStream};

    const TIE4_BORDA: [f64; 6] = [0.75, 1.0, 0.5, 0.5, 0.75, 0.5];

    #[test]
    fn tie4_borda_responses() {
        // exhaustive recount: a>b>c, a>c>b, b>a>c, b>c>a, c>a>b, c>b>a
        let u = tie4_utilities();
        let eus = response_eus(MethodId::Borda, &u, 0).unwrap();
        assert_eq!(eus, TIE4_BORDA.to_vec());
        let r = Responses::compute(MethodId::Borda, &u, 0).unwrap();
        assert_eq!(r.eu_sincere(), 0.75);
        assert_eq!(r.optimizing_labels().ones().collect::<Vec<_>>(), vec![1]);
        assert_eq!(r.satisficing_labels().ones().collect::<Vec<_>>(), vec![1]);
        assert_eq!(r.ideal_choice(), 1);
    }

    #[test]
    fn tie4_profitability() {
        let u = tie4_utilities();
        let acb = Ranking::new(&[0, 2, 1]).unwrap();
        let bac = Ranking::new(&[1, 0, 2]).unwrap();
        assert_eq!(profitability(MethodId::Borda, &u, 0, acb).unwrap(), 0.25);
        assert_eq!(profitability(MethodId::Borda, &u, 0, bac).unwrap(), -0.25);
        assert_eq!(profitability(MethodId::Borda, &u, 0, u.sincere_ranking(0)).unwrap(), 0.0);
        let out = outcome(MethodId::Borda, &u, 0, acb).unwrap();
        assert_eq!(out.winners, WinnerSet::singleton(0));
        assert_eq!((out.eu_submitted, out.eu_sincere), (1.0, 0.75));
    }

    #[test]
    fn non_pivotal_voter_labels_everything() {
        // eight voters unanimous for a>b>c: one ballot cannot move any method
        let u = unanimous_utilities(8);
        for method in MethodId::ALL {
            let r = Responses::compute(method, &u, 0).unwrap();
            assert!(r.eus().iter().all(|&e| e == 1.0), "{method}");
            assert_eq!(r.optimizing_labels().count(), 6);
            assert_eq!(r.satisficing_labels().count(), 6);
        }
    }

    #[test]
    fn satisficing_without_profit_keeps_non_losing_ballots() {
        // a>b>c, b>a>c: plurality tie {a, b}. The manipulator (voter 0, a>b>c)
        // keeps the tie with any ballot topped by a; other ballots lose.
        let u = UtilityProfile::from_rows(&[vec![1.0, 0.5, 0.0], vec![0.5, 1.0, 0.0]]).unwrap();
        let r = Responses::compute(MethodId::Plurality, &u, 0).unwrap();
        let sat = r.satisficing_labels();
        assert!(sat.get(r.sincere_index()));
        assert_eq!(sat.ones().collect::<Vec<_>>(), vec![0, 1]);
        assert_eq!(r.optimizing_labels(), sat);
    }

    #[test]
    fn make_instance_layout() {
        let u = tie4_utilities();
        let inst = make_instance(
            MethodId::Borda,
            &u,
            0,
            InfoType::MajorityMatrix,
            Labeling::Optimizing,
            FeatureOptions::default(),
        )
        .unwrap();
        assert_eq!(inst.features.len(), 12);
        assert_eq!(inst.labels.count(), 1);
        assert_eq!(inst.meta, InstanceMeta { method: MethodId::Borda, info: InfoType::MajorityMatrix, n: 4, m: 3 });
    }

    #[test]
    fn oracle_rejects_large_elections() {
        let mut s = RandomStream::new(0);
        let u: UtilityProfile<f64> = ProbModel::Uniform.sampler(3, 7).unwrap().sample(&mut s);
        assert!(Responses::compute(MethodId::Borda, &u, 0).is_err());
        let u = tie4_utilities();
        assert!(Responses::compute(MethodId::Borda, &u, 4).is_err());
    }

    #[test]
    fn fast_responder_matches_literal_replacement() {
        let mut s = RandomStream::new(21);
        for m in 3..=5 {
            let sampler = ProbModel::Uniform.sampler(6, m).unwrap();
            for _ in 0..40 {
                let u: UtilityProfile<f64> = sampler.sample(&mut s);
                let p = u.induced_profile();
                for method in MethodId::ALL {
                    let fast = response_eus(method, &u, 0).unwrap();
                    for (k, r) in rankings(m).iter().enumerate() {
                        let w = method.winners(&p.replace_ballot(0, *r).unwrap());
                        assert_eq!(fast[k], lottery_eu(w, u.row(0)).unwrap());
                    }
                }
            }
        }
    }

    #[test]
    fn oracle_invariants_on_random_elections() {
        let mut s = RandomStream::new(22);
        for m in 3..=5 {
            let sampler = ProbModel::Uniform.sampler(5, m).unwrap();
            for _ in 0..60 {
                let u: UtilityProfile<f64> = sampler.sample(&mut s);
                for method in MethodId::ALL {
                    let r = Responses::compute(method, &u, 0).unwrap();
                    assert!(r.best_eu() >= r.eu_sincere());
                    assert!(r.profitability(r.ideal_choice()) >= 0.0);
                    assert_eq!(r.profitability(r.sincere_index()), 0.0);
                    let quick = ideal_profitability(method, &u, &u.induced_profile(), 0).unwrap();
                    assert!((quick - r.profitability(r.ideal_choice())).abs() < 1e-12);
                    for k in 0..r.eus().len() {
                        let p = r.profitability(k);
                        assert!((-1.0..=1.0).contains(&p));
                    }
                    let (opt, sat) = (r.optimizing_labels(), r.satisficing_labels());
                    assert!(!opt.is_empty() && !sat.is_empty());
                    if r.best_eu() > r.eu_sincere() {
                        assert!(opt.is_subset(&sat));
                    }
                }
            }
        }
    }

    #[test]
    fn labels_follow_candidate_relabeling() {
        let mut s = RandomStream::new(23);
        let sampler = ProbModel::Uniform.sampler(7, 4).unwrap();
        let perm = [2usize, 0, 3, 1];
        for _ in 0..30 {
            let u: UtilityProfile<f64> = sampler.sample(&mut s);
            let mut moved = vec![0.0; u.values().len()];
            for v in 0..u.n() {
                for c in 0..4 {
                    moved[v * 4 + perm[c]] = u.row(v)[c];
                }
            }
            let w = UtilityProfile::new(4, moved).unwrap();
            for method in MethodId::ALL {
                let a = optimizing_labels(method, &u, 0).unwrap();
                let b = optimizing_labels(method, &w, 0).unwrap();
                let mapped = LabelMask::from_indices(24, a.ones().map(|k| rankings(4)[k].relabel(&perm).index() as usize));
                assert_eq!(mapped, b, "{method}");
            }
        }
    }

    #[test]
    fn label_mask_bytes() {
        let mask = LabelMask::from_indices(6, [0, 5]);
        assert_eq!(mask.to_bytes(), vec![0b0010_0001]);
        assert_eq!(LabelMask::from_bytes(6, &[0b0010_0001]).unwrap(), mask);
        assert!(LabelMask::from_bytes(6, &[0b0100_0000]).is_err());
        let big = LabelMask::from_indices(720, [0, 63, 64, 719]);
        assert_eq!(big.to_bytes().len(), 90);
        assert_eq!(LabelMask::from_bytes(720, &big.to_bytes()).unwrap(), big);
    }

    #[test]
    fn f32_oracle_agrees_with_f64() {
        let u = tie4_utilities();
        let u32_: UtilityProfile<f32> = u.cast().unwrap();
        let r = Responses::compute(MethodId::Borda, &u32_, 0).unwrap();
        assert_eq!(r.optimizing_labels().ones().collect::<Vec<_>>(), vec![1]);
        assert_eq!(r.profitability(1), 0.25f32);
    }
}
