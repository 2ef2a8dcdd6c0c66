//! Rankings, profiles, utility profiles and pairwise margins.
//!
//! Candidates are dense indices `0..m`. A [`Ranking`] is a strict linear
//! order stored top to bottom; rankings of `m` candidates are numbered
//! `0..m!` in lexicographic permutation order, so index 0 is `0 > 1 > ... > m-1`.

use std::fmt;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Largest candidate count any election in this crate can hold.
pub const MAX_CANDIDATES: usize = 8;

const FACTORIALS: [u64; MAX_CANDIDATES + 1] = [1, 1, 2, 6, 24, 120, 720, 5040, 40320];

/// `m!`, the number of rankings of `m` candidates.
pub fn factorial(m: usize) -> usize {
    FACTORIALS[m] as usize
}

fn check_m(m: usize) -> Result<()> {
    if (1..=MAX_CANDIDATES).contains(&m) {
        Ok(())
    } else {
        Err(Error::UnsupportedCandidates { m, min: 1, max: MAX_CANDIDATES })
    }
}

/// A set of candidates stored as a bitmask.
#[derive(Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct CandidateSet(u32);

/// The nonempty set of winners returned by a voting method.
pub type WinnerSet = CandidateSet;

impl CandidateSet {
    pub const EMPTY: CandidateSet = CandidateSet(0);

    /// All of `0..m`.
    pub fn full(m: usize) -> Self {
        CandidateSet((1u32 << m) - 1)
    }

    pub fn singleton(c: usize) -> Self {
        CandidateSet(1 << c)
    }

    pub fn from_bits(bits: u32) -> Self {
        CandidateSet(bits)
    }

    pub fn bits(self) -> u32 {
        self.0
    }

    pub fn contains(self, c: usize) -> bool {
        self.0 >> c & 1 == 1
    }

    pub fn insert(&mut self, c: usize) {
        self.0 |= 1 << c;
    }

    pub fn remove(&mut self, c: usize) {
        self.0 &= !(1 << c);
    }

    pub fn without(self, c: usize) -> Self {
        CandidateSet(self.0 & !(1 << c))
    }

    pub fn union(self, other: Self) -> Self {
        CandidateSet(self.0 | other.0)
    }

    pub fn is_subset(self, other: Self) -> bool {
        self.0 & !other.0 == 0
    }

    pub fn len(self) -> usize {
        self.0.count_ones() as usize
    }

    pub fn is_empty(self) -> bool {
        self.0 == 0
    }

    /// Members in increasing order.
    pub fn iter(self) -> impl Iterator<Item = usize> {
        let mut bits = self.0;
        std::iter::from_fn(move || {
            if bits == 0 {
                None
            } else {
                let c = bits.trailing_zeros() as usize;
                bits &= bits - 1;
                Some(c)
            }
        })
    }

    pub fn first(self) -> Option<usize> {
        self.iter().next()
    }

    pub fn to_vec(self) -> Vec<usize> {
        self.iter().collect()
    }
}

impl FromIterator<usize> for CandidateSet {
    fn from_iter<I: IntoIterator<Item = usize>>(iter: I) -> Self {
        let mut s = CandidateSet::EMPTY;
        for c in iter {
            s.insert(c);
        }
        s
    }
}

impl fmt::Debug for CandidateSet {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_set().entries(self.iter()).finish()
    }
}

/// A strict linear order of `m` candidates, most preferred first.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct Ranking {
    len: u8,
    order: [u8; MAX_CANDIDATES],
}

impl Ranking {
    /// Builds a ranking from a top-to-bottom order of `0..m`.
    pub fn new(order: &[usize]) -> Result<Self> {
        let m = order.len();
        check_m(m)?;
        let mut seen = 0u32;
        let mut buf = [0u8; MAX_CANDIDATES];
        for (slot, &c) in buf.iter_mut().zip(order) {
            if c >= m || seen >> c & 1 == 1 {
                return Err(Error::NotAPermutation { order: order.to_vec(), m });
            }
            seen |= 1 << c;
            *slot = c as u8;
        }
        Ok(Ranking { len: m as u8, order: buf })
    }

    /// `0 > 1 > ... > m-1`.
    pub fn identity(m: usize) -> Self {
        let mut order = [0u8; MAX_CANDIDATES];
        for (i, slot) in order.iter_mut().enumerate().take(m) {
            *slot = i as u8;
        }
        Ranking { len: m as u8, order }
    }

    /// The ranking at position `index` of the lexicographic enumeration.
    pub fn from_index(m: usize, index: u64) -> Result<Self> {
        check_m(m)?;
        if index >= FACTORIALS[m] {
            return Err(Error::InvalidRankingIndex { index, m });
        }
        let mut pool: Vec<u8> = (0..m as u8).collect();
        let mut order = [0u8; MAX_CANDIDATES];
        let mut rest = index;
        for (i, slot) in order.iter_mut().enumerate().take(m) {
            let f = FACTORIALS[m - 1 - i];
            let digit = (rest / f) as usize;
            rest %= f;
            *slot = pool.remove(digit);
        }
        Ok(Ranking { len: m as u8, order })
    }

    /// Position in the lexicographic enumeration (Lehmer code).
    pub fn index(&self) -> u64 {
        let m = self.m();
        let mut used = 0u32;
        let mut index = 0u64;
        for i in 0..m {
            let c = self.order[i] as u32;
            let smaller_unused = (!used & ((1u32 << c) - 1)).count_ones() as u64;
            index += smaller_unused * FACTORIALS[m - 1 - i];
            used |= 1 << c;
        }
        index
    }

    /// All `m!` rankings in index order.
    pub fn all(m: usize) -> Result<Vec<Ranking>> {
        check_m(m)?;
        (0..FACTORIALS[m]).map(|k| Ranking::from_index(m, k)).collect()
    }

    pub fn m(&self) -> usize {
        self.len as usize
    }

    pub fn top(&self) -> usize {
        self.order[0] as usize
    }

    /// Candidates top to bottom.
    pub fn order(&self) -> impl Iterator<Item = usize> + '_ {
        self.order[..self.m()].iter().map(|&c| c as usize)
    }

    pub fn to_vec(&self) -> Vec<usize> {
        self.order().collect()
    }

    /// Rank position of each candidate (0 = top).
    pub fn positions(&self) -> [u8; MAX_CANDIDATES] {
        let mut pos = [0u8; MAX_CANDIDATES];
        for (p, &c) in self.order[..self.m()].iter().enumerate() {
            pos[c as usize] = p as u8;
        }
        pos
    }

    /// Most preferred candidate of `alive`.
    pub fn top_among(&self, alive: CandidateSet) -> Option<usize> {
        self.order().find(|&c| alive.contains(c))
    }

    pub fn prefers(&self, a: usize, b: usize) -> bool {
        let pos = self.positions();
        pos[a] < pos[b]
    }

    /// Applies a relabeling: candidate `c` becomes `perm[c]`.
    pub fn relabel(&self, perm: &[usize]) -> Ranking {
        let mut order = self.order;
        for slot in order[..self.m()].iter_mut() {
            *slot = perm[*slot as usize] as u8;
        }
        Ranking { len: self.len, order }
    }
}

impl fmt::Debug for Ranking {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.order().map(|c| c.to_string()).collect();
        write!(f, "{}", parts.join(">"))
    }
}

/// One ranking per voter, all over the same `m` candidates.
#[derive(Clone, PartialEq, Eq, Hash, Debug)]
pub struct Profile {
    m: usize,
    ballots: Vec<Ranking>,
}

/// A profile restricted to a subset of candidates, with the map back to
/// the original candidate indices.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Restriction {
    pub profile: Profile,
    /// `original[c]` is the original index of restricted candidate `c`.
    pub original: Vec<usize>,
}

impl Restriction {
    pub fn to_original(&self, winners: WinnerSet) -> WinnerSet {
        winners.iter().map(|c| self.original[c]).collect()
    }
}

impl Profile {
    pub fn new(m: usize, ballots: Vec<Ranking>) -> Result<Self> {
        check_m(m)?;
        if ballots.is_empty() {
            return Err(Error::EmptyProfile);
        }
        if let Some(bad) = ballots.iter().find(|r| r.m() != m) {
            return Err(Error::MismatchedCandidates { expected: m, found: bad.m() });
        }
        Ok(Profile { m, ballots })
    }

    /// Builds a profile from top-to-bottom orders.
    pub fn from_orders(m: usize, orders: &[&[usize]]) -> Result<Self> {
        let ballots = orders.iter().map(|o| Ranking::new(o)).collect::<Result<Vec<_>>>()?;
        Profile::new(m, ballots)
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.ballots.len()
    }

    pub fn ballots(&self) -> &[Ranking] {
        &self.ballots
    }

    pub fn ballot(&self, voter: usize) -> &Ranking {
        &self.ballots[voter]
    }

    fn check_candidate(&self, c: usize) -> Result<()> {
        if c < self.m {
            Ok(())
        } else {
            Err(Error::InvalidCandidate { candidate: c, m: self.m })
        }
    }

    /// Voters ranking `a` above `b` minus voters ranking `b` above `a`.
    pub fn margin(&self, a: usize, b: usize) -> Result<i32> {
        self.check_candidate(a)?;
        self.check_candidate(b)?;
        Ok(self
            .ballots
            .iter()
            .map(|r| {
                if a == b {
                    0
                } else if r.prefers(a, b) {
                    1
                } else {
                    -1
                }
            })
            .sum())
    }

    pub fn margin_matrix(&self) -> MarginMatrix {
        MarginMatrix::from_profile(self)
    }

    pub fn condorcet_winner(&self) -> Option<usize> {
        self.margin_matrix().condorcet_winner()
    }

    /// First-place counts.
    pub fn plurality_scores(&self) -> Vec<u32> {
        let mut scores = vec![0u32; self.m];
        for r in &self.ballots {
            scores[r.top()] += 1;
        }
        scores
    }

    /// Restricts every ballot to the candidates other than `a`, reindexing
    /// the survivors densely in their original order.
    pub fn remove_candidate(&self, a: usize) -> Result<Restriction> {
        self.check_candidate(a)?;
        if self.m == 1 {
            return Err(Error::InvalidArgument("cannot remove the only candidate".into()));
        }
        let original: Vec<usize> = (0..self.m).filter(|&c| c != a).collect();
        let mut new_index = vec![usize::MAX; self.m];
        for (i, &c) in original.iter().enumerate() {
            new_index[c] = i;
        }
        let ballots = self
            .ballots
            .iter()
            .map(|r| {
                let order: Vec<usize> = r.order().filter(|&c| c != a).map(|c| new_index[c]).collect();
                Ranking::new(&order).expect("restriction of a permutation")
            })
            .collect();
        Ok(Restriction { profile: Profile { m: self.m - 1, ballots }, original })
    }

    /// A copy with `voter`'s ballot replaced by `r`.
    pub fn replace_ballot(&self, voter: usize, r: Ranking) -> Result<Profile> {
        if voter >= self.n() {
            return Err(Error::InvalidVoter { voter, n: self.n() });
        }
        if r.m() != self.m {
            return Err(Error::MismatchedCandidates { expected: self.m, found: r.m() });
        }
        let mut out = self.clone();
        out.ballots[voter] = r;
        Ok(out)
    }

    /// In-place variant of [`Profile::replace_ballot`] for hot loops.
    pub fn set_ballot(&mut self, voter: usize, r: Ranking) {
        debug_assert_eq!(r.m(), self.m);
        self.ballots[voter] = r;
    }

    /// Relabels candidates: candidate `c` becomes `perm[c]` in every ballot.
    pub fn relabel(&self, perm: &[usize]) -> Profile {
        Profile { m: self.m, ballots: self.ballots.iter().map(|r| r.relabel(perm)).collect() }
    }
}

/// Skew-symmetric matrix of pairwise margins.
#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct MarginMatrix {
    m: u8,
    n: u32,
    entries: [i32; MAX_CANDIDATES * MAX_CANDIDATES],
}

impl MarginMatrix {
    /// The all-zero matrix of an election with no ballots yet.
    pub fn zero(m: usize) -> Self {
        MarginMatrix { m: m as u8, n: 0, entries: [0; MAX_CANDIDATES * MAX_CANDIDATES] }
    }

    pub fn from_profile(profile: &Profile) -> Self {
        let mut mm = MarginMatrix::zero(profile.m());
        for r in profile.ballots() {
            mm.add_ballot(r);
        }
        mm
    }

    /// Adds one voter's pairwise preferences.
    pub fn add_ballot(&mut self, r: &Ranking) {
        self.shift_ballot(r, 1);
        self.n += 1;
    }

    pub fn remove_ballot(&mut self, r: &Ranking) {
        self.shift_ballot(r, -1);
        self.n -= 1;
    }

    fn shift_ballot(&mut self, r: &Ranking, sign: i32) {
        let m = self.m();
        let order = &r.order[..m];
        for (i, &a) in order.iter().enumerate() {
            for &b in &order[i + 1..] {
                self.entries[a as usize * MAX_CANDIDATES + b as usize] += sign;
                self.entries[b as usize * MAX_CANDIDATES + a as usize] -= sign;
            }
        }
    }

    pub fn m(&self) -> usize {
        self.m as usize
    }

    pub fn n(&self) -> usize {
        self.n as usize
    }

    #[inline]
    pub fn get(&self, a: usize, b: usize) -> i32 {
        self.entries[a * MAX_CANDIDATES + b]
    }

    /// Row-major `m × m` copy.
    pub fn to_rows(&self) -> Vec<Vec<i32>> {
        let m = self.m();
        (0..m).map(|a| (0..m).map(|b| self.get(a, b)).collect()).collect()
    }

    /// Candidate with a positive margin over every other member of `alive`.
    pub fn condorcet_winner_among(&self, alive: CandidateSet) -> Option<usize> {
        alive.iter().find(|&c| alive.iter().all(|x| x == c || self.get(c, x) > 0))
    }

    pub fn condorcet_winner(&self) -> Option<usize> {
        self.condorcet_winner_among(CandidateSet::full(self.m()))
    }
}

impl fmt::Debug for MarginMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("MarginMatrix").field("n", &self.n).field("entries", &self.to_rows()).finish()
    }
}

/// Per-voter utilities over `m` candidates; no voter is indifferent
/// between two candidates.
#[derive(Clone, PartialEq, Debug)]
pub struct UtilityProfile<S> {
    m: usize,
    values: Vec<S>,
}

impl<S: Scalar> UtilityProfile<S> {
    /// `values` is row-major `n × m`.
    pub fn new(m: usize, values: Vec<S>) -> Result<Self> {
        check_m(m)?;
        if values.is_empty() {
            return Err(Error::EmptyProfile);
        }
        if values.len() % m != 0 {
            return Err(Error::RaggedUtilities { len: values.len(), m });
        }
        for (voter, row) in values.chunks(m).enumerate() {
            if !row_is_strict(row) {
                return Err(Error::DuplicateUtility { voter });
            }
        }
        Ok(UtilityProfile { m, values })
    }

    pub fn from_rows(rows: &[Vec<S>]) -> Result<Self> {
        let m = rows.first().map_or(0, Vec::len);
        if rows.iter().any(|r| r.len() != m) {
            return Err(Error::InvalidArgument("rows of unequal length".into()));
        }
        UtilityProfile::new(m, rows.concat())
    }

    pub fn m(&self) -> usize {
        self.m
    }

    pub fn n(&self) -> usize {
        self.values.len() / self.m
    }

    pub fn row(&self, voter: usize) -> &[S] {
        &self.values[voter * self.m..(voter + 1) * self.m]
    }

    pub fn values(&self) -> &[S] {
        &self.values
    }

    /// Each voter ranks candidates by strictly decreasing utility.
    pub fn induced_profile(&self) -> Profile {
        let ballots = self.values.chunks(self.m).map(ranking_of_row).collect();
        Profile { m: self.m, ballots }
    }

    /// The sincere ranking of one voter.
    pub fn sincere_ranking(&self, voter: usize) -> Ranking {
        ranking_of_row(self.row(voter))
    }

    /// Largest minus smallest utility of `voter`.
    pub fn utility_range(&self, voter: usize) -> S {
        let row = self.row(voter);
        let hi = row.iter().copied().fold(S::neg_infinity(), S::max);
        let lo = row.iter().copied().fold(S::infinity(), S::min);
        hi - lo
    }

    /// Converts to another scalar type, failing if rounding creates ties.
    pub fn cast<T: Scalar>(&self) -> Result<UtilityProfile<T>> {
        UtilityProfile::new(self.m, self.values.iter().map(|v| T::of(v.as_f64())).collect())
    }
}

/// True when all entries are pairwise distinct (and not NaN).
pub fn row_is_strict<S: Scalar>(row: &[S]) -> bool {
    row.iter().enumerate().all(|(i, x)| !x.is_nan() && row[i + 1..].iter().all(|y| x != y))
}

fn ranking_of_row<S: Scalar>(row: &[S]) -> Ranking {
    let m = row.len();
    let mut order = [0u8; MAX_CANDIDATES];
    for (i, slot) in order.iter_mut().enumerate().take(m) {
        *slot = i as u8;
    }
    order[..m].sort_by(|&a, &b| row[b as usize].partial_cmp(&row[a as usize]).expect("no NaN utilities"));
    Ranking { len: m as u8, order }
}

/// Small documented profiles used throughout the tests (a = 0, b = 1, c = 2).
pub mod fixtures {
    use super::*;

    /// a>b>c, b>c>a, c>a>b.
    pub fn profile_cycle() -> Profile {
        Profile::from_orders(3, &[&[0, 1, 2], &[1, 2, 0], &[2, 0, 1]]).unwrap()
    }

    /// Two a>b>c, two b>c>a, one c>a>b.
    pub fn profile_5() -> Profile {
        Profile::from_orders(3, &[&[0, 1, 2], &[0, 1, 2], &[1, 2, 0], &[1, 2, 0], &[2, 0, 1]]).unwrap()
    }

    /// Three a>b>c.
    pub fn profile_unan() -> Profile {
        Profile::from_orders(3, &[&[0, 1, 2], &[0, 1, 2], &[0, 1, 2]]).unwrap()
    }

    /// Utilities behind [`profile_tie4`]; voter 0 is the manipulator with
    /// utilities (1.0, 0.5, 0.0).
    pub fn tie4_utilities() -> UtilityProfile<f64> {
        UtilityProfile::from_rows(&[
            vec![1.0, 0.5, 0.0],
            vec![0.9, 0.4, 0.1],
            vec![0.6, 0.8, 0.2],
            vec![0.5, 0.7, 0.3],
        ])
        .unwrap()
    }

    /// a>b>c, a>b>c, b>a>c, b>a>c.
    pub fn profile_tie4() -> Profile {
        tie4_utilities().induced_profile()
    }

    /// a>b>c, a>b>c, b>a>c, c>b>a.
    pub fn profile_irv4() -> Profile {
        Profile::from_orders(3, &[&[0, 1, 2], &[0, 1, 2], &[1, 0, 2], &[2, 1, 0]]).unwrap()
    }

    /// Utilities inducing [`profile_unan`] padded to `n` voters: every voter
    /// ranks a>b>c.
    pub fn unanimous_utilities(n: usize) -> UtilityProfile<f64> {
        let rows: Vec<Vec<f64>> = (0..n).map(|i| vec![1.0, 0.5 - 0.01 * i as f64, 0.0]).collect();
        UtilityProfile::from_rows(&rows).unwrap()
    }
}
