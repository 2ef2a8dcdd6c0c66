//! The preferential voting methods and the even-chance lottery.
//!
//! Methods that only depend on pairwise margins (Borda, Black's, Minimax,
//! Nanson, Split Cycle, Stable Voting) run on a [`MarginMatrix`]; Plurality
//! and both Instant Runoff variants read ballots. Recursive methods work on
//! candidate subsets of the original election, so a restriction `P_{-b}` is
//! the same election with `b` dropped from the alive set.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::elections::{CandidateSet, MarginMatrix, Profile, WinnerSet, MAX_CANDIDATES};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Stable codes 0..=8, used in file formats and on the command line.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
#[repr(u8)]
pub enum MethodId {
    Plurality = 0,
    IrvPut = 1,
    IrvSimultaneous = 2,
    Borda = 3,
    Black = 4,
    Minimax = 5,
    Nanson = 6,
    SplitCycle = 7,
    StableVoting = 8,
}

impl MethodId {
    pub const ALL: [MethodId; 9] = [
        MethodId::Plurality,
        MethodId::IrvPut,
        MethodId::IrvSimultaneous,
        MethodId::Borda,
        MethodId::Black,
        MethodId::Minimax,
        MethodId::Nanson,
        MethodId::SplitCycle,
        MethodId::StableVoting,
    ];

    /// Methods that elect the Condorcet winner whenever there is one.
    pub const CONDORCET: [MethodId; 5] =
        [MethodId::Black, MethodId::Minimax, MethodId::Nanson, MethodId::SplitCycle, MethodId::StableVoting];

    pub fn code(self) -> u8 {
        self as u8
    }

    pub fn from_code(code: u8) -> Result<Self> {
        Self::ALL.get(code as usize).copied().ok_or(Error::UnknownCode { kind: "method", code })
    }

    pub fn name(self) -> &'static str {
        match self {
            MethodId::Plurality => "plurality",
            MethodId::IrvPut => "irv-put",
            MethodId::IrvSimultaneous => "irv-simultaneous",
            MethodId::Borda => "borda",
            MethodId::Black => "black",
            MethodId::Minimax => "minimax",
            MethodId::Nanson => "nanson",
            MethodId::SplitCycle => "split-cycle",
            MethodId::StableVoting => "stable-voting",
        }
    }

    pub fn winners(self, profile: &Profile) -> WinnerSet {
        self.winners_in(&Election::new(profile))
    }

    /// Winners given a precomputed margin matrix for `election`.
    pub fn winners_in(self, e: &Election<'_>) -> WinnerSet {
        let all = CandidateSet::full(e.m());
        match self {
            MethodId::Plurality => plurality_in(e.profile, all),
            MethodId::IrvPut => irv_put_in(e.profile),
            MethodId::IrvSimultaneous => irv_simultaneous_in(e.profile),
            MethodId::Borda => borda_in(&e.margins, all),
            MethodId::Black => black_in(&e.margins),
            MethodId::Minimax => minimax_in(&e.margins, all),
            MethodId::Nanson => nanson_in(&e.margins, all),
            MethodId::SplitCycle => split_cycle_in(&e.margins, all),
            MethodId::StableVoting => stable_voting_in(&e.margins),
        }
    }
}

impl fmt::Display for MethodId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MethodId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase().replace('_', "-");
        if let Ok(code) = key.parse::<u8>() {
            return Self::from_code(code);
        }
        Self::ALL
            .into_iter()
            .find(|m| m.name() == key)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown voting method {s:?}")))
    }
}

impl From<MethodId> for String {
    fn from(m: MethodId) -> String {
        m.name().to_string()
    }
}

impl TryFrom<String> for MethodId {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// A profile together with its margin matrix.
#[derive(Clone, Copy, Debug)]
pub struct Election<'a> {
    profile: &'a Profile,
    margins: MarginMatrix,
}

impl<'a> Election<'a> {
    pub fn new(profile: &'a Profile) -> Self {
        Election { profile, margins: profile.margin_matrix() }
    }

    /// `margins` must be the margin matrix of `profile`.
    pub fn with_margins(profile: &'a Profile, margins: MarginMatrix) -> Self {
        Election { profile, margins }
    }

    pub fn m(&self) -> usize {
        self.profile.m()
    }

    pub fn profile(&self) -> &Profile {
        self.profile
    }

    pub fn margins(&self) -> &MarginMatrix {
        &self.margins
    }
}

fn argmax_set(alive: CandidateSet, mut score: impl FnMut(usize) -> i64) -> WinnerSet {
    let mut best = i64::MIN;
    let mut set = CandidateSet::EMPTY;
    for c in alive.iter() {
        let s = score(c);
        if s > best {
            best = s;
            set = CandidateSet::singleton(c);
        } else if s == best {
            set.insert(c);
        }
    }
    set
}

fn first_place_counts(profile: &Profile, alive: CandidateSet) -> [u32; MAX_CANDIDATES] {
    let mut counts = [0u32; MAX_CANDIDATES];
    for r in profile.ballots() {
        if let Some(top) = r.top_among(alive) {
            counts[top] += 1;
        }
    }
    counts
}

/// Candidates with the most first-place votes.
pub fn plurality(profile: &Profile) -> WinnerSet {
    plurality_in(profile, CandidateSet::full(profile.m()))
}

fn plurality_in(profile: &Profile, alive: CandidateSet) -> WinnerSet {
    let counts = first_place_counts(profile, alive);
    argmax_set(alive, |c| counts[c] as i64)
}

/// Borda scores: `m - 1 - position` points from every ballot.
pub fn borda_scores(profile: &Profile) -> Vec<u32> {
    let m = profile.m();
    let mut scores = vec![0u32; m];
    for r in profile.ballots() {
        for (pos, c) in r.order().enumerate() {
            scores[c] += (m - 1 - pos) as u32;
        }
    }
    scores
}

pub fn borda(profile: &Profile) -> WinnerSet {
    borda_in(&profile.margin_matrix(), CandidateSet::full(profile.m()))
}

// Twice the Borda score restricted to `alive`: n + margin(a, b) counts the
// voters ranking a over b twice.
fn double_borda(mm: &MarginMatrix, alive: CandidateSet, a: usize) -> i64 {
    let n = mm.n() as i64;
    alive.iter().filter(|&b| b != a).map(|b| n + mm.get(a, b) as i64).sum()
}

fn borda_in(mm: &MarginMatrix, alive: CandidateSet) -> WinnerSet {
    argmax_set(alive, |c| double_borda(mm, alive, c))
}

/// Instant Runoff with parallel-universe tiebreaking.
pub fn irv_put(profile: &Profile) -> WinnerSet {
    irv_put_in(profile)
}

fn irv_put_in(profile: &Profile) -> WinnerSet {
    // memo[alive] holds the winner bits of the sub-election; 0 = not computed
    let mut memo = [0u32; 1 << MAX_CANDIDATES];
    irv_put_rec(profile, CandidateSet::full(profile.m()), &mut memo)
}

fn irv_put_rec(profile: &Profile, alive: CandidateSet, memo: &mut [u32]) -> WinnerSet {
    if alive.len() == 1 {
        return alive;
    }
    let cached = memo[alive.bits() as usize];
    if cached != 0 {
        return CandidateSet::from_bits(cached);
    }
    let counts = first_place_counts(profile, alive);
    let n = profile.n() as u32;
    let result = match alive.iter().find(|&c| 2 * counts[c] > n) {
        Some(c) => CandidateSet::singleton(c),
        None => {
            let fewest = alive.iter().map(|c| counts[c]).min().expect("nonempty");
            alive
                .iter()
                .filter(|&b| counts[b] == fewest)
                .fold(CandidateSet::EMPTY, |acc, b| acc.union(irv_put_rec(profile, alive.without(b), memo)))
        }
    };
    memo[alive.bits() as usize] = result.bits();
    result
}

/// Instant Runoff eliminating every candidate with the fewest first-place
/// votes at once; if all remaining candidates tie, they all win.
pub fn irv_simultaneous(profile: &Profile) -> WinnerSet {
    irv_simultaneous_in(profile)
}

fn irv_simultaneous_in(profile: &Profile) -> WinnerSet {
    let n = profile.n() as u32;
    let mut alive = CandidateSet::full(profile.m());
    loop {
        if alive.len() == 1 {
            return alive;
        }
        let counts = first_place_counts(profile, alive);
        if let Some(c) = alive.iter().find(|&c| 2 * counts[c] > n) {
            return CandidateSet::singleton(c);
        }
        let fewest = alive.iter().map(|c| counts[c]).min().expect("nonempty");
        let survivors: CandidateSet = alive.iter().filter(|&c| counts[c] != fewest).collect();
        if survivors.is_empty() {
            return alive;
        }
        alive = survivors;
    }
}

/// Condorcet winner if there is one, otherwise the Borda winners.
pub fn black(profile: &Profile) -> WinnerSet {
    black_in(&profile.margin_matrix())
}

fn black_in(mm: &MarginMatrix) -> WinnerSet {
    match mm.condorcet_winner() {
        Some(c) => CandidateSet::singleton(c),
        None => borda_in(mm, CandidateSet::full(mm.m())),
    }
}

/// Candidates minimizing their largest losing margin.
pub fn minimax(profile: &Profile) -> WinnerSet {
    minimax_in(&profile.margin_matrix(), CandidateSet::full(profile.m()))
}

fn minimax_in(mm: &MarginMatrix, alive: CandidateSet) -> WinnerSet {
    argmax_set(alive, |a| {
        let worst = alive.iter().filter(|&b| b != a).map(|b| mm.get(b, a)).max().unwrap_or(0);
        -(worst as i64)
    })
}

/// Strict Nanson: repeatedly drop every candidate whose Borda score is
/// strictly below the average.
pub fn nanson(profile: &Profile) -> WinnerSet {
    nanson_in(&profile.margin_matrix(), CandidateSet::full(profile.m()))
}

fn nanson_in(mm: &MarginMatrix, mut alive: CandidateSet) -> WinnerSet {
    loop {
        let k = alive.len() as i64;
        let mut scores = [0i64; MAX_CANDIDATES];
        let mut total = 0;
        for c in alive.iter() {
            scores[c] = double_borda(mm, alive, c);
            total += scores[c];
        }
        let below: CandidateSet = alive.iter().filter(|&c| scores[c] * k < total).collect();
        if below.is_empty() {
            return alive;
        }
        alive = CandidateSet::from_bits(alive.bits() & !below.bits());
    }
}

/// Split Cycle winners.
///
/// An edge `b -> a` of weight `w` is a minimal edge of some simple cycle
/// exactly when `a` reaches `b` through edges of weight at least `w`, i.e.
/// when the widest-path strength from `a` to `b` is `>= w`.
pub fn split_cycle(profile: &Profile) -> WinnerSet {
    split_cycle_in(&profile.margin_matrix(), CandidateSet::full(profile.m()))
}

fn split_cycle_in(mm: &MarginMatrix, alive: CandidateSet) -> WinnerSet {
    const N: usize = MAX_CANDIDATES;
    let mut strength = [[0i32; N]; N];
    for a in alive.iter() {
        for b in alive.iter() {
            strength[a][b] = mm.get(a, b).max(0);
        }
    }
    for k in alive.iter() {
        for i in alive.iter() {
            let ik = strength[i][k];
            if ik == 0 {
                continue;
            }
            for j in alive.iter() {
                let through = ik.min(strength[k][j]);
                if through > strength[i][j] {
                    strength[i][j] = through;
                }
            }
        }
    }
    alive
        .iter()
        .filter(|&a| {
            alive.iter().all(|b| {
                let w = mm.get(b, a);
                w <= 0 || strength[a][b] >= w
            })
        })
        .collect()
}

/// Stable Voting winners.
pub fn stable_voting(profile: &Profile) -> WinnerSet {
    stable_voting_in(&profile.margin_matrix())
}

fn stable_voting_in(mm: &MarginMatrix) -> WinnerSet {
    let mut memo = [0u32; 1 << MAX_CANDIDATES];
    stable_voting_rec(mm, CandidateSet::full(mm.m()), &mut memo)
}

fn stable_voting_rec(mm: &MarginMatrix, alive: CandidateSet, memo: &mut [u32]) -> WinnerSet {
    if alive.len() == 1 {
        return alive;
    }
    let cached = memo[alive.bits() as usize];
    if cached != 0 {
        return CandidateSet::from_bits(cached);
    }
    let sc = split_cycle_in(mm, alive);
    let result = if sc.len() == 1 {
        sc
    } else {
        let mut pairs: Vec<(i32, usize, usize)> = sc
            .iter()
            .flat_map(|a| alive.iter().filter(move |&b| b != a).map(move |b| (mm.get(a, b), a, b)))
            .collect();
        pairs.sort_unstable_by(|x, y| y.0.cmp(&x.0));
        let mut found = CandidateSet::EMPTY;
        for level in pairs.chunk_by(|x, y| x.0 == y.0) {
            for &(_, a, b) in level {
                if !found.contains(a) && stable_voting_rec(mm, alive.without(b), memo).contains(a) {
                    found.insert(a);
                }
            }
            if !found.is_empty() {
                break;
            }
        }
        debug_assert!(!found.is_empty(), "stable voting found no winner");
        if found.is_empty() {
            sc
        } else {
            found
        }
    };
    memo[alive.bits() as usize] = result.bits();
    result
}

/// Expected utility of an even-chance lottery over `winners`.
pub fn lottery_eu<S: Scalar>(winners: WinnerSet, utilities: &[S]) -> Result<S> {
    if winners.is_empty() {
        return Err(Error::EmptyWinnerSet);
    }
    let total: S = winners.iter().map(|c| utilities[c]).sum();
    Ok(total / S::of(winners.len() as f64))
}
