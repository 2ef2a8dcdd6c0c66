//! Slow, literal implementations of every voting method, used only to check
//! the fast ones. They restrict profiles with [`Profile::remove_candidate`],
//! count margins ballot by ballot, and find Split Cycle defeats by
//! enumerating simple cycles.

use crate::elections::{CandidateSet, Profile, WinnerSet};
use crate::voting::MethodId;

pub fn winners(method: MethodId, profile: &Profile) -> WinnerSet {
    match method {
        MethodId::Plurality => plurality(profile),
        MethodId::IrvPut => irv_put(profile),
        MethodId::IrvSimultaneous => irv_simultaneous(profile),
        MethodId::Borda => borda(profile),
        MethodId::Black => black(profile),
        MethodId::Minimax => minimax(profile),
        MethodId::Nanson => nanson(profile),
        MethodId::SplitCycle => split_cycle(profile),
        MethodId::StableVoting => stable_voting(profile),
    }
}

fn margin(p: &Profile, a: usize, b: usize) -> i64 {
    p.ballots().iter().map(|r| if a == b { 0 } else if r.prefers(a, b) { 1 } else { -1 }).sum()
}

fn first_places(p: &Profile) -> Vec<usize> {
    let mut counts = vec![0; p.m()];
    for r in p.ballots() {
        counts[r.order().next().unwrap()] += 1;
    }
    counts
}

fn argmax(scores: &[i64]) -> WinnerSet {
    let best = *scores.iter().max().unwrap();
    (0..scores.len()).filter(|&c| scores[c] == best).collect()
}

fn borda_scores(p: &Profile) -> Vec<i64> {
    let m = p.m();
    let mut scores = vec![0i64; m];
    for r in p.ballots() {
        for (pos, c) in r.order().enumerate() {
            scores[c] += (m - 1 - pos) as i64;
        }
    }
    scores
}

// Keeps only `keep` (original indices), returning the restricted profile and
// the map from new to original indices.
fn restrict(p: &Profile, keep: &[usize]) -> (Profile, Vec<usize>) {
    let mut profile = p.clone();
    let mut original: Vec<usize> = (0..p.m()).collect();
    for c in (0..p.m()).rev() {
        if !keep.contains(&c) {
            let r = profile.remove_candidate(c).unwrap();
            original = r.original.iter().map(|&i| original[i]).collect();
            profile = r.profile;
        }
    }
    (profile, original)
}

pub fn plurality(p: &Profile) -> WinnerSet {
    argmax(&first_places(p).into_iter().map(|c| c as i64).collect::<Vec<_>>())
}

pub fn borda(p: &Profile) -> WinnerSet {
    argmax(&borda_scores(p))
}

pub fn irv_put(p: &Profile) -> WinnerSet {
    if p.m() == 1 {
        return CandidateSet::singleton(0);
    }
    let counts = first_places(p);
    if let Some(c) = (0..p.m()).find(|&c| 2 * counts[c] > p.n()) {
        return CandidateSet::singleton(c);
    }
    let fewest = *counts.iter().min().unwrap();
    let mut out = CandidateSet::EMPTY;
    for b in (0..p.m()).filter(|&b| counts[b] == fewest) {
        let r = p.remove_candidate(b).unwrap();
        out = out.union(r.to_original(irv_put(&r.profile)));
    }
    out
}

pub fn irv_simultaneous(p: &Profile) -> WinnerSet {
    if p.m() == 1 {
        return CandidateSet::singleton(0);
    }
    let counts = first_places(p);
    if let Some(c) = (0..p.m()).find(|&c| 2 * counts[c] > p.n()) {
        return CandidateSet::singleton(c);
    }
    let fewest = *counts.iter().min().unwrap();
    let keep: Vec<usize> = (0..p.m()).filter(|&c| counts[c] != fewest).collect();
    if keep.is_empty() {
        return CandidateSet::full(p.m());
    }
    let (sub, original) = restrict(p, &keep);
    irv_simultaneous(&sub).iter().map(|c| original[c]).collect()
}

fn condorcet_winner(p: &Profile) -> Option<usize> {
    (0..p.m()).find(|&c| (0..p.m()).all(|x| x == c || margin(p, c, x) > 0))
}

pub fn black(p: &Profile) -> WinnerSet {
    match condorcet_winner(p) {
        Some(c) => CandidateSet::singleton(c),
        None => borda(p),
    }
}

/// Minimizes `max { margin(b, a) | b in X }`, with `b = a` included.
pub fn minimax(p: &Profile) -> WinnerSet {
    let scores: Vec<i64> = (0..p.m()).map(|a| -(0..p.m()).map(|b| margin(p, b, a)).max().unwrap()).collect();
    argmax(&scores)
}

pub fn nanson(p: &Profile) -> WinnerSet {
    let scores = borda_scores(p);
    let mean = scores.iter().sum::<i64>() as f64 / p.m() as f64;
    let keep: Vec<usize> = (0..p.m()).filter(|&c| (scores[c] as f64) >= mean).collect();
    if keep.len() == p.m() {
        return CandidateSet::full(p.m());
    }
    let (sub, original) = restrict(p, &keep);
    nanson(&sub).iter().map(|c| original[c]).collect()
}

/// All simple directed cycles of the positive-margin graph, each listed once
/// starting from its smallest vertex.
pub fn simple_cycles(p: &Profile) -> Vec<Vec<usize>> {
    let m = p.m();
    let edge = |a: usize, b: usize| a != b && margin(p, a, b) > 0;
    let mut cycles = Vec::new();
    fn walk(
        start: usize,
        path: &mut Vec<usize>,
        m: usize,
        edge: &dyn Fn(usize, usize) -> bool,
        out: &mut Vec<Vec<usize>>,
    ) {
        let last = *path.last().unwrap();
        for next in start..m {
            if !edge(last, next) {
                continue;
            }
            if next == start {
                out.push(path.clone());
            } else if !path.contains(&next) {
                path.push(next);
                walk(start, path, m, edge, out);
                path.pop();
            }
        }
    }
    for start in 0..m {
        walk(start, &mut vec![start], m, &edge, &mut cycles);
    }
    cycles
}

pub fn split_cycle(p: &Profile) -> WinnerSet {
    let m = p.m();
    let mut deleted = vec![vec![false; m]; m];
    for cycle in simple_cycles(p) {
        let edges: Vec<(usize, usize)> = (0..cycle.len()).map(|i| (cycle[i], cycle[(i + 1) % cycle.len()])).collect();
        let weakest = edges.iter().map(|&(a, b)| margin(p, a, b)).min().unwrap();
        for &(a, b) in &edges {
            if margin(p, a, b) == weakest {
                deleted[a][b] = true;
            }
        }
    }
    (0..m).filter(|&a| (0..m).all(|b| b == a || margin(p, b, a) <= 0 || deleted[b][a])).collect()
}

pub fn stable_voting(p: &Profile) -> WinnerSet {
    if p.m() == 1 {
        return CandidateSet::singleton(0);
    }
    let sc = split_cycle(p);
    if sc.len() == 1 {
        return sc;
    }
    let mut pairs: Vec<(i64, usize, usize)> =
        sc.iter().flat_map(|a| (0..p.m()).filter(move |&b| b != a).map(move |b| (a, b))).map(|(a, b)| (margin(p, a, b), a, b)).collect();
    pairs.sort_by(|x, y| y.0.cmp(&x.0));
    let mut levels: Vec<i64> = pairs.iter().map(|x| x.0).collect();
    levels.dedup();
    for level in levels {
        let found: WinnerSet = pairs
            .iter()
            .filter(|x| x.0 == level)
            .filter(|&&(_, a, b)| {
                let r = p.remove_candidate(b).unwrap();
                r.to_original(stable_voting(&r.profile)).contains(a)
            })
            .map(|x| x.1)
            .collect();
        if !found.is_empty() {
            return found;
        }
    }
    sc
}
