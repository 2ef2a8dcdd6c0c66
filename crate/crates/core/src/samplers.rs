//! Seeded generators of utility profiles.
//!
//! Three probability models are supported: i.i.d. uniform utilities, a
//! two-dimensional spatial model with quadratic-proximity utilities, and a
//! normalized Mallows model around the reference order `0 > 1 > ... > m-1`.

use std::fmt;
use std::str::FromStr;

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::elections::{row_is_strict, Ranking, UtilityProfile, MAX_CANDIDATES};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

pub const DEFAULT_REL_PHI: f64 = 0.8;

/// Stirs a 64-bit value (SplitMix64 finalizer).
pub fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives an independent seed for a labelled purpose.
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    mix64(seed ^ mix64(tag))
}

/// Portable seeded random stream (ChaCha with 8 rounds).
///
/// `RandomStream::derive(seed, k)` selects stream `k` of the generator
/// keyed by `seed`, so per-worker or per-sample streams never overlap.
#[derive(Clone, Debug)]
pub struct RandomStream {
    rng: ChaCha8Rng,
}

impl RandomStream {
    pub fn new(seed: u64) -> Self {
        RandomStream { rng: ChaCha8Rng::seed_from_u64(seed) }
    }

    pub fn derive(seed: u64, k: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(k);
        RandomStream { rng }
    }

    /// Uniform on `[0, 1)`.
    pub fn uniform(&mut self) -> f64 {
        self.rng.random::<f64>()
    }

    pub fn normal(&mut self) -> f64 {
        self.rng.sample(StandardNormal)
    }

    /// Uniform integer in `0..bound`.
    pub fn below(&mut self, bound: usize) -> usize {
        self.rng.random_range(0..bound)
    }
}

impl RngCore for RandomStream {
    fn next_u32(&mut self) -> u32 {
        self.rng.next_u32()
    }

    fn next_u64(&mut self) -> u64 {
        self.rng.next_u64()
    }

    fn fill_bytes(&mut self, dst: &mut [u8]) {
        self.rng.fill_bytes(dst)
    }
}

/// Probability model for utility profiles. Codes: 0 uniform, 1 spatial2d,
/// 2 mallows.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(into = "String", try_from = "String")]
pub enum ProbModel {
    Uniform,
    Spatial2D,
    /// Normalized Mallows with relative dispersion in `(0, 1]`.
    Mallows { rel_phi: f64 },
}

impl ProbModel {
    pub fn mallows() -> Self {
        ProbModel::Mallows { rel_phi: DEFAULT_REL_PHI }
    }

    pub fn code(self) -> u8 {
        match self {
            ProbModel::Uniform => 0,
            ProbModel::Spatial2D => 1,
            ProbModel::Mallows { .. } => 2,
        }
    }

    /// Mallows takes the default dispersion when built from a code.
    pub fn from_code(code: u8) -> Result<Self> {
        match code {
            0 => Ok(ProbModel::Uniform),
            1 => Ok(ProbModel::Spatial2D),
            2 => Ok(ProbModel::mallows()),
            _ => Err(Error::UnknownCode { kind: "model", code }),
        }
    }

    /// Validates parameters and precomputes what sampling needs.
    pub fn sampler(self, n: usize, m: usize) -> Result<Sampler> {
        if n == 0 {
            return Err(Error::EmptyProfile);
        }
        if !(2..=MAX_CANDIDATES).contains(&m) {
            return Err(Error::UnsupportedCandidates { m, min: 2, max: MAX_CANDIDATES });
        }
        let phi = match self {
            ProbModel::Mallows { rel_phi } => mallows_phi(m, rel_phi)?,
            _ => 1.0,
        };
        Ok(Sampler { model: self, n, m, phi })
    }
}

impl fmt::Display for ProbModel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ProbModel::Uniform => f.write_str("uniform"),
            ProbModel::Spatial2D => f.write_str("spatial2d"),
            ProbModel::Mallows { rel_phi } if *rel_phi == DEFAULT_REL_PHI => f.write_str("mallows"),
            ProbModel::Mallows { rel_phi } => write!(f, "mallows:{rel_phi}"),
        }
    }
}

impl FromStr for ProbModel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.trim().to_ascii_lowercase();
        let (name, param) = match key.split_once(':') {
            Some((name, p)) => (name, Some(p)),
            None => (key.as_str(), None),
        };
        let model = match (name, param) {
            ("0" | "uniform", None) => ProbModel::Uniform,
            ("1" | "spatial2d" | "spatial-2d" | "spatial", None) => ProbModel::Spatial2D,
            ("2" | "mallows", None) => ProbModel::mallows(),
            ("2" | "mallows", Some(p)) => {
                let rel_phi = p.parse().map_err(|_| Error::InvalidArgument(format!("bad rel_phi {p:?}")))?;
                check_rel_phi(rel_phi)?;
                ProbModel::Mallows { rel_phi }
            }
            _ => return Err(Error::InvalidArgument(format!("unknown probability model {s:?}"))),
        };
        Ok(model)
    }
}

impl From<ProbModel> for String {
    fn from(m: ProbModel) -> String {
        m.to_string()
    }
}

impl TryFrom<String> for ProbModel {
    type Error = Error;

    fn try_from(s: String) -> Result<Self> {
        s.parse()
    }
}

/// A validated sampler for fixed `(model, n, m)`.
#[derive(Clone, Copy, Debug)]
pub struct Sampler {
    model: ProbModel,
    n: usize,
    m: usize,
    phi: f64,
}

/// A sampled profile plus the number of rows redrawn because of tied
/// utilities.
#[derive(Clone, Debug)]
pub struct Draw<S> {
    pub profile: UtilityProfile<S>,
    pub resampled_rows: usize,
}

impl Sampler {
    pub fn model(&self) -> ProbModel {
        self.model
    }

    /// Mallows dispersion actually used (1 for the other models).
    pub fn phi(&self) -> f64 {
        self.phi
    }

    pub fn sample<S: Scalar>(&self, stream: &mut RandomStream) -> UtilityProfile<S> {
        self.draw(stream).profile
    }

    pub fn draw<S: Scalar>(&self, stream: &mut RandomStream) -> Draw<S> {
        let (n, m) = (self.n, self.m);
        let mut values: Vec<S> = Vec::with_capacity(n * m);
        let mut resampled_rows = 0;
        match self.model {
            ProbModel::Uniform => {
                for _ in 0..n {
                    resampled_rows += push_row(&mut values, m, || uniform_row(stream, m));
                }
            }
            ProbModel::Spatial2D => {
                let cands: Vec<(f64, f64)> = (0..m).map(|_| (stream.normal(), stream.normal())).collect();
                for _ in 0..n {
                    resampled_rows += push_row(&mut values, m, || {
                        let (vx, vy) = (stream.normal(), stream.normal());
                        cands.iter().map(|(cx, cy)| -((vx - cx).powi(2) + (vy - cy).powi(2))).collect()
                    });
                }
            }
            ProbModel::Mallows { .. } => {
                for _ in 0..n {
                    let ranking = mallows_ranking(stream, m, self.phi);
                    resampled_rows += push_row(&mut values, m, || utilities_for_ranking(stream, &ranking));
                }
            }
        }
        let profile = UtilityProfile::new(m, values).expect("rows are strict by construction");
        Draw { profile, resampled_rows }
    }
}

// Appends a row with pairwise-distinct entries, redrawing on ties; returns
// the number of redraws.
fn push_row<S: Scalar>(values: &mut Vec<S>, m: usize, mut draw: impl FnMut() -> Vec<f64>) -> usize {
    let mut redraws = 0;
    loop {
        let row: Vec<S> = draw().into_iter().map(S::of).collect();
        debug_assert_eq!(row.len(), m);
        if row_is_strict(&row) {
            values.extend(row);
            return redraws;
        }
        redraws += 1;
        assert!(redraws < 10_000, "could not draw a tie-free utility row");
    }
}

fn uniform_row(stream: &mut RandomStream, m: usize) -> Vec<f64> {
    (0..m).map(|_| stream.uniform()).collect()
}

/// Draws `m` uniform utilities and hands them out in the order of `ranking`,
/// highest first.
fn utilities_for_ranking(stream: &mut RandomStream, ranking: &Ranking) -> Vec<f64> {
    let mut draws = uniform_row(stream, ranking.m());
    draws.sort_by(|a, b| b.partial_cmp(a).expect("finite"));
    let mut row = vec![0.0; ranking.m()];
    for (u, c) in draws.into_iter().zip(ranking.order()) {
        row[c] = u;
    }
    row
}

/// Mallows ranking around `0 > ... > m-1` by repeated insertion: item `i`
/// lands `d` places above the bottom of the current list with probability
/// proportional to `phi^d`, creating exactly `d` inversions.
pub fn mallows_ranking(stream: &mut RandomStream, m: usize, phi: f64) -> Ranking {
    let mut order: Vec<usize> = Vec::with_capacity(m);
    for i in 0..m {
        let weights: Vec<f64> = (0..=i).map(|d| phi.powi(d as i32)).collect();
        let total: f64 = weights.iter().sum();
        let mut x = stream.uniform() * total;
        let mut d = i;
        for (k, w) in weights.iter().enumerate() {
            if x < *w {
                d = k;
                break;
            }
            x -= w;
        }
        order.insert(i - d, i);
    }
    Ranking::new(&order).expect("insertion builds a permutation")
}

/// Expected Kendall-tau distance to the reference order under Mallows(`phi`).
pub fn expected_swap_distance(m: usize, phi: f64) -> f64 {
    (0..m)
        .map(|i| {
            let (mut num, mut den, mut w) = (0.0, 0.0, 1.0);
            for d in 0..=i {
                num += d as f64 * w;
                den += w;
                w *= phi;
            }
            num / den
        })
        .sum()
}

fn check_rel_phi(rel_phi: f64) -> Result<()> {
    if rel_phi > 0.0 && rel_phi <= 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("rel_phi must lie in (0, 1], got {rel_phi}")))
    }
}

/// Dispersion whose expected swap distance is `rel_phi` times that of the
/// uniform distribution, `m(m-1)/4`.
pub fn mallows_phi(m: usize, rel_phi: f64) -> Result<f64> {
    check_rel_phi(rel_phi)?;
    if rel_phi == 1.0 || m < 2 {
        return Ok(1.0);
    }
    let target = rel_phi * (m * (m - 1)) as f64 / 4.0;
    let (mut lo, mut hi) = (0.0f64, 1.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        let gap = expected_swap_distance(m, mid) - target;
        if gap.abs() < 1e-10 {
            return Ok(mid);
        }
        if gap < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(0.5 * (lo + hi))
}

pub fn sample_uniform<S: Scalar>(n: usize, m: usize, stream: &mut RandomStream) -> Result<UtilityProfile<S>> {
    Ok(ProbModel::Uniform.sampler(n, m)?.sample(stream))
}

pub fn sample_spatial2d<S: Scalar>(n: usize, m: usize, stream: &mut RandomStream) -> Result<UtilityProfile<S>> {
    Ok(ProbModel::Spatial2D.sampler(n, m)?.sample(stream))
}

pub fn sample_mallows<S: Scalar>(
    n: usize,
    m: usize,
    rel_phi: f64,
    stream: &mut RandomStream,
) -> Result<UtilityProfile<S>> {
    Ok(ProbModel::Mallows { rel_phi }.sampler(n, m)?.sample(stream))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::elections::factorial;

    fn inversions(r: &Ranking) -> usize {
        let o = r.to_vec();
        (0..o.len()).flat_map(|i| (i + 1..o.len()).map(move |j| (i, j))).filter(|&(i, j)| o[i] > o[j]).count()
    }

    // Pearson chi-square statistic against a uniform distribution.
    fn chi_square(counts: &[usize]) -> f64 {
        let total: usize = counts.iter().sum();
        let e = total as f64 / counts.len() as f64;
        counts.iter().map(|&c| (c as f64 - e).powi(2) / e).sum()
    }

    #[test]
    fn uniform_support_and_mean() {
        let mut s = RandomStream::new(1);
        let u: UtilityProfile<f64> = sample_uniform(2000, 5, &mut s).unwrap();
        assert!(u.values().iter().all(|&x| (0.0..=1.0).contains(&x)));
        let mean = u.values().iter().sum::<f64>() / u.values().len() as f64;
        assert!((mean - 0.5).abs() < 0.02, "{mean}");
    }

    #[test]
    fn uniform_rankings_are_exchangeable() {
        let mut s = RandomStream::new(2);
        let p = sample_uniform::<f64>(60_000, 3, &mut s).unwrap().induced_profile();
        let mut counts = [0usize; 6];
        for r in p.ballots() {
            counts[r.index() as usize] += 1;
        }
        for c in counts {
            assert!((c as f64 / 60_000.0 - 1.0 / 6.0).abs() < 0.02);
        }
    }

    #[test]
    fn spatial_utilities() {
        let mut s = RandomStream::new(3);
        let big = ProbModel::Spatial2D.sampler(1000, 6).unwrap();
        let mut resampled = 0usize;
        for _ in 0..100 {
            let d: Draw<f64> = big.draw(&mut s);
            assert!(d.profile.values().iter().all(|&x| x <= 0.0));
            resampled += d.resampled_rows;
        }
        assert!((resampled as f64) < 0.001 * 100_000.0);

        // one fresh voter/candidate pair per draw
        let pair = ProbModel::Spatial2D.sampler(1, 2).unwrap();
        let total: f64 = (0..10_000).map(|_| -pair.sample::<f64>(&mut s).row(0)[0]).sum();
        let mean = total / 10_000.0;
        assert!((mean - 4.0).abs() < 0.1, "mean squared distance {mean}");
    }

    #[test]
    fn expected_swap_distance_at_one_is_uniform() {
        // brute force over all permutations of 3
        let all = Ranking::all(3).unwrap();
        let brute = all.iter().map(inversions).sum::<usize>() as f64 / all.len() as f64;
        assert_eq!(brute, 1.5);
        assert!((expected_swap_distance(3, 1.0) - brute).abs() < 1e-12);
        for m in 2..=6 {
            assert!((expected_swap_distance(m, 1.0) - (m * (m - 1)) as f64 / 4.0).abs() < 1e-12);
        }
    }

    #[test]
    fn expected_swap_distance_matches_enumeration() {
        // exact Mallows expectation by weighting every permutation by phi^inv
        for m in 2..=5 {
            for phi in [0.2f64, 0.55, 0.9] {
                let all = Ranking::all(m).unwrap();
                let z: f64 = all.iter().map(|r| phi.powi(inversions(r) as i32)).sum();
                let e: f64 = all.iter().map(|r| inversions(r) as f64 * phi.powi(inversions(r) as i32)).sum::<f64>() / z;
                assert!((expected_swap_distance(m, phi) - e).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn normalized_phi_solves_the_distance_equation() {
        for m in 3..=6 {
            let phi = mallows_phi(m, 0.8).unwrap();
            assert!(phi > 0.0 && phi < 1.0);
            let target = 0.8 * (m * (m - 1)) as f64 / 4.0;
            assert!((expected_swap_distance(m, phi) - target).abs() < 1e-9);
        }
        assert_eq!(mallows_phi(4, 1.0).unwrap(), 1.0);
        assert!(mallows_phi(4, 0.0).is_err());
        assert!(mallows_phi(4, 1.5).is_err());
        assert!(sample_mallows::<f64>(3, 3, -0.1, &mut RandomStream::new(0)).is_err());
    }

    #[test]
    fn mallows_at_phi_one_is_uniform() {
        let mut s = RandomStream::new(4);
        let p = sample_mallows::<f64>(60_000, 3, 1.0, &mut s).unwrap().induced_profile();
        let mut counts = [0usize; 6];
        let mut inv = 0usize;
        for r in p.ballots() {
            counts[r.index() as usize] += 1;
            inv += inversions(r);
        }
        // 5 degrees of freedom, p = 0.01 critical value
        assert!(chi_square(&counts) < 15.086, "{counts:?}");
        assert!((inv as f64 / 60_000.0 - 1.5).abs() < 0.02);
    }

    #[test]
    fn mallows_concentrates_as_rel_phi_vanishes() {
        let mut s = RandomStream::new(5);
        let p = sample_mallows::<f64>(1000, 5, 1e-9, &mut s).unwrap().induced_profile();
        assert!(p.ballots().iter().all(|r| r.index() == 0));
    }

    #[test]
    fn mallows_distribution_matches_enumeration() {
        let m = 3;
        let phi = 0.5f64;
        let all = Ranking::all(m).unwrap();
        let z: f64 = all.iter().map(|r| phi.powi(inversions(r) as i32)).sum();
        let mut s = RandomStream::new(6);
        let draws = 60_000;
        let mut counts = vec![0usize; factorial(m)];
        for _ in 0..draws {
            counts[mallows_ranking(&mut s, m, phi).index() as usize] += 1;
        }
        for r in &all {
            let expect = phi.powi(inversions(r) as i32) / z;
            let got = counts[r.index() as usize] as f64 / draws as f64;
            assert!((got - expect).abs() < 0.01, "{r:?}: {got} vs {expect}");
        }
    }

    #[test]
    fn mallows_utilities_reproduce_ballots() {
        let sampler = ProbModel::mallows().sampler(50, 6).unwrap();
        let mut a = RandomStream::new(7);
        let mut b = RandomStream::new(7);
        for _ in 0..20 {
            let u: UtilityProfile<f64> = sampler.sample(&mut a);
            let p = u.induced_profile();
            // replay the draw to recover the Mallows ballots
            for v in 0..50 {
                let r = mallows_ranking(&mut b, 6, sampler.phi());
                let _ = uniform_row(&mut b, 6);
                assert_eq!(*p.ballot(v), r);
            }
        }
    }

    #[test]
    fn sampling_is_deterministic() {
        for model in [ProbModel::Uniform, ProbModel::Spatial2D, ProbModel::mallows()] {
            let sampler = model.sampler(11, 4).unwrap();
            let x: UtilityProfile<f64> = sampler.sample(&mut RandomStream::derive(99, 3));
            let y: UtilityProfile<f64> = sampler.sample(&mut RandomStream::derive(99, 3));
            let z: UtilityProfile<f64> = sampler.sample(&mut RandomStream::derive(99, 4));
            assert_eq!(x.values(), y.values());
            assert_ne!(x.values(), z.values());
            let f: UtilityProfile<f32> = sampler.sample(&mut RandomStream::derive(99, 3));
            assert_eq!(f.n(), 11);
        }
    }

    #[test]
    fn model_names_and_codes() {
        for model in [ProbModel::Uniform, ProbModel::Spatial2D, ProbModel::mallows()] {
            assert_eq!(model.to_string().parse::<ProbModel>().unwrap(), model);
            assert_eq!(ProbModel::from_code(model.code()).unwrap(), model);
        }
        assert_eq!("mallows:0.5".parse::<ProbModel>().unwrap(), ProbModel::Mallows { rel_phi: 0.5 });
        assert!("mallows:2".parse::<ProbModel>().is_err());
        assert!(ProbModel::Uniform.sampler(0, 3).is_err());
        assert!(ProbModel::Uniform.sampler(3, 1).is_err());
    }
}
