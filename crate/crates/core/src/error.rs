use thiserror::Error;

/// Errors raised by the core library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("candidate {candidate} out of range for {m} candidates")]
    InvalidCandidate { candidate: usize, m: usize },
    #[error("voter {voter} out of range for {n} voters")]
    InvalidVoter { voter: usize, n: usize },
    #[error("ranking index {index} out of range for {m} candidates")]
    InvalidRankingIndex { index: u64, m: usize },
    #[error("not a permutation of 0..{m}: {order:?}")]
    NotAPermutation { order: Vec<usize>, m: usize },
    #[error("unsupported candidate count {m} (supported: {min}..={max})")]
    UnsupportedCandidates { m: usize, min: usize, max: usize },
    #[error("profile has no voters")]
    EmptyProfile,
    #[error("ballot over {found} candidates in a profile over {expected}")]
    MismatchedCandidates { expected: usize, found: usize },
    #[error("voter {voter} assigns equal utility to two candidates")]
    DuplicateUtility { voter: usize },
    #[error("utility matrix has {len} entries, not a multiple of {m}")]
    RaggedUtilities { len: usize, m: usize },
    #[error("empty winner set")]
    EmptyWinnerSet,
    #[error("empty label mask")]
    EmptyMask,
    #[error("expected {expected} features, got {found}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("unknown {kind} code {code}")]
    UnknownCode { kind: &'static str, code: u8 },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
