use std::io;
use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum HarnessError {
    #[error(transparent)]
    Core(#[from] ltm_core::Error),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: io::Error },

    #[error("i/o: {0}")]
    Stream(#[from] io::Error),

    #[error("bad magic {found:?}, expected {expected:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    #[error("unsupported format version {found} (supported: {supported})")]
    UnsupportedVersion { found: u16, supported: u16 },

    #[error("corrupt file: {0}")]
    Corrupt(String),

    #[error("config: {0}")]
    Config(String),

    #[error("missing dataset for cell {cell} at {path}")]
    MissingDataset { cell: String, path: PathBuf },

    #[error("missing checkpoint for run {run} at {path}")]
    MissingCheckpoint { run: String, path: PathBuf },

    #[error("no result files under {0}")]
    EmptyResults(PathBuf),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl HarnessError {
    /// Process exit code; every failure class gets its own.
    pub fn code(&self) -> u8 {
        match self {
            HarnessError::Core(_) => 2,
            HarnessError::Io { .. } | HarnessError::Stream(_) => 3,
            HarnessError::BadMagic { .. } => 4,
            HarnessError::UnsupportedVersion { .. } => 5,
            HarnessError::Corrupt(_) => 6,
            HarnessError::Config(_) => 7,
            HarnessError::MissingDataset { .. } => 8,
            HarnessError::MissingCheckpoint { .. } => 9,
            HarnessError::EmptyResults(_) => 10,
            HarnessError::Csv(_) => 11,
            HarnessError::Json(_) => 12,
        }
    }

    pub(crate) fn at(path: impl Into<PathBuf>) -> impl FnOnce(io::Error) -> HarnessError {
        let path = path.into();
        move |source| HarnessError::Io { path, source }
    }
}

pub type Result<T, E = HarnessError> = std::result::Result<T, E>;
