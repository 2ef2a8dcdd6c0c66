use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use ltm_core::evaluation::EvalResult;
use ltm_core::{InfoType, Labeling, MethodId, ProbModel};

use crate::error::{HarnessError, Result};
use crate::fsio::write_atomic;

/// One evaluated policy. Baseline rows leave `info` and `labeling` empty and
/// carry the policy name (`ideal` or `sincere`) in `hidden_config`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ResultRow {
    pub method: MethodId,
    pub model: ProbModel,
    pub n: usize,
    pub m: usize,
    pub info: Option<InfoType>,
    pub labeling: Option<Labeling>,
    pub hidden_config: String,
    pub seed: u64,
    pub mean_profitability: f64,
    pub sem: f64,
    pub samples: u64,
    pub flag: String,
}

pub const CAPPED_FLAG: &str = "capped";

impl ResultRow {
    pub fn from_eval(result: &EvalResult, labeling: Option<Labeling>, hidden_config: String, seed: u64) -> Self {
        ResultRow {
            method: result.method,
            model: result.model,
            n: result.n,
            m: result.m,
            info: result.info,
            labeling,
            hidden_config,
            seed,
            mean_profitability: result.mean_profitability,
            sem: result.sem,
            samples: result.samples,
            flag: if result.capped { CAPPED_FLAG.to_string() } else { String::new() },
        }
    }

    pub fn is_baseline(&self) -> bool {
        self.info.is_none()
    }
}

pub fn write_rows<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    write_atomic(path, |w| {
        let mut out = csv::Writer::from_writer(w);
        for row in rows {
            out.serialize(row)?;
        }
        out.flush()?;
        Ok(())
    })
}

pub fn read_rows(path: &Path) -> Result<Vec<ResultRow>> {
    let mut reader = csv::Reader::from_path(path)?;
    Ok(reader.deserialize().collect::<std::result::Result<_, _>>()?)
}

/// Every `.csv` file below `dir`, sorted by path.
pub fn csv_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut found = Vec::new();
    let mut pending = vec![dir.to_path_buf()];
    while let Some(d) = pending.pop() {
        for entry in fs::read_dir(&d).map_err(HarnessError::at(&d))? {
            let path = entry.map_err(HarnessError::at(&d))?.path();
            if path.is_dir() {
                pending.push(path);
            } else if path.extension().is_some_and(|e| e == "csv") {
                found.push(path);
            }
        }
    }
    found.sort();
    Ok(found)
}
