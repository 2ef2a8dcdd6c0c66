//! Aggregates result rows into plot-ready summary tables.

use std::path::{Path, PathBuf};

use serde::Serialize;

use ltm_core::neural::{HiddenLayers, NetConfig};
use ltm_core::oracle::num_classes;
use ltm_core::{InfoType, Labeling, MethodId, ProbModel};

use crate::error::{HarnessError, Result};
use crate::results::{csv_files, read_rows, write_rows, ResultRow};

/// Ideal means below this leave the ratio undefined.
pub const RATIO_THRESHOLD: f64 = 1e-6;
/// Written in place of an undefined ratio.
pub const RATIO_SENTINEL: &str = "NA";

/// Best network mean over ideal mean, if the ideal mean is large enough.
pub fn ratio(net_mean: f64, ideal_mean: f64) -> Option<f64> {
    (ideal_mean >= RATIO_THRESHOLD).then(|| net_mean / ideal_mean)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SummaryRow {
    pub method: MethodId,
    pub model: ProbModel,
    pub n: usize,
    pub m: usize,
    pub info: InfoType,
    pub labeling: Option<Labeling>,
    pub seed: u64,
    pub best_hidden_config: String,
    pub best_mean_profitability: f64,
    pub best_sem: f64,
    pub ideal_mean_profitability: Option<f64>,
    pub ratio: String,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct SizeRow {
    pub method: MethodId,
    pub model: ProbModel,
    pub n: usize,
    pub m: usize,
    pub info: InfoType,
    pub labeling: Option<Labeling>,
    pub seed: u64,
    pub hidden_config: String,
    pub parameters: usize,
    pub mean_profitability: f64,
    pub sem: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Report {
    pub summary: Vec<SummaryRow>,
    pub sizes: Vec<SizeRow>,
    pub baselines: Vec<ResultRow>,
}

/// Builds the report tables from result rows.
pub fn summarize(rows: &[ResultRow]) -> Report {
    let (baselines, nets): (Vec<ResultRow>, Vec<ResultRow>) = rows.iter().cloned().partition(ResultRow::is_baseline);
    let mut summary: Vec<SummaryRow> = Vec::new();
    let mut sizes = Vec::new();
    for row in &nets {
        let info = row.info.expect("network rows carry an info type");
        let parameters = row
            .hidden_config
            .parse::<HiddenLayers>()
            .map(|h| NetConfig { hidden: h, ..NetConfig::new(info.feature_len(row.m), &[], num_classes(row.m), 0) }.param_count())
            .unwrap_or(0);
        sizes.push(SizeRow {
            method: row.method,
            model: row.model,
            n: row.n,
            m: row.m,
            info,
            labeling: row.labeling,
            seed: row.seed,
            hidden_config: row.hidden_config.clone(),
            parameters,
            mean_profitability: row.mean_profitability,
            sem: row.sem,
        });

        let existing = summary.iter_mut().find(|s| {
            (s.method, s.model, s.n, s.m, s.info, s.labeling, s.seed) == (row.method, row.model, row.n, row.m, info, row.labeling, row.seed)
        });
        match existing {
            Some(s) if s.best_mean_profitability >= row.mean_profitability => {}
            Some(s) => {
                s.best_hidden_config = row.hidden_config.clone();
                s.best_mean_profitability = row.mean_profitability;
                s.best_sem = row.sem;
            }
            None => summary.push(SummaryRow {
                method: row.method,
                model: row.model,
                n: row.n,
                m: row.m,
                info,
                labeling: row.labeling,
                seed: row.seed,
                best_hidden_config: row.hidden_config.clone(),
                best_mean_profitability: row.mean_profitability,
                best_sem: row.sem,
                ideal_mean_profitability: None,
                ratio: RATIO_SENTINEL.to_string(),
            }),
        }
    }
    for s in &mut summary {
        let ideal = baselines.iter().find(|b| {
            b.hidden_config == "ideal" && (b.method, b.model, b.n, b.m, b.seed) == (s.method, s.model, s.n, s.m, s.seed)
        });
        s.ideal_mean_profitability = ideal.map(|b| b.mean_profitability);
        s.ratio = ideal
            .and_then(|b| ratio(s.best_mean_profitability, b.mean_profitability))
            .map_or_else(|| RATIO_SENTINEL.to_string(), |r| r.to_string());
    }
    Report { summary, sizes, baselines }
}

/// Reads every result file under `results_dir`, writes `summary.csv`,
/// `sizes.csv` and `baselines.csv` into `out_dir`, and returns the tables.
pub fn report(results_dir: &Path, out_dir: &Path) -> Result<(Report, Vec<PathBuf>)> {
    let files = if results_dir.is_dir() { csv_files(results_dir)? } else { Vec::new() };
    let mut rows = Vec::new();
    for file in &files {
        rows.extend(read_rows(file)?);
    }
    if rows.is_empty() {
        return Err(HarnessError::EmptyResults(results_dir.to_path_buf()));
    }
    let report = summarize(&rows);
    let written = vec![out_dir.join("summary.csv"), out_dir.join("sizes.csv"), out_dir.join("baselines.csv")];
    write_rows(&written[0], &report.summary)?;
    write_rows(&written[1], &report.sizes)?;
    write_rows(&written[2], &report.baselines)?;
    Ok((report, written))
}
