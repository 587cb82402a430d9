use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::{AggregateRow, EpisodeRecord, ReportRow, RunConfig, TimingResult};
use crate::data::SparseDataset;
use crate::error::{Error, Result};

fn num(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".to_string(), |x| x.to_string())
}

/// Per-cell report, preceded by `# key = value` lines echoing the config.
pub fn format_report(cfg: &RunConfig, dataset: &SparseDataset, rows: &[ReportRow]) -> String {
    let mut out = String::new();
    for (k, v) in cfg.entries() {
        writeln!(out, "# {k} = {v}").unwrap();
    }
    out.push_str("method,feature,k,metric,value,n_targets,seed\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.method,
            dataset.feature_ids()[r.feature],
            r.k,
            r.metric,
            num(r.value),
            r.n_targets,
            r.seed
        )
        .unwrap();
    }
    out
}

pub fn format_aggregate(rows: &[AggregateRow]) -> String {
    let mut out = String::from("method,k,metric,mean,std,n_seeds\n");
    for r in rows {
        writeln!(out, "{},{},{},{},{},{}", r.method, r.k, r.metric, num(r.mean), num(r.std), r.n_seeds)
            .unwrap();
    }
    out
}

pub fn format_timing(rows: &[TimingResult]) -> String {
    let mut out = String::from("method,k,mean_ms,std_ms,batch_size,repetitions\n");
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{}",
            r.method, r.k, r.mean_ms, r.std_ms, r.batch_size, r.repetitions
        )
        .unwrap();
    }
    out
}

pub fn format_episodes(dataset: &SparseDataset, rows: &[EpisodeRecord], seed: u64) -> String {
    let mut out = String::new();
    for r in rows {
        writeln!(out, "{seed},{},{},{},{}", r.method, dataset.feature_ids()[r.feature], r.k, r.context_hash)
            .unwrap();
    }
    out
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}
