//! Merges JSONL records into quantile tables keyed by experiment and metric.

use std::collections::{BTreeMap, BTreeSet};
use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use super::CliError;
use crate::experiments::SCHEMA_VERSION;
use crate::stats;

#[derive(Debug, Deserialize)]
struct Line {
    schema: u32,
    experiment: String,
    config_hash: String,
    seed: u64,
    metrics: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MetricStats {
    pub count: usize,
    pub min: f64,
    pub p10: f64,
    pub p50: f64,
    pub p90: f64,
    pub max: f64,
    pub mean: f64,
}

impl MetricStats {
    fn of(values: &[f64]) -> Self {
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        MetricStats {
            count: v.len(),
            min: v[0],
            p10: stats::quantile_sorted(&v, 0.1),
            p50: stats::quantile_sorted(&v, 0.5),
            p90: stats::quantile_sorted(&v, 0.9),
            max: v[v.len() - 1],
            mean: stats::mean(&v),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentSection {
    pub records: usize,
    pub distinct_seeds: usize,
    pub config_hashes: BTreeSet<String>,
    pub metrics: BTreeMap<String, MetricStats>,
}

#[derive(Clone, Debug, Serialize)]
pub struct SummaryReport {
    pub schema: u32,
    pub files: Vec<String>,
    pub experiments: BTreeMap<String, ExperimentSection>,
}

/// Expands patterns to a sorted, de-duplicated file list.
fn expand(patterns: &[String]) -> Result<Vec<PathBuf>, CliError> {
    let mut files = BTreeSet::new();
    for p in patterns {
        let matches = glob::glob(p).map_err(|e| CliError::Usage(format!("bad pattern {p:?}: {e}")))?;
        let mut any = false;
        for m in matches {
            let path = m.map_err(|e| CliError::Usage(e.to_string()))?;
            if path.is_file() {
                files.insert(path);
                any = true;
            }
        }
        if !any {
            return Err(CliError::Usage(format!("no record files match {p:?}")));
        }
    }
    Ok(files.into_iter().collect())
}

pub fn summarize_files(files: &[PathBuf]) -> Result<SummaryReport, CliError> {
    #[derive(Default)]
    struct Acc {
        records: usize,
        seeds: BTreeSet<u64>,
        hashes: BTreeSet<String>,
        metrics: BTreeMap<String, Vec<f64>>,
    }
    let mut acc: BTreeMap<String, Acc> = BTreeMap::new();
    for f in files {
        let text = std::fs::read_to_string(f)?;
        for (i, raw) in text.lines().enumerate() {
            if raw.trim().is_empty() {
                continue;
            }
            let where_ = || format!("{}:{}", f.display(), i + 1);
            let v: Value = serde_json::from_str(raw)
                .map_err(|e| CliError::Usage(format!("{}: invalid JSON: {e}", where_())))?;
            match v.get("schema").and_then(Value::as_u64) {
                Some(s) if s == u64::from(SCHEMA_VERSION) => {}
                other => {
                    return Err(CliError::Schema(format!(
                        "{}: record schema {other:?}, expected {SCHEMA_VERSION}",
                        where_()
                    )))
                }
            }
            let line: Line =
                serde_json::from_value(v).map_err(|e| CliError::Usage(format!("{}: {e}", where_())))?;
            debug_assert_eq!(line.schema, SCHEMA_VERSION);
            let a = acc.entry(line.experiment).or_default();
            a.records += 1;
            a.seeds.insert(line.seed);
            a.hashes.insert(line.config_hash);
            for (k, x) in line.metrics {
                a.metrics.entry(k).or_default().push(x);
            }
        }
    }
    if acc.is_empty() {
        return Err(CliError::Usage("no records found".into()));
    }
    let experiments = acc
        .into_iter()
        .map(|(name, a)| {
            let section = ExperimentSection {
                records: a.records,
                distinct_seeds: a.seeds.len(),
                config_hashes: a.hashes,
                metrics: a.metrics.iter().map(|(k, v)| (k.clone(), MetricStats::of(v))).collect(),
            };
            (name, section)
        })
        .collect();
    Ok(SummaryReport {
        schema: SCHEMA_VERSION,
        files: files.iter().map(|p| p.display().to_string()).collect(),
        experiments,
    })
}

pub fn summarize(patterns: &[String]) -> Result<Value, CliError> {
    let report = summarize_files(&expand(patterns)?)?;
    serde_json::to_value(report).map_err(|e| CliError::Run(crate::Error::Format(e.to_string())))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stats_of_one_value() {
        let s = MetricStats::of(&[2.5]);
        assert_eq!((s.count, s.min, s.p10, s.p50, s.p90, s.max, s.mean), (1, 2.5, 2.5, 2.5, 2.5, 2.5, 2.5));
        let s = MetricStats::of(&[3.0, 1.0, 2.0]);
        assert_eq!((s.min, s.p50, s.max, s.mean), (1.0, 2.0, 3.0, 2.0));
    }
}
