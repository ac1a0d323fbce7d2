//! Seeded experiment drivers. Each returns its CSV table, per-seed records, a
//! typed summary and the pass/fail checks used by `--check`.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::Serialize;

use crate::drift::DriftSpec;
use crate::error::{Error, Result};

pub mod defect;
pub mod gap;
pub mod kolmogorov;
pub mod moment;
pub mod oscillation;
pub mod paths;

/// Version of the JSONL record layout.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub passed: bool,
    pub detail: String,
}

impl Check {
    pub fn new(name: &str, passed: bool, detail: impl Into<String>) -> Self {
        Check {
            name: name.to_owned(),
            passed,
            detail: detail.into(),
        }
    }
}

/// Flat numeric metrics of one seed.
#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct Record {
    pub seed: u64,
    pub metrics: BTreeMap<String, f64>,
}

impl Record {
    pub fn new(seed: u64) -> Self {
        Record {
            seed,
            metrics: BTreeMap::new(),
        }
    }

    pub fn put(&mut self, key: impl Into<String>, value: f64) {
        self.metrics.insert(key.into(), value);
    }

    pub fn put_opt(&mut self, key: impl Into<String>, value: Option<f64>) {
        if let Some(v) = value {
            self.put(key, v);
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct Table {
    pub header: String,
    pub rows: Vec<String>,
}

impl Table {
    pub fn new(header: impl Into<String>) -> Self {
        Table {
            header: header.into(),
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, fields: &[String]) {
        self.rows.push(fields.join(","));
    }
}

#[derive(Clone, Debug)]
pub struct Outcome<S> {
    pub table: Table,
    pub records: Vec<Record>,
    pub summary: S,
    pub checks: Vec<Check>,
    /// Extra files, relative to the output directory.
    pub blobs: Vec<(String, Vec<u8>)>,
}

impl<S> Outcome<S> {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn map<T>(self, f: impl FnOnce(S) -> T) -> Outcome<T> {
        Outcome {
            table: self.table,
            records: self.records,
            summary: f(self.summary),
            checks: self.checks,
            blobs: self.blobs,
        }
    }
}

/// `base, base + 1, ..., base + count - 1`.
pub fn seed_list(base: u64, count: usize) -> Vec<u64> {
    (0..count as u64).map(|i| base.wrapping_add(i)).collect()
}

/// Runs `f` on every seed in parallel, returning results in seed-list order.
pub fn per_seed<T, F>(seeds: &[u64], f: F) -> Result<Vec<T>>
where
    T: Send,
    F: Fn(u64) -> Result<T> + Sync,
{
    if seeds.is_empty() {
        return Err(Error::invalid("at least one seed is required"));
    }
    seeds.par_iter().map(|&s| f(s)).collect()
}

/// Rejects drifts whose declared exponents fail the standing hypotheses.
pub fn validate_drift(drift: &DriftSpec, delta: Option<f64>) -> Result<()> {
    use crate::drift::DriftKind;
    match drift.kind {
        DriftKind::Holder { .. } | DriftKind::Lipschitz { .. } => drift.validate_with(delta).map(|_| ()),
        _ => Ok(()),
    }
}

pub fn strictly_decreasing(v: &[f64]) -> bool {
    v.windows(2).all(|w| w[1] < w[0])
}

pub(crate) fn spread(v: &[f64]) -> f64 {
    let max = v.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = v.iter().copied().fold(f64::INFINITY, f64::min);
    if max == 0.0 {
        1.0
    } else {
        max / min
    }
}
