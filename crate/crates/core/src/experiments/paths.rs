use serde::Serialize;

use super::{per_seed, Check, Outcome, Record, Table};
use crate::brownian::DyadicBrownianPath;
use crate::drift::DriftSpec;
use crate::dyadic::DyadicTime;
use crate::error::Result;
use crate::flow::{monotonicity_check, FlowTable, Lattice, StartSet};
use crate::stats;

#[derive(Clone, Debug, Serialize)]
pub struct GenPathParams {
    pub seeds: Vec<u64>,
    pub dim: usize,
    pub horizon: f64,
    pub level: u32,
}

#[derive(Clone, Debug, Serialize)]
pub struct GenPathSummary {
    pub count: usize,
    pub level: u32,
    /// Mean of `Σ |ΔW|² / (T d)` over seeds.
    pub mean_qv_ratio: f64,
}

pub fn gen_path(p: &GenPathParams) -> Result<Outcome<GenPathSummary>> {
    let paths = per_seed(&p.seeds, |s| DyadicBrownianPath::generate(s, p.dim, p.horizon, p.level))?;
    let mut header = String::from("seed,t_num,t_level");
    for c in 0..p.dim {
        header.push_str(&format!(",w{c}"));
    }
    let mut table = Table::new(header);
    let mut records = Vec::new();
    let mut blobs = Vec::new();
    let mut ratios = Vec::new();
    for path in &paths {
        let n = 1u64 << p.level;
        let mut qv = 0.0;
        for k in 0..=n {
            let t = DyadicTime::new(k, p.level);
            let w = path.point(p.level, k);
            let mut row = vec![path.seed().to_string(), t.num().to_string(), t.level().to_string()];
            row.extend(w.iter().map(|v| v.to_string()));
            table.push(&row);
            if k > 0 {
                let prev = path.point(p.level, k - 1);
                qv += w.iter().zip(prev).map(|(a, b)| (a - b) * (a - b)).sum::<f64>();
            }
        }
        let ratio = qv / (p.horizon * p.dim as f64);
        ratios.push(ratio);
        let mut rec = Record::new(path.seed());
        rec.put("qv_ratio", ratio);
        for (c, v) in path.point(p.level, n).iter().enumerate() {
            rec.put(format!("w_T.{c}"), *v);
        }
        records.push(rec);
        let mut bytes = Vec::new();
        path.write_to(&mut bytes)?;
        blobs.push((format!("paths/seed-{}.flbm", path.seed()), bytes));
    }
    let mean_qv_ratio = stats::mean(&ratios);
    let tol = 5.0 * (2.0 / ((1u64 << p.level) as f64 * p.dim as f64 * p.seeds.len() as f64)).sqrt();
    let checks = vec![Check::new(
        "quadratic_variation",
        (mean_qv_ratio - 1.0).abs() <= tol,
        format!("mean Σ|ΔW|²/(T d) = {mean_qv_ratio}, tolerance {tol}"),
    )];
    Ok(Outcome {
        table,
        records,
        summary: GenPathSummary {
            count: p.seeds.len(),
            level: p.level,
            mean_qv_ratio,
        },
        checks,
        blobs,
    })
}

#[derive(Clone, Debug, Serialize)]
pub struct RunFlowParams {
    pub drift: DriftSpec,
    pub seeds: Vec<u64>,
    pub horizon: f64,
    pub m: u32,
    pub n: u32,
    pub half_width: u32,
    pub eta: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunFlowSummary {
    pub max_residual: f64,
    pub entries_per_seed: usize,
    pub monotonicity_violations: Option<usize>,
}

pub fn run_flow(p: &RunFlowParams, config_hash: &str) -> Result<Outcome<RunFlowSummary>> {
    let starts = StartSet::thinned(p.eta)?;
    let lattice = Lattice::new(p.n, p.half_width, p.drift.dim);
    let mut table = Table::new("seed,starts,points,max_residual,monotonicity_violations,worst_order_gap");
    let mut records = Vec::new();
    let mut blobs = Vec::new();
    let mut max_residual: f64 = 0.0;
    let mut violations: Option<usize> = None;
    let mut entries = 0;
    // One table at a time: tables are large and built in parallel internally.
    for &seed in &p.seeds {
        let path = DyadicBrownianPath::generate(seed, p.drift.dim, p.horizon, p.m)?;
        let flow = FlowTable::build(&p.drift, &path, &starts, &lattice, p.m)?;
        let res = flow.max_residual(&path)?;
        let mono = if p.drift.dim == 1 { Some(monotonicity_check(&flow)?) } else { None };
        max_residual = max_residual.max(res);
        entries = flow.entries.len();
        let mut rec = Record::new(seed);
        rec.put("max_residual", res);
        if let Some(m) = &mono {
            *violations.get_or_insert(0) += m.violations;
            rec.put("monotonicity_violations", m.violations as f64);
            rec.put("worst_order_gap", m.worst_gap);
        }
        table.push(&[
            seed.to_string(),
            flow.starts.len().to_string(),
            flow.num_points().to_string(),
            res.to_string(),
            mono.as_ref().map_or(String::new(), |m| m.violations.to_string()),
            mono.as_ref().map_or(String::new(), |m| m.worst_gap.to_string()),
        ]);
        records.push(rec);
        let mut bytes = Vec::new();
        flow.write_csv(&mut bytes, config_hash)?;
        blobs.push((format!("run-flow.seed-{seed}.csv"), bytes));
    }
    let checks = vec![Check::new(
        "residual_zero",
        max_residual == 0.0,
        format!("largest one-step residual {max_residual}"),
    )];
    Ok(Outcome {
        table,
        records,
        summary: RunFlowSummary {
            max_residual,
            entries_per_seed: entries,
            monotonicity_violations: violations,
        },
        checks,
        blobs,
    })
}
