use serde::Serialize;

use super::{per_seed, Check, Outcome, Record, Table};
use crate::brownian::DyadicBrownianPath;
use crate::drift::DriftSpec;
use crate::error::{Error, Result};
use crate::stats;
use crate::uniqueness::{gap_series, GapSeries};

#[derive(Clone, Debug, Serialize)]
pub struct GapParams {
    pub drift: DriftSpec,
    pub seeds: Vec<u64>,
    pub horizon: f64,
    pub x: Vec<f64>,
    pub m_min: u32,
    pub m_max: u32,
    pub m_fine: u32,
}

#[derive(Clone, Debug, Serialize)]
pub struct GapLevelSummary {
    pub m: u32,
    pub median_sup_gap: f64,
    pub max_sup_gap: f64,
    pub max_terminal_gap: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct GapSummary {
    pub median_theta: Option<f64>,
    /// Fraction of seeds whose sup gap at `m_max` is below the one at `m_min`.
    pub improved_fraction: f64,
    pub levels: Vec<GapLevelSummary>,
}

pub fn run(p: &GapParams) -> Result<Outcome<GapSummary>> {
    if p.m_min >= p.m_max {
        return Err(Error::invalid("need m_min < m_max"));
    }
    let runs: Vec<GapSeries> = per_seed(&p.seeds, |seed| {
        let path = DyadicBrownianPath::generate(seed, p.drift.dim, p.horizon, p.m_fine)?;
        gap_series(&p.drift, &path, &p.x, p.m_min..=p.m_max, p.m_fine)
    })?;
    let mut table = Table::new("seed,m,m_fine,sup_gap,terminal_gap");
    let mut records = Vec::new();
    for run in &runs {
        let mut rec = Record::new(run.seed);
        for l in &run.levels {
            table.push(&[
                run.seed.to_string(),
                l.m.to_string(),
                run.m_fine.to_string(),
                l.sup_gap.to_string(),
                l.terminal_gap.to_string(),
            ]);
            rec.put(format!("sup_gap.m={}", l.m), l.sup_gap);
            rec.put(format!("terminal_gap.m={}", l.m), l.terminal_gap);
        }
        rec.put_opt("fitted_theta", run.fitted_theta);
        records.push(rec);
    }
    let levels: Vec<GapLevelSummary> = (0..runs[0].levels.len())
        .map(|i| {
            let sup: Vec<f64> = runs.iter().map(|r| r.levels[i].sup_gap).collect();
            GapLevelSummary {
                m: runs[0].levels[i].m,
                median_sup_gap: stats::median(&sup),
                max_sup_gap: sup.iter().copied().fold(0.0, f64::max),
                max_terminal_gap: runs.iter().map(|r| r.levels[i].terminal_gap).fold(0.0, f64::max),
            }
        })
        .collect();
    let thetas: Vec<f64> = runs.iter().filter_map(|r| r.fitted_theta).collect();
    let median_theta = (!thetas.is_empty()).then(|| stats::median(&thetas));
    let improved = runs
        .iter()
        .filter(|r| {
            let first = r.levels.first().map(|l| l.sup_gap);
            let last = r.levels.last().map(|l| l.sup_gap);
            matches!((first, last), (Some(a), Some(b)) if b < a)
        })
        .count();
    let improved_fraction = improved as f64 / runs.len() as f64;
    let checks = vec![
        Check::new(
            "median_theta",
            median_theta.is_some_and(|t| t > 0.3),
            format!("median fitted θ {median_theta:?}, need > 0.3"),
        ),
        Check::new(
            "gap_shrinks",
            improved_fraction >= 0.95,
            format!("{improved_fraction} of seeds have a smaller gap at m = {} than at m = {}", p.m_max, p.m_min),
        ),
    ];
    Ok(Outcome {
        table,
        records,
        summary: GapSummary {
            median_theta,
            improved_fraction,
            levels,
        },
        checks,
        blobs: Vec::new(),
    })
}
