use serde::Serialize;

use super::{per_seed, spread, strictly_decreasing, Check, Outcome, Record, Table};
use crate::brownian::DyadicBrownianPath;
use crate::drift::DriftSpec;
use crate::dyadic::DyadicTime;
use crate::error::{Error, Result};
use crate::uniqueness::{oscillation, zeta_proxy, OscillationReport, ZetaFit};

#[derive(Clone, Debug, Serialize)]
pub struct OscillationParams {
    pub drift: DriftSpec,
    pub seeds: Vec<u64>,
    pub horizon: f64,
    pub r: DyadicTime,
    /// Interval lengths `l = 2^{-j}` for `j ∈ l_min..=l_max`.
    pub l_min: u32,
    pub l_max: u32,
    pub pairs: usize,
    /// Solver cells per interval: `2^extra`.
    pub extra: u32,
    pub bound: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct OscillationLevel {
    pub j: u32,
    pub l: f64,
    pub p50: f64,
    pub p90: f64,
    pub p99: f64,
    pub max: f64,
    /// `p99 / l^{4/3}`.
    pub p99_ratio: f64,
    pub exceedance_rate: f64,
    pub union_bound: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct OscillationSummary {
    /// `C` fitted as the p99 ratio at the largest `l`.
    pub fitted_c: f64,
    pub levels: Vec<OscillationLevel>,
    pub ratio_spread: f64,
    pub zeta_proxy: Option<ZetaFit>,
}

pub fn run(p: &OscillationParams) -> Result<Outcome<OscillationSummary>> {
    if p.l_min > p.l_max || p.l_min == 0 {
        return Err(Error::invalid("need 1 <= l_min <= l_max"));
    }
    let js: Vec<u32> = (p.l_min..=p.l_max).collect();
    let mut reports = Vec::with_capacity(js.len());
    for &j in &js {
        let u = p
            .r
            .checked_add(DyadicTime::new(1, j))
            .filter(|u| *u <= DyadicTime::ONE)
            .ok_or_else(|| Error::invalid(format!("r + 2^-{j} lies beyond the horizon")))?;
        let per = per_seed(&p.seeds, |seed| {
            let path = DyadicBrownianPath::generate_window(seed, p.drift.dim, p.horizon, j + p.extra, p.r, u)?;
            oscillation(&p.drift, &path, p.r, u, p.pairs, p.bound)
        })?;
        reports.push(OscillationReport::merge(&per)?);
    }
    let c = reports[0].p99 / reports[0].l.powf(4.0 / 3.0);
    let levels: Vec<OscillationLevel> = js
        .iter()
        .zip(&reports)
        .map(|(&j, r)| OscillationLevel {
            j,
            l: r.l,
            p50: r.p50,
            p90: r.p90,
            p99: r.p99,
            max: r.max,
            p99_ratio: r.p99 / r.l.powf(4.0 / 3.0),
            exceedance_rate: r.exceedance_rate(c),
            union_bound: r.union_bound(c),
        })
        .collect();
    let mut table = Table::new("j,l,seed,seed_max,exceeds_c");
    let mut records: Vec<Record> = p.seeds.iter().map(|&s| Record::new(s)).collect();
    for (lvl, rep) in levels.iter().zip(&reports) {
        let level = c * rep.l.powf(4.0 / 3.0);
        for (rec, m) in records.iter_mut().zip(&rep.seed_maxima) {
            table.push(&[
                lvl.j.to_string(),
                lvl.l.to_string(),
                rec.seed.to_string(),
                m.to_string(),
                ((*m > level) as u8).to_string(),
            ]);
            rec.put(format!("seed_max.j={}", lvl.j), *m);
        }
    }
    let ratios: Vec<f64> = levels.iter().map(|l| l.p99_ratio).collect();
    let rates: Vec<f64> = levels.iter().map(|l| l.exceedance_rate).collect();
    let ls: Vec<f64> = levels.iter().map(|l| l.l).collect();
    let ratio_spread = spread(&ratios);
    let checks = vec![
        Check::new(
            "p99_ratio_stable",
            ratio_spread <= 4.0,
            format!("p99 / l^(4/3) spread {ratio_spread}, limit 4"),
        ),
        Check::new(
            "exceedance_decreasing",
            strictly_decreasing(&rates),
            format!("exceedance rates at C = {c}: {rates:?}"),
        ),
    ];
    Ok(Outcome {
        table,
        records,
        summary: OscillationSummary {
            fitted_c: c,
            ratio_spread,
            zeta_proxy: zeta_proxy(&ls, &rates),
            levels,
        },
        checks,
        blobs: Vec::new(),
    })
}
