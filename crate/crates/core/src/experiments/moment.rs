use serde::Serialize;

use super::{Check, Outcome, Record, Table};
use crate::drift::DriftSpec;
use crate::dyadic::DyadicTime;
use crate::error::{Error, Result};
use crate::flow::StartSet;
use crate::moments::{fit_constant, sample_gaps, MomentEstimate, MomentRow};

#[derive(Clone, Debug, Serialize)]
pub struct MomentParams {
    pub drift: DriftSpec,
    pub seeds: Vec<u64>,
    pub horizon: f64,
    pub a: f64,
    pub x: Vec<f64>,
    /// Separations `2^{-k}` for `k ∈ sep_min..=sep_max`, along the first axis.
    pub sep_min: u32,
    pub sep_max: u32,
    /// Start times `S_n`.
    pub n: u32,
    pub m: u32,
}

#[derive(Clone, Debug, Serialize)]
pub struct Holdout {
    /// Constant fitted on even-indexed separations.
    pub fit_c: f64,
    /// Largest `estimate / (fit_c (sep^a + sep^{a-1}))` over odd-indexed separations.
    pub worst_test_ratio: f64,
    pub slack: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct MomentSummary {
    pub estimate: MomentEstimate,
    pub holdout: Holdout,
}

/// Leave-half-out check of the two-term bound.
pub fn holdout(rows: &[MomentRow], a: f64, slack: f64) -> Result<Holdout> {
    let fit: Vec<MomentRow> = rows.iter().step_by(2).cloned().collect();
    let test: Vec<&MomentRow> = rows.iter().skip(1).step_by(2).collect();
    if test.is_empty() {
        return Err(Error::invalid("holdout needs at least two separations"));
    }
    let fit_c = fit_constant(&fit, a)?.fitted_c;
    let worst_test_ratio = test
        .iter()
        .map(|r| {
            let bound = fit_c * (r.sep.powf(a) + r.sep.powf(a - 1.0));
            if r.estimate == 0.0 {
                0.0
            } else {
                r.estimate / bound
            }
        })
        .fold(0.0, f64::max);
    Ok(Holdout {
        fit_c,
        worst_test_ratio,
        slack,
    })
}

pub fn run(p: &MomentParams) -> Result<Outcome<MomentSummary>> {
    if p.sep_min > p.sep_max || p.x.len() != p.drift.dim {
        return Err(Error::invalid("bad separation range or start point dimension"));
    }
    let ys: Vec<Vec<f64>> = (p.sep_min..=p.sep_max)
        .map(|k| {
            let mut y = p.x.clone();
            y[0] += (-(k as f64)).exp2();
            y
        })
        .collect();
    let starts: Vec<DyadicTime> = StartSet::dyadic(1.0)?.level(p.n)?;
    let samples = sample_gaps(&p.drift, &p.x, &ys, &starts, p.m, p.horizon, &p.seeds)?;
    let estimate = MomentEstimate::from_samples(&samples, p.a)?;
    let mut table = Table::new(MomentEstimate::csv_header(p.drift.dim));
    let mut buf = Vec::new();
    estimate.write_csv_rows(&mut buf)?;
    table.rows = String::from_utf8(buf).expect("ascii csv").lines().map(str::to_owned).collect();
    let mut records = Vec::with_capacity(p.seeds.len());
    for (i, &seed) in p.seeds.iter().enumerate() {
        let mut rec = Record::new(seed);
        for (yi, k) in (p.sep_min..=p.sep_max).enumerate() {
            let worst = (0..starts.len()).map(|si| samples.gap(i, si, yi)).fold(0.0, f64::max);
            rec.put(format!("sup_gap.k={k}"), worst);
        }
        records.push(rec);
    }
    let hold = holdout(&estimate.rows, p.a, 0.2)?;
    let slope = estimate.slope;
    let checks = vec![
        Check::new(
            "holdout_bound",
            hold.worst_test_ratio <= 1.0 + hold.slack,
            format!("worst held-out ratio {} (slack {})", hold.worst_test_ratio, hold.slack),
        ),
        Check::new(
            "loglog_slope",
            slope.is_some_and(|s| s >= p.a - 1.3 && s <= p.a + 0.3),
            format!("slope {slope:?}, expected in [{}, {}]", p.a - 1.3, p.a + 0.3),
        ),
    ];
    Ok(Outcome {
        table,
        records,
        summary: MomentSummary {
            estimate,
            holdout: hold,
        },
        checks,
        blobs: Vec::new(),
    })
}
