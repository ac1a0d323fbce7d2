use serde::Serialize;

use super::{per_seed, strictly_decreasing, Check, Outcome, Record, Table};
use crate::brownian::DyadicBrownianPath;
use crate::drift::DriftSpec;
use crate::dyadic::DyadicTime;
use crate::error::{Error, Result};
use crate::stats;
use crate::uniqueness::{defect_series, one_step_series, DefectMode, DefectSeries, OneStepSeries};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum DefectKind {
    OneStep,
    Series(DefectMode),
}

impl std::str::FromStr for DefectKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "one-step" => Ok(DefectKind::OneStep),
            other => other.parse().map(DefectKind::Series),
        }
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct DefectParams {
    pub kind: DefectKind,
    pub drift: DriftSpec,
    pub seeds: Vec<u64>,
    pub horizon: f64,
    pub x: Vec<f64>,
    pub k_min: u32,
    pub k_max: u32,
    /// Solver level `m = k + offset`.
    pub offset: u32,
    /// Level of the reference solution `Y`.
    pub reference: u32,
    pub t: DyadicTime,
    pub delta: Option<f64>,
}

#[derive(Clone, Debug, Serialize)]
pub struct LevelMedian {
    pub k: u32,
    pub median: f64,
    pub max: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct OneStepSummary {
    pub gamma: Option<f64>,
    pub predicted_exponent: Option<f64>,
    pub fitted_exponent: Option<f64>,
    pub median_seed_exponent: Option<f64>,
    pub levels: Vec<LevelMedian>,
    pub bound_violations: usize,
    pub worst_bound_excess: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct SeriesSummary {
    pub mode: DefectMode,
    pub predicted_theta: f64,
    pub median_fitted_theta: Option<f64>,
    pub predicted_terminal_rate: Option<f64>,
    pub terminal_rate: Option<f64>,
    pub increments: Vec<LevelMedian>,
    pub terminals: Vec<LevelMedian>,
    pub worst_telescoping_error: f64,
    pub median_gated_fraction: f64,
}

#[derive(Clone, Debug, Serialize)]
#[serde(untagged)]
pub enum DefectSummary {
    OneStep(OneStepSummary),
    Series(SeriesSummary),
}

fn level_medians(ks: &[u32], per_seed: &[Vec<f64>]) -> Vec<LevelMedian> {
    ks.iter()
        .enumerate()
        .map(|(i, &k)| {
            let v: Vec<f64> = per_seed.iter().map(|s| s[i]).collect();
            LevelMedian {
                k,
                median: stats::median(&v),
                max: v.iter().copied().fold(0.0, f64::max),
            }
        })
        .collect()
}

fn decay(levels: &[LevelMedian]) -> Option<f64> {
    let ks: Vec<f64> = levels.iter().map(|l| l.k as f64).collect();
    let v: Vec<f64> = levels.iter().map(|l| l.median).collect();
    stats::log2_slope(&ks, &v).map(|s| -s)
}

fn path_for(p: &DefectParams, seed: u64) -> Result<DyadicBrownianPath> {
    DyadicBrownianPath::generate(seed, p.drift.dim, p.horizon, p.reference)
}

pub fn run(p: &DefectParams) -> Result<Outcome<DefectSummary>> {
    match p.kind {
        DefectKind::OneStep => one_step(p).map(|o| o.map(DefectSummary::OneStep)),
        DefectKind::Series(mode) => series(p, mode).map(|o| o.map(DefectSummary::Series)),
    }
}

fn one_step(p: &DefectParams) -> Result<Outcome<OneStepSummary>> {
    let runs: Vec<OneStepSeries> = per_seed(&p.seeds, |seed| {
        one_step_series(&p.drift, &path_for(p, seed)?, &p.x, p.k_min, p.k_max, p.offset, p.reference)
    })?;
    let mut table = Table::new("seed,k,m,max_defect,trivial_bound,bound_excess");
    let mut records = Vec::new();
    for run in &runs {
        let mut rec = Record::new(run.seed);
        for l in &run.levels {
            table.push(&[
                run.seed.to_string(),
                l.k.to_string(),
                l.m.to_string(),
                l.max_defect.to_string(),
                l.trivial_bound.to_string(),
                l.bound_excess.to_string(),
            ]);
            rec.put(format!("max_defect.k={}", l.k), l.max_defect);
        }
        rec.put_opt("fitted_exponent", run.fitted_exponent);
        rec.put("violations", run.violations as f64);
        records.push(rec);
    }
    let ks: Vec<u32> = (p.k_min..=p.k_max).collect();
    let per: Vec<Vec<f64>> = runs.iter().map(|r| r.levels.iter().map(|l| l.max_defect).collect()).collect();
    let levels = level_medians(&ks, &per);
    let fitted_exponent = decay(&levels);
    let seed_exps: Vec<f64> = runs.iter().filter_map(|r| r.fitted_exponent).collect();
    let gamma = p.drift.validate_with(p.delta).ok().map(|b| b.gamma);
    let predicted_exponent = gamma.map(|g| 1.0 + g);
    let bound_violations = runs.iter().map(|r| r.violations).sum();
    let worst_bound_excess = runs
        .iter()
        .flat_map(|r| r.levels.iter().map(|l| l.bound_excess))
        .fold(f64::NEG_INFINITY, f64::max);
    let mut checks = vec![Check::new(
        "trivial_bound",
        bound_violations == 0,
        format!("{bound_violations} steps exceed 2‖M₁‖|r-u|^(1/p₁) + 2^-m; worst excess {worst_bound_excess}"),
    )];
    if let Some(pred) = predicted_exponent {
        checks.push(Check::new(
            "defect_exponent",
            fitted_exponent.is_some_and(|e| e >= pred - 0.15),
            format!("fitted {fitted_exponent:?}, need >= {}", pred - 0.15),
        ));
    }
    Ok(Outcome {
        table,
        records,
        summary: OneStepSummary {
            gamma,
            predicted_exponent,
            fitted_exponent,
            median_seed_exponent: (!seed_exps.is_empty()).then(|| stats::median(&seed_exps)),
            levels,
            bound_violations,
            worst_bound_excess,
        },
        checks,
        blobs: Vec::new(),
    })
}

fn series(p: &DefectParams, mode: DefectMode) -> Result<Outcome<SeriesSummary>> {
    let runs: Vec<DefectSeries> = per_seed(&p.seeds, |seed| {
        defect_series(
            &p.drift,
            &path_for(p, seed)?,
            &p.x,
            p.t,
            p.k_min,
            p.k_max,
            p.offset,
            p.reference,
            mode,
            p.delta,
        )
    })?;
    let mut table =
        Table::new("seed,k,m,max_increment,terminal,telescoping_error,max_one_step,gated_fraction,chained_ratio");
    let mut records = Vec::new();
    for run in &runs {
        let mut rec = Record::new(run.seed);
        for l in &run.levels {
            table.push(&[
                run.seed.to_string(),
                l.k.to_string(),
                l.m.to_string(),
                l.max_increment.to_string(),
                l.terminal.to_string(),
                l.telescoping_error.to_string(),
                l.max_one_step.to_string(),
                l.gated_fraction.to_string(),
                l.chained_ratio.map_or(String::new(), |c| c.to_string()),
            ]);
            rec.put(format!("max_increment.k={}", l.k), l.max_increment);
            rec.put(format!("terminal.k={}", l.k), l.terminal);
        }
        rec.put_opt("fitted_theta", run.fitted_theta);
        rec.put_opt("terminal_rate", run.terminal_rate);
        records.push(rec);
    }
    let ks: Vec<u32> = (p.k_min..=p.k_max).collect();
    let inc: Vec<Vec<f64>> = runs.iter().map(|r| r.levels.iter().map(|l| l.max_increment).collect()).collect();
    let term: Vec<Vec<f64>> = runs.iter().map(|r| r.levels.iter().map(|l| l.terminal).collect()).collect();
    let increments = level_medians(&ks, &inc);
    let terminals = level_medians(&ks, &term);
    let thetas: Vec<f64> = runs.iter().filter_map(|r| r.fitted_theta).collect();
    let median_fitted_theta = (!thetas.is_empty()).then(|| stats::median(&thetas));
    let terminal_rate = decay(&terminals);
    let gated: Vec<f64> = runs.iter().flat_map(|r| r.levels.iter().map(|l| l.gated_fraction)).collect();
    let summary = SeriesSummary {
        mode,
        predicted_theta: runs[0].predicted_theta,
        median_fitted_theta,
        predicted_terminal_rate: runs[0].predicted_terminal_rate,
        terminal_rate,
        worst_telescoping_error: runs
            .iter()
            .flat_map(|r| r.levels.iter().map(|l| l.telescoping_error))
            .fold(0.0, f64::max),
        median_gated_fraction: stats::median(&gated),
        increments,
        terminals,
    };
    let med_terms: Vec<f64> = summary.terminals.iter().map(|l| l.median).collect();
    let mut checks = vec![Check::new(
        "terminal_decreasing",
        strictly_decreasing(&med_terms) && terminal_rate.is_some_and(|r| r > 0.0),
        format!("median |f(t)| per level {med_terms:?}, fitted rate {terminal_rate:?}"),
    )];
    if mode == DefectMode::Holder {
        let need = summary.predicted_theta - 0.15;
        checks.push(Check::new(
            "superlinear_increments",
            median_fitted_theta.is_some_and(|t| t >= need),
            format!("median fitted θ {median_fitted_theta:?}, need >= {need}"),
        ));
    }
    Ok(Outcome {
        table,
        records,
        summary,
        checks,
        blobs: Vec::new(),
    })
}
