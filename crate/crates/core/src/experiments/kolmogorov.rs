use serde::Serialize;

use super::{per_seed, spread, Check, Outcome, Record, Table};
use crate::brownian::DyadicBrownianPath;
use crate::chaining::{
    adjacent_max, brownian_field, chaining_series, fit_alpha, flow_bridge_window, holder_modulus,
    lemma_exponent_window, normalization_factor, ChainingConfig, ChainingReport, Euclidean, LemmaWindow, LevelTable,
    ModulusEstimate, Scaled,
};
use crate::drift::DriftSpec;
use crate::dyadic::DyadicTime;
use crate::error::{Error, Result};
use crate::flow::{FlowTable, Lattice, StartSet};
use crate::stats;

/// `E|W_u - W_v|^8 = 105 |u - v|^4` for a standard Brownian motion.
pub const EIGHTH_MOMENT: f64 = 105.0;

#[derive(Clone, Debug, Serialize)]
pub struct BrownianOracleParams {
    pub seeds: Vec<u64>,
    pub horizon: f64,
    pub n_min: u32,
    pub n_max: u32,
    pub a: f64,
    pub alphas: Vec<f64>,
    pub eta: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct AlphaReport {
    pub alpha: f64,
    pub in_lemma_window: bool,
    /// Convergence predicted by Brownian scaling: `η + αa - a/2 < 0`.
    pub expected_converged: bool,
    pub report: ChainingReport,
    pub seeds_converged: usize,
}

#[derive(Clone, Debug, Serialize)]
pub struct BrownianOracleSummary {
    pub a: f64,
    pub b: f64,
    pub eta: f64,
    pub moment_constant: f64,
    pub window: LemmaWindow,
    pub fitted_alpha: Option<f64>,
    pub median_y: Vec<(u32, f64)>,
    pub alphas: Vec<AlphaReport>,
}

fn start_tables(starts: &StartSet, levels: &[(u32, f64)]) -> Result<Vec<LevelTable>> {
    levels
        .iter()
        .map(|&(n, y)| {
            let s = starts.level(n)?;
            Ok(LevelTable {
                n,
                values: vec![y; s.len()],
                starts: s,
            })
        })
        .collect()
}

/// The field `X_s(u) = W_u` for every `s`, with the metric normalized so that
/// the eighth-moment bound holds with constant 1.
pub fn brownian_oracle(p: &BrownianOracleParams) -> Result<Outcome<BrownianOracleSummary>> {
    if p.n_min > p.n_max || p.n_min == 0 {
        return Err(Error::invalid("need 1 <= n_min <= n_max"));
    }
    let b = p.a / 2.0 - 1.0;
    let moment_constant = gaussian_abs_moment(p.a)? * p.horizon.powf(p.a / 2.0);
    let window = lemma_exponent_window(p.a, b)?;
    let metric = Scaled(Euclidean, normalization_factor(moment_constant, p.a));
    let starts = StartSet::thinned(p.eta)?;
    let levels: Vec<u32> = (p.n_min..=p.n_max).collect();
    let ys = per_seed(&p.seeds, |seed| {
        let path = DyadicBrownianPath::generate(seed, 1, p.horizon, p.n_max)?;
        levels
            .iter()
            .map(|&n| Ok(adjacent_max(&brownian_field(&path, n)?, &metric)))
            .collect::<Result<Vec<f64>>>()
    })?;
    let mut table = Table::new("seed,n,y_normalized");
    let mut records = Vec::new();
    let mut per_level: Vec<Vec<f64>> = vec![Vec::with_capacity(p.seeds.len()); levels.len()];
    let mut seeds_converged = vec![0usize; p.alphas.len()];
    for (seed, y) in p.seeds.iter().zip(&ys) {
        let mut rec = Record::new(*seed);
        for (i, (&n, v)) in levels.iter().zip(y).enumerate() {
            table.push(&[seed.to_string(), n.to_string(), v.to_string()]);
            rec.put(format!("y.n={n}"), *v);
            per_level[i].push(*v);
        }
        let own: Vec<(u32, f64)> = levels.iter().copied().zip(y.iter().copied()).collect();
        let tables = start_tables(&starts, &own)?;
        for (j, &alpha) in p.alphas.iter().enumerate() {
            let r = chaining_series(&tables, &ChainingConfig::new(alpha, p.a, p.eta))?;
            seeds_converged[j] += r.converged as usize;
            rec.put(format!("converged.alpha={alpha}"), r.converged as u8 as f64);
        }
        let ns: Vec<f64> = levels.iter().map(|&n| n as f64).collect();
        rec.put_opt("fitted_alpha", stats::log2_slope(&ns, y).map(|s| -s));
        records.push(rec);
    }
    let fitted_alpha = fit_alpha(levels.iter().copied().zip(per_level.iter().map(|v| v.as_slice())));
    let median_y: Vec<(u32, f64)> = levels.iter().copied().zip(per_level.iter().map(|v| stats::median(v))).collect();
    let median_tables = start_tables(&starts, &median_y)?;
    let mut alphas = Vec::new();
    let mut checks = vec![Check::new(
        "fitted_alpha",
        fitted_alpha.is_some_and(|a| (0.40..=0.50).contains(&a)),
        format!("fitted α = {fitted_alpha:?}, expected in [0.40, 0.50]"),
    )];
    for (j, &alpha) in p.alphas.iter().enumerate() {
        let report = chaining_series(&median_tables, &ChainingConfig::new(alpha, p.a, p.eta))?;
        let expected_converged = p.eta + alpha * p.a - p.a / 2.0 < 0.0;
        checks.push(Check::new(
            &format!("convergence_flag.alpha={alpha}"),
            report.converged == expected_converged,
            format!("converged = {}, expected {expected_converged}", report.converged),
        ));
        alphas.push(AlphaReport {
            alpha,
            in_lemma_window: window.admits(alpha, p.eta),
            expected_converged,
            report,
            seeds_converged: seeds_converged[j],
        });
    }
    Ok(Outcome {
        table,
        records,
        summary: BrownianOracleSummary {
            a: p.a,
            b,
            eta: p.eta,
            moment_constant,
            window,
            fitted_alpha,
            median_y,
            alphas,
        },
        checks,
        blobs: Vec::new(),
    })
}

/// `E|Z|^a = 2^{a/2} Γ((a+1)/2) / √π` for a standard normal `Z` and integer `a ≥ 1`.
fn gaussian_abs_moment(a: f64) -> Result<f64> {
    if !(a >= 1.0 && a.fract() == 0.0) {
        return Err(Error::invalid(format!("the Brownian oracle needs an integer moment order, got {a}")));
    }
    let mut x = (a + 1.0) / 2.0;
    let mut gamma = 1.0;
    while x > 1.0 {
        x -= 1.0;
        gamma *= x;
    }
    if x == 0.5 {
        gamma *= std::f64::consts::PI.sqrt();
    }
    Ok((a / 2.0).exp2() * gamma / std::f64::consts::PI.sqrt())
}

#[derive(Clone, Debug, Serialize)]
pub struct FlowOracleParams {
    pub drift: DriftSpec,
    pub seeds: Vec<u64>,
    pub horizon: f64,
    pub n_min: u32,
    pub n_max: u32,
    pub m: u32,
    pub alpha: f64,
    /// Lattice covers `[-w, w]^d`.
    pub half_width: f64,
    /// Moment order behind the reported exponent window.
    pub a: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct ModulusLevel {
    pub n: u32,
    pub median_c_hat: f64,
    pub max_c_hat: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct FlowOracleSummary {
    pub alpha: f64,
    pub bridge_window: LemmaWindow,
    pub alpha_in_window: bool,
    pub levels: Vec<ModulusLevel>,
    pub median_spread: f64,
    pub max_spread: f64,
}

pub fn flow_oracle(p: &FlowOracleParams) -> Result<Outcome<FlowOracleSummary>> {
    if p.n_min > p.n_max || p.n_max > p.m {
        return Err(Error::invalid("need n_min <= n_max <= m"));
    }
    let bridge_window = flow_bridge_window(p.a, p.drift.dim)?;
    let starts = StartSet::dyadic(1.0)?;
    let levels: Vec<u32> = (p.n_min..=p.n_max).collect();
    let mut per_seed_est: Vec<Vec<ModulusEstimate>> = Vec::with_capacity(p.seeds.len());
    for &seed in &p.seeds {
        let path = DyadicBrownianPath::generate(seed, p.drift.dim, p.horizon, p.m)?;
        let est = levels
            .iter()
            .map(|&n| {
                let k = ((p.half_width * (n as f64).exp2()).round() as u32).max(1);
                let table = FlowTable::build(&p.drift, &path, &starts, &Lattice::new(n, k, p.drift.dim), p.m)?;
                holder_modulus(&table, p.alpha, n)
            })
            .collect::<Result<Vec<_>>>()?;
        per_seed_est.push(est);
    }
    let mut table = Table::new("seed,n,c_hat,worst_s_num,worst_s_level,worst_t_num,worst_t_level");
    let mut records = Vec::new();
    for (seed, est) in p.seeds.iter().zip(&per_seed_est) {
        let mut rec = Record::new(*seed);
        for e in est {
            let (s, t) = e.worst.as_ref().map(|w| (w.s, w.t)).unwrap_or((DyadicTime::ZERO, DyadicTime::ZERO));
            table.push(&[
                seed.to_string(),
                e.n.to_string(),
                e.c_hat.to_string(),
                s.num().to_string(),
                s.level().to_string(),
                t.num().to_string(),
                t.level().to_string(),
            ]);
            rec.put(format!("c_hat.n={}", e.n), e.c_hat);
        }
        records.push(rec);
    }
    let summary_levels: Vec<ModulusLevel> = levels
        .iter()
        .enumerate()
        .map(|(i, &n)| {
            let c: Vec<f64> = per_seed_est.iter().map(|e| e[i].c_hat).collect();
            ModulusLevel {
                n,
                median_c_hat: stats::median(&c),
                max_c_hat: c.iter().copied().fold(0.0, f64::max),
            }
        })
        .collect();
    let medians: Vec<f64> = summary_levels.iter().map(|l| l.median_c_hat).collect();
    let maxima: Vec<f64> = summary_levels.iter().map(|l| l.max_c_hat).collect();
    let median_spread = spread(&medians);
    let max_spread = spread(&maxima);
    let checks = vec![Check::new(
        "modulus_stable",
        median_spread <= 3.0,
        format!("max/min over n of median C_hat = {median_spread}, limit 3"),
    )];
    Ok(Outcome {
        table,
        records,
        summary: FlowOracleSummary {
            alpha: p.alpha,
            alpha_in_window: bridge_window.alpha_max > p.alpha,
            bridge_window,
            levels: summary_levels,
            median_spread,
            max_spread,
        },
        checks,
        blobs: Vec::new(),
    })
}
