//! Monte-Carlo two-point moments `max_{s ∈ S_n} E sup_{t ≥ s} |X^x_{s,t} - X^y_{s,t}|^a`.

use std::io::Write;

use rayon::prelude::*;
use serde::Serialize;

use crate::brownian::DyadicBrownianPath;
use crate::drift::DriftSpec;
use crate::dyadic::DyadicTime;
use crate::error::{Error, Result};
use crate::flow::{distance, integrate};
use crate::stats;

/// Below this many seeds the output is flagged, not rejected.
pub const MIN_SEEDS: usize = 30;

/// Per-seed sup-gaps `sup_t |X^x_{s,t} - X^y_{s,t}|`, stored `[seed][s][y]`.
#[derive(Clone, Debug, PartialEq)]
pub struct GapSamples {
    pub x: Vec<f64>,
    pub ys: Vec<Vec<f64>>,
    pub starts: Vec<DyadicTime>,
    pub seeds: Vec<u64>,
    pub level: u32,
    gaps: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MomentRow {
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub sep: f64,
    pub estimate: f64,
    pub stderr: f64,
    pub s_argmax: DyadicTime,
    pub per_s_stderr: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ConstantFit {
    pub fitted_c: f64,
    /// `max/min` of the per-row ratios; `None` with fewer than 3 rows or 2 octaves.
    pub spread: Option<f64>,
    pub stable: Option<bool>,
    pub slope: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct MomentEstimate {
    pub a: f64,
    pub level: u32,
    pub num_seeds: usize,
    pub insufficient_samples: bool,
    pub rows: Vec<MomentRow>,
    #[serde(rename = "fitted_C")]
    pub fitted_c: f64,
    pub stable: Option<bool>,
    pub slope: Option<f64>,
}

pub fn sample_gaps(
    drift: &DriftSpec,
    x: &[f64],
    ys: &[Vec<f64>],
    starts: &[DyadicTime],
    m: u32,
    horizon: f64,
    seeds: &[u64],
) -> Result<GapSamples> {
    if ys.is_empty() || starts.is_empty() || seeds.is_empty() {
        return Err(Error::invalid("need at least one y, one start time and one seed"));
    }
    let in_ball = |p: &[f64]| drift.truncation.map_or(true, |n| p.iter().map(|v| v * v).sum::<f64>().sqrt() <= n);
    if !in_ball(x) || ys.iter().any(|y| !in_ball(y)) {
        return Err(Error::invalid("start points must lie in the truncation ball"));
    }
    if ys.iter().any(|y| y.len() != x.len()) {
        return Err(Error::invalid("x and y dimensions differ"));
    }
    let idx: Vec<u64> = starts.iter().map(|s| s.index_at_or_err(m)).collect::<Result<_>>()?;
    let top = 1u64 << m;
    let per_seed = seeds
        .par_iter()
        .map(|&seed| -> Result<Vec<f64>> {
            let path = DyadicBrownianPath::generate(seed, x.len(), horizon, m)?;
            let mut out = Vec::with_capacity(idx.len() * ys.len());
            for &from in &idx {
                let mut base = Vec::with_capacity(((top - from + 1) as usize) * x.len());
                let mut state = x.to_vec();
                integrate(drift, &path, m, from, top, &mut state, |_, v| base.extend_from_slice(v))?;
                for y in ys {
                    let mut state = y.clone();
                    let mut worst: f64 = 0.0;
                    let d = x.len();
                    integrate(drift, &path, m, from, top, &mut state, |j, v| {
                        let k = (j - from) as usize;
                        worst = worst.max(distance(&base[k * d..(k + 1) * d], v));
                    })?;
                    out.push(worst);
                }
            }
            Ok(out)
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(GapSamples {
        x: x.to_vec(),
        ys: ys.to_vec(),
        starts: starts.to_vec(),
        seeds: seeds.to_vec(),
        level: m,
        gaps: per_seed.concat(),
    })
}

impl GapSamples {
    /// `sup_t |ΔX|` for seed index `seed`, start index `s` and target index `y`.
    pub fn gap(&self, seed: usize, s: usize, y: usize) -> f64 {
        self.gaps[(seed * self.starts.len() + s) * self.ys.len() + y]
    }

    /// One row per `y`; seed sums run over sorted samples so the result does not
    /// depend on seed order.
    pub fn rows(&self, a: f64) -> Result<Vec<MomentRow>> {
        if !(a > 1.0) {
            return Err(Error::invalid(format!("moment order a = {a} must exceed 1")));
        }
        let mut rows = Vec::with_capacity(self.ys.len());
        for (yi, y) in self.ys.iter().enumerate() {
            let mut best = (f64::NEG_INFINITY, 0.0, 0usize);
            let mut per_s_stderr = Vec::with_capacity(self.starts.len());
            for si in 0..self.starts.len() {
                let mut v: Vec<f64> = (0..self.seeds.len()).map(|k| self.gap(k, si, yi).powf(a)).collect();
                v.sort_by(f64::total_cmp);
                let (mean, se) = stats::mean_and_stderr(&v);
                per_s_stderr.push(se);
                if mean > best.0 {
                    best = (mean, se, si);
                }
            }
            rows.push(MomentRow {
                x: self.x.clone(),
                y: y.clone(),
                sep: distance(&self.x, y),
                estimate: best.0,
                stderr: best.1,
                s_argmax: self.starts[best.2],
                per_s_stderr,
            });
        }
        Ok(rows)
    }
}

/// `C = max_rows estimate / (sep^a + sep^(a-1))`, with octave spread and log-log slope.
pub fn fit_constant(rows: &[MomentRow], a: f64) -> Result<ConstantFit> {
    let live: Vec<&MomentRow> = rows.iter().filter(|r| r.sep > 0.0).collect();
    if live.is_empty() {
        return Err(Error::invalid("all separations are degenerate"));
    }
    let ratios: Vec<f64> = live.iter().map(|r| r.estimate / (r.sep.powf(a) + r.sep.powf(a - 1.0))).collect();
    let fitted_c = ratios.iter().copied().fold(0.0, f64::max);
    if !fitted_c.is_finite() {
        return Err(Error::invalid("non-finite moment estimate"));
    }
    let (lo, hi) = live
        .iter()
        .fold((f64::INFINITY, 0.0f64), |(lo, hi), r| (lo.min(r.sep), hi.max(r.sep)));
    let (spread, stable) = if live.len() >= 3 && hi / lo >= 4.0 {
        let min = ratios.iter().copied().fold(f64::INFINITY, f64::min);
        let spread = if fitted_c == 0.0 { 1.0 } else { fitted_c / min };
        (Some(spread), Some(spread <= 2.0))
    } else {
        (None, None)
    };
    let xs: Vec<f64> = live.iter().map(|r| r.sep.log2()).collect();
    let ys: Vec<f64> = live.iter().map(|r| r.estimate).collect();
    Ok(ConstantFit {
        fitted_c,
        spread,
        stable,
        slope: stats::log2_slope(&xs, &ys),
    })
}

#[allow(clippy::too_many_arguments)]
pub fn pair_moment(
    drift: &DriftSpec,
    a: f64,
    x: &[f64],
    ys: &[Vec<f64>],
    starts: &[DyadicTime],
    m: u32,
    horizon: f64,
    seeds: &[u64],
) -> Result<MomentEstimate> {
    let samples = sample_gaps(drift, x, ys, starts, m, horizon, seeds)?;
    MomentEstimate::from_samples(&samples, a)
}

impl MomentEstimate {
    pub fn from_samples(samples: &GapSamples, a: f64) -> Result<Self> {
        let rows = samples.rows(a)?;
        let fit = fit_constant(&rows, a)?;
        Ok(MomentEstimate {
            a,
            level: samples.level,
            num_seeds: samples.seeds.len(),
            insufficient_samples: samples.seeds.len() < MIN_SEEDS,
            rows,
            fitted_c: fit.fitted_c,
            stable: fit.stable,
            slope: fit.slope,
        })
    }

    pub fn csv_header(dim: usize) -> String {
        let mut h = String::from("a");
        for c in 0..dim {
            h.push_str(&format!(",x{c}"));
        }
        for c in 0..dim {
            h.push_str(&format!(",y{c}"));
        }
        h.push_str(",sep,estimate,stderr,s_argmax_num,s_argmax_level");
        h
    }

    pub fn write_csv_rows<W: Write>(&self, mut w: W) -> Result<()> {
        for r in &self.rows {
            let mut line = format!("{}", self.a);
            for v in r.x.iter().chain(&r.y) {
                line.push_str(&format!(",{v}"));
            }
            line.push_str(&format!(
                ",{},{},{},{},{}",
                r.sep,
                r.estimate,
                r.stderr,
                r.s_argmax.num(),
                r.s_argmax.level()
            ));
            writeln!(w, "{line}")?;
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn starts(n: u32) -> Vec<DyadicTime> {
        (0..1u64 << n).map(|k| DyadicTime::new(k, n)).collect()
    }

    fn seps(lo: i32, hi: i32) -> Vec<Vec<f64>> {
        (lo..=hi).map(|k| vec![(-(k as f64)).exp2()]).collect()
    }

    #[test]
    fn zero_drift_is_closed_form() {
        let seeds: Vec<u64> = (0..8).collect();
        let est = pair_moment(&DriftSpec::zero(1), 4.0, &[0.0], &seps(2, 6), &starts(2), 8, 1.0, &seeds).unwrap();
        assert!(est.insufficient_samples);
        for r in &est.rows {
            assert!((r.estimate / r.sep.powi(4) - 1.0).abs() < 1e-12);
            assert!(r.stderr <= 1e-12 * r.estimate);
        }
        assert!(est.fitted_c < 1.0);
    }

    #[test]
    fn lipschitz_gronwall() {
        let l = 1.5;
        let seeds: Vec<u64> = (0..40).collect();
        let est = pair_moment(&DriftSpec::lipschitz(1, l), 4.0, &[0.2], &seps(1, 5), &starts(1), 7, 1.0, &seeds).unwrap();
        assert!(!est.insufficient_samples);
        for r in &est.rows {
            assert!(r.estimate <= r.sep.powi(4) * (4.0 * l).exp() * (1.0 + 1e-12));
        }
    }

    #[test]
    fn seed_order_does_not_matter() {
        let drift = DriftSpec::sign(1, None);
        let seeds: Vec<u64> = (10..30).collect();
        let mut rev = seeds.clone();
        rev.reverse();
        let a = pair_moment(&drift, 3.0, &[0.0], &seps(2, 4), &starts(2), 7, 1.0, &seeds).unwrap();
        let b = pair_moment(&drift, 3.0, &[0.0], &seps(2, 4), &starts(2), 7, 1.0, &rev).unwrap();
        assert_eq!(a.rows, b.rows);
    }

    #[test]
    fn lyapunov_in_a() {
        let samples = sample_gaps(&DriftSpec::sign(1, None), &[0.05], &seps(2, 5), &starts(2), 7, 1.0, &(0..30).collect::<Vec<_>>()).unwrap();
        let mut prev = vec![0.0; 4];
        for a in [1.5, 2.0, 4.0, 8.0] {
            let rows = samples.rows(a).unwrap();
            for (p, r) in prev.iter_mut().zip(&rows) {
                let norm = r.estimate.powf(1.0 / a);
                assert!(norm >= *p * (1.0 - 1e-12));
                *p = norm;
            }
        }
    }

    #[test]
    fn fit_constant_edges() {
        let row = |sep: f64, estimate: f64| MomentRow {
            x: vec![0.0],
            y: vec![sep],
            sep,
            estimate,
            stderr: 0.0,
            s_argmax: DyadicTime::ZERO,
            per_s_stderr: vec![0.0],
        };
        assert_eq!(fit_constant(&[row(0.5, 0.0)], 4.0).unwrap().fitted_c, 0.0);
        assert!(fit_constant(&[row(0.0, 0.0)], 4.0).is_err());
        let fit = fit_constant(&[row(0.5, 0.0625), row(0.25, 0.25f64.powi(4)), row(0.125, 0.125f64.powi(4))], 4.0).unwrap();
        assert!((fit.slope.unwrap() - 4.0).abs() < 1e-12);
        assert!(fit.stable.is_some());
    }

    #[test]
    fn rejects_bad_inputs() {
        let seeds = [1u64];
        assert!(pair_moment(&DriftSpec::zero(1), 1.0, &[0.0], &seps(1, 2), &starts(1), 4, 1.0, &seeds).is_err());
        let trunc = DriftSpec::sign(1, Some(1.0));
        assert!(pair_moment(&trunc, 2.0, &[0.0], &[vec![2.0]], &starts(1), 4, 1.0, &seeds).is_err());
    }
}
