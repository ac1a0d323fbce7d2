use serde::Serialize;

use crate::brownian::DyadicBrownianPath;
use crate::drift::DriftSpec;
use crate::dyadic::DyadicTime;
use crate::error::{Error, Result};
use crate::flow::{distance, integrate, solve_endpoint, Trajectory};
use crate::stats;

/// Hölder exponent used along the bounded-drift chain.
pub const BOREL_HOLDER_EXPONENT: f64 = 0.8;

/// Euler solve from `(0, x)` to `t` at level `fine`, kept on the level-`keep` grid.
pub fn reference_solution(
    drift: &DriftSpec,
    path: &DyadicBrownianPath,
    x: &[f64],
    t: DyadicTime,
    fine: u32,
    keep: u32,
) -> Result<Trajectory> {
    if keep > fine {
        return Err(Error::GridResolution(format!("kept level {keep} is finer than solver level {fine}")));
    }
    let to = t.index_at_or_err(fine)?;
    t.index_at_or_err(keep)?;
    let shift = fine - keep;
    let mask = (1u64 << shift) - 1;
    let mut state = x.to_vec();
    let mut points = Vec::with_capacity(((to >> shift) as usize + 1) * x.len());
    integrate(drift, path, fine, 0, to, &mut state, |j, v| {
        if j & mask == 0 {
            points.extend_from_slice(v);
        }
    })?;
    Trajectory::from_parts(keep, x.len(), 0, points)
}

/// `|Y_r - X(u, r, Y_u)|` with the inner solve at level `m` on the same path.
pub fn one_step_defect(
    drift: &DriftSpec,
    path: &DyadicBrownianPath,
    u: DyadicTime,
    r: DyadicTime,
    y: &Trajectory,
    m: u32,
) -> Result<f64> {
    if u >= r {
        return Err(Error::invalid(format!("need u < r, got {u} and {r}")));
    }
    let yu = y.at(u)?;
    let yr = y.at(r)?;
    let x = solve_endpoint(drift, path, u, r, yu, m)?;
    Ok(distance(yr, &x))
}

/// `2 ‖M₁‖_{L^{q₁}[0,T]} len^{1/p₁}` for a time step of absolute length `len`.
pub fn trivial_bound(drift: &DriftSpec, horizon: f64, len: f64) -> f64 {
    let inv_p1 = drift.envelope1.integrability.conjugate().reciprocal();
    2.0 * drift.envelope1.lq_norm(horizon) * len.powf(inv_p1)
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OneStepLevel {
    pub k: u32,
    pub m: u32,
    pub max_defect: f64,
    pub trivial_bound: f64,
    /// `max_i (defect_i - bound - 2^{-m})`; positive means a violation.
    pub bound_excess: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OneStepSeries {
    pub seed: u64,
    pub levels: Vec<OneStepLevel>,
    pub fitted_exponent: Option<f64>,
    pub violations: usize,
}

fn check_levels(path: &DyadicBrownianPath, k_min: u32, k_max: u32, offset: u32, y_level: u32) -> Result<()> {
    if k_min > k_max {
        return Err(Error::invalid(format!("empty level range {k_min}..={k_max}")));
    }
    if y_level < k_max + offset {
        return Err(Error::GridResolution(format!(
            "reference level {y_level} is coarser than solver level {}",
            k_max + offset
        )));
    }
    if path.level() < y_level {
        return Err(Error::GridResolution(format!(
            "path level {} is below reference level {y_level}",
            path.level()
        )));
    }
    Ok(())
}

/// Largest one-step defect per level `k ∈ k_min..=k_max`, inner solves at `k + offset`.
pub fn one_step_series(
    drift: &DriftSpec,
    path: &DyadicBrownianPath,
    x: &[f64],
    k_min: u32,
    k_max: u32,
    offset: u32,
    y_level: u32,
) -> Result<OneStepSeries> {
    check_levels(path, k_min, k_max, offset, y_level)?;
    let y = reference_solution(drift, path, x, DyadicTime::ONE, y_level, k_max)?;
    let mut levels = Vec::new();
    let mut violations = 0;
    for k in k_min..=k_max {
        let m = k + offset;
        let bound = trivial_bound(drift, path.horizon(), path.horizon() * (-(k as f64)).exp2());
        let slack = (-(m as f64)).exp2();
        let mut max_defect: f64 = 0.0;
        let mut excess = f64::NEG_INFINITY;
        for i in 0..1u64 << k {
            let dft = one_step_defect(drift, path, DyadicTime::new(i, k), DyadicTime::new(i + 1, k), &y, m)?;
            max_defect = max_defect.max(dft);
            excess = excess.max(dft - bound - slack);
            if dft > bound + slack {
                violations += 1;
            }
        }
        levels.push(OneStepLevel {
            k,
            m,
            max_defect,
            trivial_bound: bound,
            bound_excess: excess,
        });
    }
    let ks: Vec<f64> = levels.iter().map(|l| l.k as f64).collect();
    let ds: Vec<f64> = levels.iter().map(|l| l.max_defect).collect();
    Ok(OneStepSeries {
        seed: path.seed(),
        fitted_exponent: stats::log2_slope(&ks, &ds).map(|s| -s),
        levels,
        violations,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum DefectMode {
    Holder,
    Borel,
}

impl std::str::FromStr for DefectMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "holder" => Ok(DefectMode::Holder),
            "borel" => Ok(DefectMode::Borel),
            _ => Err(Error::invalid(format!("unknown defect mode {s:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DefectLevel {
    pub k: u32,
    pub m: u32,
    pub max_increment: f64,
    pub terminal: f64,
    /// `|Σ_i (f_{i+1} - f_i) - (f(t) - f(0))|`.
    pub telescoping_error: f64,
    pub max_one_step: f64,
    /// Fraction of steps whose one-step defect is at most `2^{-k}`.
    pub gated_fraction: f64,
    /// `max |f_{i+1} - f_i| / defect_i^{4/5}` over gated steps.
    pub chained_ratio: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct DefectSeries {
    pub mode: DefectMode,
    pub seed: u64,
    pub t: DyadicTime,
    pub levels: Vec<DefectLevel>,
    pub fitted_theta: Option<f64>,
    pub terminal_rate: Option<f64>,
    pub predicted_theta: f64,
    pub predicted_terminal_rate: Option<f64>,
}

/// `f(s) = X(s, t, Y_s) - X(0, t, x)` on each level-`k` grid of `[0, t]`, where
/// `Y` is the level-`y_level` reference solution and flow solves run at `k + offset`.
#[allow(clippy::too_many_arguments)]
pub fn defect_series(
    drift: &DriftSpec,
    path: &DyadicBrownianPath,
    x: &[f64],
    t: DyadicTime,
    k_min: u32,
    k_max: u32,
    offset: u32,
    y_level: u32,
    mode: DefectMode,
    delta: Option<f64>,
) -> Result<DefectSeries> {
    if t == DyadicTime::ZERO || !t.in_unit_interval() || t.level() > k_min {
        return Err(Error::invalid(format!("t = {t} must be a nonzero point of the level-{k_min} grid")));
    }
    check_levels(path, k_min, k_max, offset, y_level)?;
    let (predicted_theta, predicted_terminal_rate) = match mode {
        DefectMode::Holder => (1.0 + drift.validate_with(delta)?.delta, None),
        DefectMode::Borel => {
            let sup = drift.bound(path.horizon());
            if sup > 1.0 + 1e-12 || drift.envelope1.is_singular() {
                return Err(Error::invalid(format!("bounded mode needs |b| <= 1, drift bound is {sup}")));
            }
            (16.0 / 15.0, Some(1.0 / 15.0))
        }
    };
    let y = reference_solution(drift, path, x, t, y_level, k_max)?;
    let d = x.len();
    let mut levels = Vec::new();
    for k in k_min..=k_max {
        let m = k + offset;
        let last = t.index_at_or_err(k)?;
        let base = solve_endpoint(drift, path, DyadicTime::ZERO, t, x, m)?;
        let mut f = Vec::with_capacity((last as usize + 1) * d);
        for i in 0..=last {
            let s = DyadicTime::new(i, k);
            let end = solve_endpoint(drift, path, s, t, y.at(s)?, m)?;
            f.extend(end.iter().zip(&base).map(|(a, b)| a - b));
        }
        let fi = |i: usize| &f[i * d..(i + 1) * d];
        let mut max_increment: f64 = 0.0;
        let mut sum = vec![0.0; d];
        let mut max_one_step: f64 = 0.0;
        let mut gated = 0usize;
        let mut chained: Option<f64> = None;
        let limit = (-(k as f64)).exp2();
        for i in 0..last as usize {
            let inc = distance(fi(i + 1), fi(i));
            max_increment = max_increment.max(inc);
            for c in 0..d {
                sum[c] += fi(i + 1)[c] - fi(i)[c];
            }
            let u = DyadicTime::new(i as u64, k);
            let r = DyadicTime::new(i as u64 + 1, k);
            let dft = one_step_defect(drift, path, u, r, &y, m)?;
            max_one_step = max_one_step.max(dft);
            if dft <= limit {
                gated += 1;
                if dft > 0.0 {
                    let ratio = inc / dft.powf(BOREL_HOLDER_EXPONENT);
                    chained = Some(chained.map_or(ratio, |c: f64| c.max(ratio)));
                }
            }
        }
        let total: Vec<f64> = fi(last as usize).iter().zip(fi(0)).map(|(a, b)| a - b).collect();
        levels.push(DefectLevel {
            k,
            m,
            max_increment,
            terminal: fi(last as usize).iter().map(|v| v * v).sum::<f64>().sqrt(),
            telescoping_error: distance(&sum, &total),
            max_one_step,
            gated_fraction: if last == 0 { 1.0 } else { gated as f64 / last as f64 },
            chained_ratio: chained,
        });
    }
    let ks: Vec<f64> = levels.iter().map(|l| l.k as f64).collect();
    let incs: Vec<f64> = levels.iter().map(|l| l.max_increment).collect();
    let terms: Vec<f64> = levels.iter().map(|l| l.terminal).collect();
    Ok(DefectSeries {
        mode,
        seed: path.seed(),
        t,
        fitted_theta: stats::log2_slope(&ks, &incs).map(|s| -s),
        terminal_rate: stats::log2_slope(&ks, &terms).map(|s| -s),
        levels,
        predicted_theta,
        predicted_terminal_rate,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::drift::Exponent;

    #[test]
    fn zero_and_constant_defects_vanish() {
        let path = DyadicBrownianPath::generate(3, 1, 1.0, 12).unwrap();
        for drift in [DriftSpec::zero(1), DriftSpec::constant(vec![0.7])] {
            let s = one_step_series(&drift, &path, &[0.25], 2, 5, 4, 12).unwrap();
            for l in &s.levels {
                assert!(l.max_defect < 1e-13, "{drift:?}: {}", l.max_defect);
            }
            assert_eq!(s.violations, 0);
        }
    }

    #[test]
    fn zero_drift_defect_function() {
        let path = DyadicBrownianPath::generate(5, 1, 1.0, 12).unwrap();
        let s = defect_series(
            &DriftSpec::zero(1),
            &path,
            &[0.0],
            DyadicTime::new(1, 1),
            2,
            5,
            4,
            12,
            DefectMode::Borel,
            None,
        )
        .unwrap();
        for l in &s.levels {
            assert!(l.max_increment < 1e-13 && l.terminal < 1e-13);
        }
    }

    #[test]
    fn holder_defect_function_starts_at_zero() {
        let drift = DriftSpec::holder(1, 0.5, 0.1, 1.0, 4.0, Exponent::Finite(6.0), Exponent::Finite(3.0)).unwrap();
        let path = DyadicBrownianPath::generate(9, 1, 1.0, 12).unwrap();
        let s = defect_series(&drift, &path, &[0.1], DyadicTime::new(1, 1), 2, 5, 4, 12, DefectMode::Holder, None).unwrap();
        assert!((s.predicted_theta - (1.0 + 1.0 / 24.0)).abs() < 1e-12);
        for l in &s.levels {
            assert!(l.telescoping_error < 1e-12);
        }
    }

    #[test]
    fn trivial_bound_for_bounded_drift() {
        let drift = DriftSpec::sign(1, None);
        assert!((trivial_bound(&drift, 1.0, 0.25) - 0.5).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_times() {
        let path = DyadicBrownianPath::generate(1, 1, 1.0, 10).unwrap();
        let drift = DriftSpec::sign(1, None);
        let bad = defect_series(&drift, &path, &[0.0], DyadicTime::new(3, 3), 2, 4, 4, 10, DefectMode::Borel, None);
        assert!(matches!(bad, Err(Error::InvalidArgument(_))));
        let y = reference_solution(&drift, &path, &[0.0], DyadicTime::ONE, 10, 4).unwrap();
        assert!(one_step_defect(&drift, &path, DyadicTime::new(1, 2), DyadicTime::new(1, 2), &y, 6).is_err());
        let strong = DriftSpec::lipschitz(1, 3.0);
        assert!(defect_series(&strong, &path, &[0.0], DyadicTime::ONE, 2, 4, 4, 10, DefectMode::Borel, None).is_err());
    }
}
