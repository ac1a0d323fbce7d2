use serde::Serialize;

use crate::brownian::DyadicBrownianPath;
use crate::drift::DriftSpec;
use crate::dyadic::DyadicTime;
use crate::error::{Error, Result};
use crate::flow::{distance, solve, sup_distance, Trajectory};
use crate::stats;

/// Sup and terminal distance between the level-`m_coarse` and level-`m_fine`
/// solves from `(0, x)` on the same path.
pub fn two_solution_gap(
    drift: &DriftSpec,
    path: &DyadicBrownianPath,
    x: &[f64],
    m_coarse: u32,
    m_fine: u32,
) -> Result<(f64, f64)> {
    if m_fine < m_coarse + 4 {
        return Err(Error::invalid(format!("need m_fine >= m_coarse + 4, got {m_fine} and {m_coarse}")));
    }
    let fine = solve(drift, path, DyadicTime::ZERO, DyadicTime::ONE, x, m_fine)?;
    gap_against(drift, path, x, m_coarse, &fine)
}

fn gap_against(
    drift: &DriftSpec,
    path: &DyadicBrownianPath,
    x: &[f64],
    m: u32,
    fine: &Trajectory,
) -> Result<(f64, f64)> {
    let coarse = solve(drift, path, DyadicTime::ZERO, DyadicTime::ONE, x, m)?;
    Ok((sup_distance(&coarse, fine)?, distance(coarse.endpoint(), fine.endpoint())))
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GapLevel {
    pub m: u32,
    pub sup_gap: f64,
    pub terminal_gap: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct GapSeries {
    pub seed: u64,
    pub m_fine: u32,
    pub levels: Vec<GapLevel>,
    /// `θ` in `sup_gap ≈ C 2^{-θ m}`.
    pub fitted_theta: Option<f64>,
}

pub fn gap_series(
    drift: &DriftSpec,
    path: &DyadicBrownianPath,
    x: &[f64],
    coarse: std::ops::RangeInclusive<u32>,
    m_fine: u32,
) -> Result<GapSeries> {
    if coarse.is_empty() || m_fine < coarse.end() + 4 {
        return Err(Error::invalid(format!("need m_fine >= max coarse level + 4, got {m_fine}")));
    }
    let fine = solve(drift, path, DyadicTime::ZERO, DyadicTime::ONE, x, m_fine)?;
    let levels = coarse
        .map(|m| {
            gap_against(drift, path, x, m, &fine).map(|(sup_gap, terminal_gap)| GapLevel {
                m,
                sup_gap,
                terminal_gap,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let ms: Vec<f64> = levels.iter().map(|l| l.m as f64).collect();
    let gaps: Vec<f64> = levels.iter().map(|l| l.sup_gap).collect();
    Ok(GapSeries {
        seed: path.seed(),
        m_fine,
        fitted_theta: stats::log2_slope(&ms, &gaps).map(|s| -s),
        levels,
    })
}
