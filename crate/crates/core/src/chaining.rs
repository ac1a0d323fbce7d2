//! Dyadic chaining for the Kolmogorov-type continuity lemma with start-time
//! budgets: adjacent-pair maxima `Y(s, n)` on `D_n`, the series
//! `Σ_n Σ_{s∈S_n} (2^{αn} Y(s, n))^a`, and empirical Hölder moduli of flow tables.

use serde::Serialize;

use crate::brownian::DyadicBrownianPath;
use crate::dyadic::DyadicTime;
use crate::error::{Error, Result};
use crate::flow::{distance, FlowTable};
use crate::stats;

/// `D_n = {(k_1, ..., k_d) 2^{-n} : k_i ∈ 1..=2^n}`, mapped affinely onto
/// `[lower, lower + side]^d`.
#[derive(Clone, Debug, PartialEq)]
pub struct DyadicSpatialGrid {
    pub level: u32,
    pub dim: usize,
    pub lower: f64,
    pub side: f64,
}

impl DyadicSpatialGrid {
    pub fn unit(level: u32, dim: usize) -> Self {
        DyadicSpatialGrid {
            level,
            dim,
            lower: 0.0,
            side: 1.0,
        }
    }

    pub fn per_axis(&self) -> usize {
        1usize << self.level
    }

    pub fn len(&self) -> usize {
        self.per_axis().pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        self.side / (self.level as f64).exp2()
    }

    /// Multi-index `(k_1, ..., k_d)`, each in `1..=2^n`; the last axis varies fastest.
    pub fn multi_index(&self, i: usize) -> Vec<usize> {
        let side = self.per_axis();
        let mut k = vec![0; self.dim];
        let mut rem = i;
        for c in (0..self.dim).rev() {
            k[c] = rem % side + 1;
            rem /= side;
        }
        k
    }

    pub fn point(&self, i: usize) -> Vec<f64> {
        let h = self.spacing();
        self.multi_index(i).into_iter().map(|k| self.lower + k as f64 * h).collect()
    }

    fn stride(&self, axis: usize) -> usize {
        self.per_axis().pow((self.dim - 1 - axis) as u32)
    }
}

/// Values `X_s(u) ∈ ℝ^width` for every `u ∈ D_n`.
#[derive(Clone, Debug, PartialEq)]
pub struct GridField {
    pub grid: DyadicSpatialGrid,
    pub width: usize,
    values: Vec<f64>,
}

impl GridField {
    pub fn from_fn<F>(grid: DyadicSpatialGrid, width: usize, mut f: F) -> Self
    where
        F: FnMut(&[f64], &mut [f64]),
    {
        let mut values = vec![0.0; grid.len() * width];
        for i in 0..grid.len() {
            let p = grid.point(i);
            f(&p, &mut values[i * width..(i + 1) * width]);
        }
        GridField { grid, width, values }
    }

    /// Field from optional per-point values; every grid point must be present.
    pub fn from_options(grid: DyadicSpatialGrid, width: usize, values: Vec<Option<Vec<f64>>>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::IncompleteField(values.len().min(grid.len())));
        }
        let mut flat = Vec::with_capacity(grid.len() * width);
        for (i, v) in values.into_iter().enumerate() {
            match v {
                Some(v) if v.len() == width => flat.extend(v),
                Some(v) => {
                    return Err(Error::invalid(format!("value at {i} has width {}, expected {width}", v.len())))
                }
                None => return Err(Error::IncompleteField(i)),
            }
        }
        Ok(GridField {
            grid,
            width,
            values: flat,
        })
    }

    pub fn value(&self, i: usize) -> &[f64] {
        &self.values[i * self.width..(i + 1) * self.width]
    }
}

pub trait Metric {
    fn distance(&self, a: &[f64], b: &[f64]) -> f64;
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Euclidean;

impl Metric for Euclidean {
    fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        distance(a, b)
    }
}

/// Sup-norm over all components (the uniform metric on sampled paths).
#[derive(Clone, Copy, Debug, Default)]
pub struct SupNorm;

impl Metric for SupNorm {
    fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
    }
}

/// A metric multiplied by a constant factor.
#[derive(Clone, Copy, Debug)]
pub struct Scaled<M>(pub M, pub f64);

impl<M: Metric> Metric for Scaled<M> {
    fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        self.1 * self.0.distance(a, b)
    }
}

impl<F: Fn(&[f64], &[f64]) -> f64> Metric for F {
    fn distance(&self, a: &[f64], b: &[f64]) -> f64 {
        self(a, b)
    }
}

/// Factor that turns `E ϱ^a ≤ K |u - v|^{d+b}` into the unit-constant form.
pub fn normalization_factor(moment_constant: f64, a: f64) -> f64 {
    moment_constant.powf(-1.0 / a)
}

/// `Y(s, n)`: the largest metric distance over axis-aligned neighbours in `D_n`.
pub fn adjacent_max<M: Metric + ?Sized>(field: &GridField, metric: &M) -> f64 {
    let grid = &field.grid;
    let side = grid.per_axis();
    let mut worst: f64 = 0.0;
    for axis in 0..grid.dim {
        let stride = grid.stride(axis);
        for i in 0..grid.len() {
            if (i / stride) % side + 1 < side {
                worst = worst.max(metric.distance(field.value(i), field.value(i + stride)));
            }
        }
    }
    worst
}

/// The field `u ↦ W_u` on `D_n ⊂ [0, 1]` (horizon-scaled times).
pub fn brownian_field(path: &DyadicBrownianPath, n: u32) -> Result<GridField> {
    if n > path.level() {
        return Err(Error::GridResolution(format!("path level {} is below grid level {n}", path.level())));
    }
    let grid = DyadicSpatialGrid::unit(n, 1);
    let width = path.dim();
    let mut values = Vec::with_capacity(grid.len() * width);
    for k in 1..=grid.per_axis() as u64 {
        values.extend_from_slice(path.point(n, k));
    }
    Ok(GridField { grid, width, values })
}

/// `Y(s, n)` for every `s ∈ S_n` at one level.
#[derive(Clone, Debug, PartialEq)]
pub struct LevelTable {
    pub n: u32,
    pub starts: Vec<DyadicTime>,
    pub values: Vec<f64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ChainingConfig {
    pub alpha: f64,
    pub a: f64,
    pub eta: f64,
    /// An increment counts as negligible below this fraction of the running total.
    pub converge_fraction: f64,
    /// Number of trailing levels that must all be negligible.
    pub converge_window: usize,
}

impl ChainingConfig {
    pub fn new(alpha: f64, a: f64, eta: f64) -> Self {
        ChainingConfig {
            alpha,
            a,
            eta,
            converge_fraction: 0.01,
            converge_window: 3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct LevelSummary {
    pub n: u32,
    pub sum_increment: f64,
    #[serde(rename = "max_scaled_Y")]
    pub max_scaled_y: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ChainingReport {
    pub alpha: f64,
    pub eta: f64,
    pub a: f64,
    pub levels: Vec<LevelSummary>,
    #[serde(skip)]
    pub partial_sums: Vec<f64>,
    pub fitted_alpha: Option<f64>,
    pub holder_constant: f64,
    pub converged: bool,
}

/// Least-squares Hölder exponent: minus the slope of `log2 median_s Y(s, n)` in `n`.
pub fn fit_alpha<'a, I>(levels: I) -> Option<f64>
where
    I: IntoIterator<Item = (u32, &'a [f64])>,
{
    stats::median_log2_decay(levels.into_iter().map(|(n, ys)| (n as f64, ys)))
}

pub fn chaining_series(tables: &[LevelTable], cfg: &ChainingConfig) -> Result<ChainingReport> {
    if !(cfg.alpha > 0.0 && cfg.a > 0.0 && cfg.eta > 0.0) {
        return Err(Error::invalid("alpha, a and eta must be positive"));
    }
    if tables.is_empty() {
        return Err(Error::invalid("no levels supplied"));
    }
    let mut levels = Vec::with_capacity(tables.len());
    let mut partial_sums = Vec::with_capacity(tables.len());
    let mut total = 0.0;
    let mut holder_constant: f64 = 0.0;
    for (idx, table) in tables.iter().enumerate() {
        if table.starts.len() != table.values.len() {
            return Err(Error::invalid(format!("level {} has mismatched starts and values", table.n)));
        }
        let bound = (cfg.eta * table.n as f64).exp2();
        if table.values.len() as f64 > bound * (1.0 + 1e-12) {
            return Err(Error::BudgetViolation {
                level: table.n,
                size: table.values.len(),
                bound,
            });
        }
        if idx > 0 {
            let prev = &tables[idx - 1];
            if prev.n >= table.n {
                return Err(Error::invalid("levels must be strictly increasing"));
            }
            if !prev.starts.iter().all(|s| table.starts.contains(s)) {
                return Err(Error::invalid(format!("S_{} is not contained in S_{}", prev.n, table.n)));
            }
        }
        if table.values.iter().any(|y| !(*y >= 0.0)) {
            return Err(Error::invalid(format!("negative or NaN Y at level {}", table.n)));
        }
        let scale = (cfg.alpha * table.n as f64).exp2();
        let scaled: Vec<f64> = table.values.iter().map(|y| scale * y).collect();
        let terms: Vec<f64> = scaled.iter().map(|v| v.powf(cfg.a)).collect();
        let inc = stats::pairwise_sum(&terms);
        let max_scaled = scaled.iter().copied().fold(0.0, f64::max);
        total += inc;
        holder_constant = holder_constant.max(max_scaled);
        partial_sums.push(total);
        levels.push(LevelSummary {
            n: table.n,
            sum_increment: inc,
            max_scaled_y: max_scaled,
        });
    }
    let w = cfg.converge_window;
    let converged = levels.len() >= w
        && levels[levels.len() - w..]
            .iter()
            .zip(&partial_sums[partial_sums.len() - w..])
            .all(|(l, s)| l.sum_increment <= cfg.converge_fraction * s);
    let fitted_alpha = if tables.len() >= 2 {
        fit_alpha(tables.iter().map(|t| (t.n, t.values.as_slice())))
    } else {
        None
    };
    Ok(ChainingReport {
        alpha: cfg.alpha,
        eta: cfg.eta,
        a: cfg.a,
        levels,
        partial_sums,
        fitted_alpha,
        holder_constant,
        converged,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct WorstPair {
    pub s: DyadicTime,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub t: DyadicTime,
    pub ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ModulusEstimate {
    pub alpha: f64,
    pub n: u32,
    pub c_hat: f64,
    pub pairs: usize,
    pub worst: Option<WorstPair>,
}

/// `Ĉ = max_{s ∈ S_n, |x - y| ≤ 2^{-n}, t ≥ s} |φ_{s,t}(x) - φ_{s,t}(y)| / |x - y|^α`.
pub fn holder_modulus(table: &FlowTable, alpha: f64, n: u32) -> Result<ModulusEstimate> {
    if !(alpha > 0.0 && alpha <= 1.0) {
        return Err(Error::invalid(format!("alpha = {alpha} must lie in (0, 1]")));
    }
    if n > table.start_level {
        return Err(Error::GridResolution(format!(
            "table start level {} is coarser than n = {n}",
            table.start_level
        )));
    }
    let reach = (-(n as f64)).exp2() * (1.0 + 1e-12);
    let np = table.num_points();
    let mut pairs = Vec::new();
    for i in 0..np {
        for k in i + 1..np {
            let sep = distance(table.point(i), table.point(k));
            if sep > 0.0 && sep <= reach {
                pairs.push((i, k, sep.powf(alpha)));
            }
        }
    }
    let starts: Vec<usize> = (0..table.starts.len())
        .filter(|&i| table.starts[i].index_at(n).is_some())
        .collect();
    if pairs.is_empty() || starts.is_empty() {
        return Err(Error::invalid("no (s, x, y) triples within the modulus regime"));
    }
    let mut best = ModulusEstimate {
        alpha,
        n,
        c_hat: 0.0,
        pairs: pairs.len() * starts.len(),
        worst: None,
    };
    for &si in &starts {
        for &(i, k, denom) in &pairs {
            let a = table.entry(si, i);
            let b = table.entry(si, k);
            for ((j, pa), (_, pb)) in a.iter().zip(b.iter()) {
                let ratio = distance(pa, pb) / denom;
                if ratio > best.c_hat || best.worst.is_none() {
                    best.c_hat = ratio;
                    best.worst = Some(WorstPair {
                        s: table.starts[si],
                        x: table.point(i).to_vec(),
                        y: table.point(k).to_vec(),
                        t: DyadicTime::new(j, table.level),
                        ratio,
                    });
                }
            }
        }
    }
    Ok(best)
}

/// Exponent window of the continuity lemma: `α ∈ (0, b/a)`, `η ∈ (0, b - αa)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct LemmaWindow {
    pub a: f64,
    pub b: f64,
    pub alpha_max: f64,
}

impl LemmaWindow {
    pub fn eta_max(&self, alpha: f64) -> Result<f64> {
        if !(alpha > 0.0 && alpha < self.alpha_max) {
            return Err(Error::invalid(format!("alpha = {alpha} outside (0, {})", self.alpha_max)));
        }
        Ok(self.b - alpha * self.a)
    }

    /// Whether `(alpha, eta)` lies strictly inside the window.
    pub fn admits(&self, alpha: f64, eta: f64) -> bool {
        self.eta_max(alpha).map(|m| eta > 0.0 && eta < m).unwrap_or(false)
    }
}

pub fn lemma_exponent_window(a: f64, b: f64) -> Result<LemmaWindow> {
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::invalid(format!("a = {a}, b = {b} must be positive")));
    }
    Ok(LemmaWindow { a, b, alpha_max: b / a })
}

/// Window for the flow modulus from the two-point moment bound of order `a` in
/// dimension `d`: `α < (a - 1 - d)/a`, `η < a - 1 - d - αa`.
pub fn flow_bridge_window(a: f64, d: usize) -> Result<LemmaWindow> {
    let b = a - 1.0 - d as f64;
    if !(a > 0.0 && b > 0.0) {
        return Err(Error::invalid(format!("moment order a = {a} must exceed 1 + d = {}", 1 + d)));
    }
    lemma_exponent_window(a, b)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn single_pair() {
        let grid = DyadicSpatialGrid::unit(1, 1);
        let field = GridField::from_options(grid, 1, vec![Some(vec![0.3]), Some(vec![0.1])]).unwrap();
        assert!((adjacent_max(&field, &Euclidean) - 0.2).abs() < 1e-15);
    }

    #[test]
    fn identity_field() {
        for n in 0..8 {
            let field = GridField::from_fn(DyadicSpatialGrid::unit(n, 1), 1, |u, out| out[0] = u[0]);
            let y = adjacent_max(&field, &Euclidean);
            if n == 0 {
                assert_eq!(y, 0.0);
            } else {
                assert_eq!(y, (-(n as f64)).exp2());
            }
        }
        let field = GridField::from_fn(DyadicSpatialGrid::unit(3, 2), 2, |u, out| out.copy_from_slice(u));
        assert_eq!(adjacent_max(&field, &Euclidean), 0.125);
    }

    #[test]
    fn incomplete_field() {
        let grid = DyadicSpatialGrid::unit(1, 1);
        let e = GridField::from_options(grid, 1, vec![Some(vec![0.3]), None]).unwrap_err();
        assert!(matches!(e, Error::IncompleteField(1)));
    }

    #[test]
    fn larger_metric_larger_y() {
        let field = GridField::from_fn(DyadicSpatialGrid::unit(4, 1), 1, |u, out| out[0] = (7.0 * u[0]).sin());
        let base = adjacent_max(&field, &Euclidean);
        let big = adjacent_max(&field, &Scaled(Euclidean, 2.0));
        assert_eq!(big, 2.0 * base);
        let closure = |a: &[f64], b: &[f64]| (a[0] - b[0]).abs() + 1.0;
        assert!(adjacent_max(&field, &closure) >= base);
    }

    fn identity_tables(levels: std::ops::RangeInclusive<u32>) -> Vec<LevelTable> {
        levels
            .map(|n| LevelTable {
                n,
                starts: (0..1u64 << n).map(|k| DyadicTime::new(k, n)).collect(),
                values: vec![(-(n as f64)).exp2(); 1 << n],
            })
            .collect()
    }

    #[test]
    fn identity_series_closed_forms() {
        let tables = identity_tables(1..=10);
        let r = chaining_series(&tables, &ChainingConfig::new(0.5, 2.0, 1.0)).unwrap();
        for l in &r.levels {
            assert!((l.sum_increment - 1.0).abs() < 1e-12);
        }
        assert!(!r.converged);
        assert!((r.fitted_alpha.unwrap() - 1.0).abs() < 1e-12);

        let r = chaining_series(&tables, &ChainingConfig::new(0.25, 8.0, 1.0)).unwrap();
        for l in &r.levels {
            let closed = (l.n as f64).exp2() * (-6.0 * l.n as f64).exp2();
            assert!((l.sum_increment / closed - 1.0).abs() < 1e-12);
        }
        assert!(r.converged);
        for (l, t) in r.levels.iter().zip(&tables) {
            for y in &t.values {
                assert!((0.25 * t.n as f64).exp2() * y <= r.holder_constant);
            }
            assert!(l.max_scaled_y <= r.holder_constant);
        }
    }

    #[test]
    fn zero_field_series() {
        let tables: Vec<LevelTable> = (1..=5)
            .map(|n| LevelTable {
                n,
                starts: (0..1u64 << n).map(|k| DyadicTime::new(k, n)).collect(),
                values: vec![0.0; 1 << n],
            })
            .collect();
        let r = chaining_series(&tables, &ChainingConfig::new(0.3, 4.0, 1.0)).unwrap();
        assert_eq!(*r.partial_sums.last().unwrap(), 0.0);
        assert_eq!(r.holder_constant, 0.0);
    }

    #[test]
    fn budget_violation() {
        let tables = identity_tables(1..=4);
        let e = chaining_series(&tables, &ChainingConfig::new(0.3, 4.0, 0.9)).unwrap_err();
        assert!(matches!(e, Error::BudgetViolation { level: 1, .. }));
    }

    #[test]
    fn windows() {
        let w = lemma_exponent_window(8.0, 3.0).unwrap();
        assert_eq!(w.alpha_max, 0.375);
        assert_eq!(w.eta_max(0.25).unwrap(), 1.0);
        assert!(lemma_exponent_window(2.0, 1e-12).unwrap().alpha_max < 1e-11);
        let bridge = flow_bridge_window(20.0, 1).unwrap();
        assert_eq!(bridge.alpha_max, 0.9);
        assert!((bridge.eta_max(0.8).unwrap() - 2.0).abs() < 1e-12);
        assert!(lemma_exponent_window(0.0, 1.0).is_err());
        assert!(lemma_exponent_window(1.0, -1.0).is_err());
    }
}
