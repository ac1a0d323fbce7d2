//! Pathwise Euler solves of `X_t = x + (W_t - W_s) + ∫_s^t b(r, X_r) dr` on a
//! dyadic solver grid, sharing one Brownian path across all start times and
//! start points.
//!
//! The recursion `X_{k+1} = X_k + (W_{k+1} - W_k) + b(t_k, X_k) Δ` is evaluated
//! with one fixed operation order everywhere, so restarting from a grid value
//! reproduces the continuation bit-for-bit and the residual of a solve is 0.

use std::io::{BufRead, Write};

use rayon::prelude::*;

use crate::brownian::DyadicBrownianPath;
use crate::drift::DriftSpec;
use crate::dyadic::DyadicTime;
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    level: u32,
    dim: usize,
    /// Level-`level` grid index of the first point.
    first: u64,
    points: Vec<f64>,
}

impl Trajectory {
    pub fn from_parts(level: u32, dim: usize, first: u64, points: Vec<f64>) -> Result<Self> {
        if dim == 0 || points.is_empty() || points.len() % dim != 0 {
            return Err(Error::invalid("trajectory needs a non-empty multiple of d values"));
        }
        Ok(Trajectory { level, dim, first, points })
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Grid index range `[first, last]` on the solver grid.
    pub fn index_range(&self) -> (u64, u64) {
        (self.first, self.first + self.len() as u64 - 1)
    }

    pub fn start(&self) -> DyadicTime {
        DyadicTime::new(self.first, self.level)
    }

    pub fn end(&self) -> DyadicTime {
        DyadicTime::new(self.index_range().1, self.level)
    }

    pub fn points(&self) -> &[f64] {
        &self.points
    }

    pub fn points_mut(&mut self) -> &mut [f64] {
        &mut self.points
    }

    /// Value at solver-grid index `idx`.
    pub fn point(&self, idx: u64) -> &[f64] {
        let i = (idx - self.first) as usize;
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn initial(&self) -> &[f64] {
        &self.points[..self.dim]
    }

    pub fn endpoint(&self) -> &[f64] {
        &self.points[self.points.len() - self.dim..]
    }

    pub fn at(&self, t: DyadicTime) -> Result<&[f64]> {
        let idx = t.index_at_or_err(self.level)?;
        let (a, b) = self.index_range();
        if idx < a || idx > b {
            return Err(Error::invalid(format!("time {t} outside trajectory [{}, {}]", self.start(), self.end())));
        }
        Ok(self.point(idx))
    }

    /// Iterator over `(grid index, value)`.
    pub fn iter(&self) -> impl Iterator<Item = (u64, &[f64])> + '_ {
        self.points
            .chunks_exact(self.dim)
            .enumerate()
            .map(move |(i, p)| (self.first + i as u64, p))
    }
}

pub(crate) fn distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

fn check_setup(drift: &DriftSpec, path: &DyadicBrownianPath, m: u32, from: u64, to: u64, x: &[f64]) -> Result<()> {
    if drift.dim != path.dim() || x.len() != path.dim() {
        return Err(Error::invalid(format!(
            "dimension mismatch: drift {}, path {}, start point {}",
            drift.dim,
            path.dim(),
            x.len()
        )));
    }
    if from > to {
        return Err(Error::invalid("start time after end time"));
    }
    if to > (1u64 << m) {
        return Err(Error::invalid("end time beyond the horizon"));
    }
    if !path.covers(m, from, to) {
        return Err(Error::GridResolution(format!(
            "path sampled at level {} does not cover level-{m} indices {from}..={to}",
            path.level()
        )));
    }
    Ok(())
}

/// One explicit Euler step; the single definition shared by solve and residual.
#[inline]
fn step(x: &[f64], w0: &[f64], w1: &[f64], b: &[f64], out: &mut [f64]) {
    for c in 0..x.len() {
        out[c] = x[c] + (w1[c] - w0[c]) + b[c];
    }
}

/// Low-level driver: advances `x` in place from grid index `from` to `to` on the
/// level-`m` grid, calling `visit` at every grid index including `from`.
pub fn integrate<F>(
    drift: &DriftSpec,
    path: &DyadicBrownianPath,
    m: u32,
    from: u64,
    to: u64,
    x: &mut [f64],
    mut visit: F,
) -> Result<()>
where
    F: FnMut(u64, &[f64]),
{
    check_setup(drift, path, m, from, to, x)?;
    let dt = path.horizon() / (m as f64).exp2();
    let d = x.len();
    let mut b = vec![0.0; d];
    let mut next = vec![0.0; d];
    visit(from, x);
    for j in from..to {
        drift.increment(j as f64 * dt, dt, x, &mut b);
        step(x, path.point(m, j), path.point(m, j + 1), &b, &mut next);
        x.copy_from_slice(&next);
        visit(j + 1, x);
    }
    Ok(())
}

/// Euler trajectory from `(s, x)` to `t` on the level-`m` grid.
pub fn solve(
    drift: &DriftSpec,
    path: &DyadicBrownianPath,
    s: DyadicTime,
    t: DyadicTime,
    x: &[f64],
    m: u32,
) -> Result<Trajectory> {
    let from = s.index_at_or_err(m)?;
    let to = t.index_at_or_err(m)?;
    let mut state = x.to_vec();
    let mut points = Vec::with_capacity(((to.saturating_sub(from) + 1) as usize) * x.len());
    integrate(drift, path, m, from, to, &mut state, |_, v| points.extend_from_slice(v))?;
    Ok(Trajectory {
        level: m,
        dim: x.len(),
        first: from,
        points,
    })
}

/// Endpoint of the solve from `(s, x)` to `t`, without storing the trajectory.
pub fn solve_endpoint(
    drift: &DriftSpec,
    path: &DyadicBrownianPath,
    s: DyadicTime,
    t: DyadicTime,
    x: &[f64],
    m: u32,
) -> Result<Vec<f64>> {
    let from = s.index_at_or_err(m)?;
    let to = t.index_at_or_err(m)?;
    let mut state = x.to_vec();
    integrate(drift, path, m, from, to, &mut state, |_, _| {})?;
    Ok(state)
}

/// `|φ_{s,t}(x) - φ_{u,t}(φ_{s,u}(x))|`.
pub fn composition_defect(
    drift: &DriftSpec,
    path: &DyadicBrownianPath,
    s: DyadicTime,
    u: DyadicTime,
    t: DyadicTime,
    x: &[f64],
    m: u32,
) -> Result<f64> {
    if !(s <= u && u <= t) {
        return Err(Error::invalid(format!("need s <= u <= t, got {s}, {u}, {t}")));
    }
    let direct = solve_endpoint(drift, path, s, t, x, m)?;
    let mid = solve_endpoint(drift, path, s, u, x, m)?;
    let composed = solve_endpoint(drift, path, u, t, &mid, m)?;
    Ok(distance(&direct, &composed))
}

/// Largest one-step defect `|X_{k+1} - X_k - (W_{k+1} - W_k) - b(t_k, X_k) Δ|`
/// along a stored trajectory; the partial sums of these defects make up the
/// integral-equation residual, and the value is exactly 0 for solver output.
pub fn residual(drift: &DriftSpec, path: &DyadicBrownianPath, traj: &Trajectory) -> Result<f64> {
    let (from, to) = traj.index_range();
    check_setup(drift, path, traj.level, from, to, traj.initial())?;
    let m = traj.level;
    let dt = path.horizon() / (m as f64).exp2();
    let d = traj.dim;
    let mut b = vec![0.0; d];
    let mut pred = vec![0.0; d];
    let mut worst: f64 = 0.0;
    for j in from..to {
        let x = traj.point(j);
        drift.increment(j as f64 * dt, dt, x, &mut b);
        step(x, path.point(m, j), path.point(m, j + 1), &b, &mut pred);
        worst = worst.max(distance(&pred, traj.point(j + 1)));
    }
    Ok(worst)
}

/// Largest distance between two trajectories over the times both grids share.
pub fn sup_distance(a: &Trajectory, b: &Trajectory) -> Result<f64> {
    let (coarse, fine) = if a.level <= b.level { (a, b) } else { (b, a) };
    let shift = fine.level - coarse.level;
    let (fa, fb) = fine.index_range();
    let mut worst: f64 = 0.0;
    let mut shared = 0usize;
    for (j, p) in coarse.iter() {
        let g = j << shift;
        if g >= fa && g <= fb {
            worst = worst.max(distance(p, fine.point(g)));
            shared += 1;
        }
    }
    if shared == 0 {
        return Err(Error::invalid("trajectories share no grid time"));
    }
    Ok(worst)
}

/// Increasing family of finite start sets `S_n` with `|S_n| <= 2^(eta n)`.
#[derive(Clone, Debug, PartialEq)]
pub struct StartSet {
    eta: f64,
    thinned: bool,
    explicit: Option<Vec<Vec<DyadicTime>>>,
}

impl StartSet {
    /// `S_n = {k / 2^n : 0 <= k < 2^n}` under budget exponent `eta`.
    pub fn dyadic(eta: f64) -> Result<Self> {
        if !(eta > 0.0) {
            return Err(Error::invalid(format!("eta = {eta} must be positive")));
        }
        Ok(StartSet {
            eta,
            thinned: false,
            explicit: None,
        })
    }

    /// `S_n` = the level-`floor(eta n)` grid (capped at level `n`); always within budget.
    pub fn thinned(eta: f64) -> Result<Self> {
        let mut s = Self::dyadic(eta)?;
        s.thinned = true;
        Ok(s)
    }

    /// Explicit sets `S_0, S_1, ...`; must be nested, inside `[0, 1)` and within budget.
    pub fn explicit(eta: f64, sets: Vec<Vec<DyadicTime>>) -> Result<Self> {
        let out = StartSet {
            eta,
            thinned: false,
            explicit: Some(sets),
        };
        let sets = out.explicit.as_ref().unwrap();
        for (n, set) in sets.iter().enumerate() {
            if set.iter().any(|s| *s >= DyadicTime::ONE) {
                return Err(Error::invalid(format!("S_{n} contains a time outside [0, 1)")));
            }
            if n > 0 && !sets[n - 1].iter().all(|s| set.contains(s)) {
                return Err(Error::invalid(format!("S_{} is not contained in S_{n}", n - 1)));
            }
            out.check_budget(n as u32, set.len())?;
        }
        Ok(out)
    }

    pub fn eta(&self) -> f64 {
        self.eta
    }

    pub fn check_budget(&self, n: u32, size: usize) -> Result<()> {
        let bound = (self.eta * n as f64).exp2();
        if size as f64 > bound * (1.0 + 1e-12) {
            return Err(Error::BudgetViolation { level: n, size, bound });
        }
        Ok(())
    }

    /// Sorted members of `S_n`.
    pub fn level(&self, n: u32) -> Result<Vec<DyadicTime>> {
        let set = match &self.explicit {
            Some(sets) => sets
                .get(n as usize)
                .cloned()
                .ok_or_else(|| Error::invalid(format!("start set S_{n} not provided")))?,
            None => {
                let j = if self.thinned {
                    ((self.eta * n as f64 + 1e-9).floor() as u32).min(n)
                } else {
                    n
                };
                (0..1u64 << j).map(|k| DyadicTime::new(k, j)).collect()
            }
        };
        self.check_budget(n, set.len())?;
        let mut set = set;
        set.sort();
        Ok(set)
    }
}

/// Spatial lattice `{k 2^{-n} : k ∈ [-K, K]^d}` listed in lexicographic order.
#[derive(Clone, Debug, PartialEq)]
pub struct Lattice {
    pub level: u32,
    pub half_width: u32,
    pub dim: usize,
}

impl Lattice {
    pub fn new(level: u32, half_width: u32, dim: usize) -> Self {
        Lattice { level, half_width, dim }
    }

    pub fn spacing(&self) -> f64 {
        (-(self.level as f64)).exp2()
    }

    pub fn len(&self) -> usize {
        (2 * self.half_width as usize + 1).pow(self.dim as u32)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Points as a flat `len * d` array.
    pub fn points(&self) -> Vec<f64> {
        let side = 2 * self.half_width as i64 + 1;
        let h = self.spacing();
        let mut out = Vec::with_capacity(self.len() * self.dim);
        for i in 0..self.len() as i64 {
            let mut rem = i;
            let mut coords = vec![0.0; self.dim];
            for c in (0..self.dim).rev() {
                coords[c] = ((rem % side) - self.half_width as i64) as f64 * h;
                rem /= side;
            }
            out.extend(coords);
        }
        out
    }
}

/// Sampled flow `φ_{s,t}(x)` for `s ∈ S_n`, lattice `x`, and every solver-grid `t ≥ s`.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowTable {
    pub drift: DriftSpec,
    pub seed: u64,
    pub horizon: f64,
    /// Solver level `m`.
    pub level: u32,
    /// Start-set level `n` (also the lattice level).
    pub start_level: u32,
    pub starts: Vec<DyadicTime>,
    pub dim: usize,
    /// Flat `npoints * d` lattice.
    pub lattice: Vec<f64>,
    /// Row-major over `(start, point)`.
    pub entries: Vec<Trajectory>,
}

impl FlowTable {
    pub fn build(
        drift: &DriftSpec,
        path: &DyadicBrownianPath,
        starts: &StartSet,
        lattice: &Lattice,
        m: u32,
    ) -> Result<Self> {
        let n = lattice.level;
        let s_set = starts.level(n)?;
        if drift.dim != lattice.dim || path.dim() != lattice.dim {
            return Err(Error::invalid("lattice dimension does not match drift/path"));
        }
        if n > m {
            return Err(Error::GridResolution(format!("start level {n} is finer than solver level {m}")));
        }
        let pts = lattice.points();
        let d = lattice.dim;
        let npts = lattice.len();
        let jobs: Vec<(usize, usize)> = (0..s_set.len()).flat_map(|i| (0..npts).map(move |k| (i, k))).collect();
        let entries = jobs
            .par_iter()
            .map(|&(i, k)| solve(drift, path, s_set[i], DyadicTime::ONE, &pts[k * d..(k + 1) * d], m))
            .collect::<Result<Vec<_>>>()?;
        Ok(FlowTable {
            drift: drift.clone(),
            seed: path.seed(),
            horizon: path.horizon(),
            level: m,
            start_level: n,
            starts: s_set,
            dim: d,
            lattice: pts,
            entries,
        })
    }

    pub fn num_points(&self) -> usize {
        self.lattice.len() / self.dim
    }

    pub fn point(&self, k: usize) -> &[f64] {
        &self.lattice[k * self.dim..(k + 1) * self.dim]
    }

    pub fn entry(&self, start: usize, point: usize) -> &Trajectory {
        &self.entries[start * self.num_points() + point]
    }

    /// Largest residual over all entries, against the path regenerated from the seed.
    pub fn max_residual(&self, path: &DyadicBrownianPath) -> Result<f64> {
        if path.seed() != self.seed {
            return Err(Error::invalid("path seed does not match the table"));
        }
        let worst = self
            .entries
            .par_iter()
            .map(|e| residual(&self.drift, path, e))
            .collect::<Result<Vec<_>>>()?;
        Ok(worst.into_iter().fold(0.0, f64::max))
    }

    /// CSV export: metadata comment line, header, then rows ordered by `(s, x, t)`.
    pub fn write_csv<W: Write>(&self, mut w: W, config_hash: &str) -> Result<()> {
        writeln!(
            w,
            "# flowlab flow-table config={config_hash} drift={} horizon={} m={} n={} d={}",
            self.drift.id, self.horizon, self.level, self.start_level, self.dim
        )?;
        let mut header = String::from("seed,s_num,s_level,t_num,t_level");
        for c in 0..self.dim {
            header.push_str(&format!(",x{c}"));
        }
        for c in 0..self.dim {
            header.push_str(&format!(",phi{c}"));
        }
        writeln!(w, "{header}")?;
        let mut line = String::new();
        for (i, s) in self.starts.iter().enumerate() {
            for k in 0..self.num_points() {
                let x = self.point(k);
                for (j, phi) in self.entry(i, k).iter() {
                    let t = DyadicTime::new(j, self.level);
                    line.clear();
                    line.push_str(&format!("{},{},{},{},{}", self.seed, s.num(), s.level(), t.num(), t.level()));
                    for v in x.iter().chain(phi) {
                        line.push(',');
                        line.push_str(&v.to_string());
                    }
                    writeln!(w, "{line}")?;
                }
            }
        }
        Ok(())
    }

    /// Reads a table written by [`write_csv`](Self::write_csv); the drift must be supplied.
    pub fn read_csv<R: BufRead>(r: R, drift: &DriftSpec) -> Result<Self> {
        let mut lines = r.lines();
        let meta = lines.next().ok_or_else(|| Error::format("empty flow table"))??;
        let field = |key: &str| -> Result<String> {
            meta.split_whitespace()
                .find_map(|kv| kv.strip_prefix(key).and_then(|v| v.strip_prefix('=')))
                .map(str::to_owned)
                .ok_or_else(|| Error::format(format!("flow table metadata lacks {key}")))
        };
        let parse_num = |key: &str| -> Result<f64> {
            field(key)?.parse::<f64>().map_err(|_| Error::format(format!("bad {key}")))
        };
        let horizon = parse_num("horizon")?;
        let level = parse_num("m")? as u32;
        let start_level = parse_num("n")? as u32;
        let dim = parse_num("d")? as usize;
        lines.next().ok_or_else(|| Error::format("flow table lacks a header"))??;

        let mut seed = 0u64;
        let mut starts: Vec<DyadicTime> = Vec::new();
        let mut lattice: Vec<f64> = Vec::new();
        let mut entries: Vec<Trajectory> = Vec::new();
        let mut current: Option<(DyadicTime, Vec<f64>, u64, Vec<f64>)> = None;

        let flush = |cur: Option<(DyadicTime, Vec<f64>, u64, Vec<f64>)>, entries: &mut Vec<Trajectory>| -> Result<()> {
            if let Some((_, _, first, pts)) = cur {
                entries.push(Trajectory::from_parts(level, dim, first, pts)?);
            }
            Ok(())
        };

        for line in lines {
            let line = line?;
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let cols: Vec<&str> = line.split(',').collect();
            if cols.len() != 5 + 2 * dim {
                return Err(Error::format(format!("row has {} columns, expected {}", cols.len(), 5 + 2 * dim)));
            }
            let int = |i: usize| -> Result<u64> {
                cols[i].parse::<u64>().map_err(|_| Error::format(format!("bad integer {:?}", cols[i])))
            };
            let float = |i: usize| -> Result<f64> {
                cols[i].parse::<f64>().map_err(|_| Error::format(format!("bad float {:?}", cols[i])))
            };
            seed = int(0)?;
            let s = DyadicTime::new(int(1)?, int(2)? as u32);
            let t = DyadicTime::new(int(3)?, int(4)? as u32);
            let x: Vec<f64> = (0..dim).map(|c| float(5 + c)).collect::<Result<_>>()?;
            let phi: Vec<f64> = (0..dim).map(|c| float(5 + dim + c)).collect::<Result<_>>()?;
            let same = matches!(&current, Some((cs, cx, _, _)) if *cs == s && *cx == x);
            if !same {
                let prev = current.take();
                flush(prev, &mut entries)?;
                if starts.last() != Some(&s) {
                    starts.push(s);
                }
                if starts.len() == 1 {
                    lattice.extend_from_slice(&x);
                }
                current = Some((s, x, t.index_at_or_err(level)?, Vec::new()));
            }
            if let Some((_, _, _, pts)) = current.as_mut() {
                pts.extend_from_slice(&phi);
            }
        }
        flush(current, &mut entries)?;
        if lattice.is_empty() || entries.len() != starts.len() * (lattice.len() / dim) {
            return Err(Error::format("flow table rows do not form a full (s, x) grid"));
        }
        Ok(FlowTable {
            drift: drift.clone(),
            seed,
            horizon,
            level,
            start_level,
            starts,
            dim,
            lattice,
            entries,
        })
    }
}

#[derive(Clone, Copy, Debug, PartialEq, serde::Serialize)]
pub struct MonotonicityReport {
    pub checked_pairs: usize,
    pub violations: usize,
    /// Largest `φ(x) - φ(y)` over violating pairs `x < y` (0 when none).
    pub worst_gap: f64,
}

/// Order preservation `x < y ⇒ φ_{s,t}(x) ≤ φ_{s,t}(y)` over every stored `(s, t)`.
pub fn monotonicity_check(table: &FlowTable) -> Result<MonotonicityReport> {
    if table.dim != 1 {
        return Err(Error::UnsupportedDimension(table.dim));
    }
    let np = table.num_points();
    if table.lattice.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::invalid("lattice is not sorted"));
    }
    let mut report = MonotonicityReport {
        checked_pairs: 0,
        violations: 0,
        worst_gap: 0.0,
    };
    for i in 0..table.starts.len() {
        for k in 0..np.saturating_sub(1) {
            let lo = table.entry(i, k);
            let hi = table.entry(i, k + 1);
            for (a, b) in lo.points().iter().zip(hi.points()) {
                report.checked_pairs += 1;
                if a > b {
                    report.violations += 1;
                    report.worst_gap = report.worst_gap.max(a - b);
                }
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(seed: u64, level: u32) -> DyadicBrownianPath {
        DyadicBrownianPath::generate(seed, 1, 1.0, level).unwrap()
    }

    #[test]
    fn zero_drift_is_translation() {
        let p = path(3, 10);
        let s = DyadicTime::new(1, 3);
        let traj = solve(&DriftSpec::zero(1), &p, s, DyadicTime::ONE, &[0.25], 10).unwrap();
        let ws = p.value_at(s).unwrap()[0];
        for (j, v) in traj.iter() {
            let closed = 0.25 + (p.point(10, j)[0] - ws);
            assert!((v[0] - closed).abs() <= 2f64.powi(-40) * closed.abs().max(1.0));
        }
    }

    #[test]
    fn grid_mismatch_is_reported() {
        let p = path(1, 4);
        let e = solve(&DriftSpec::zero(1), &p, DyadicTime::ZERO, DyadicTime::ONE, &[0.0], 6).unwrap_err();
        assert!(matches!(e, Error::GridResolution(_)));
        let e = solve(&DriftSpec::zero(1), &p, DyadicTime::new(1, 5), DyadicTime::ONE, &[0.0], 4).unwrap_err();
        assert!(matches!(e, Error::GridResolution(_)));
    }

    #[test]
    fn composition_exact_on_shared_grid() {
        let p = path(8, 9);
        let drift = DriftSpec::sign(1, Some(10.0));
        let d = composition_defect(
            &drift,
            &p,
            DyadicTime::new(1, 4),
            DyadicTime::new(85, 8),
            DyadicTime::new(7, 3),
            &[0.1],
            9,
        )
        .unwrap();
        assert_eq!(d, 0.0);
    }

    #[test]
    fn residual_zero_and_perturbed() {
        let p = path(2, 8);
        let drift = DriftSpec::lipschitz(1, -1.5);
        let mut traj = solve(&drift, &p, DyadicTime::ZERO, DyadicTime::ONE, &[0.3], 8).unwrap();
        assert_eq!(residual(&drift, &p, &traj).unwrap(), 0.0);
        let eps = 1e-3;
        traj.points_mut()[17] += eps;
        assert!(residual(&drift, &p, &traj).unwrap() >= eps * (1.0 - 1e-9));
    }

    #[test]
    fn monotonicity_requires_1d() {
        let p = DyadicBrownianPath::generate(1, 2, 1.0, 4).unwrap();
        let table = FlowTable::build(&DriftSpec::zero(2), &p, &StartSet::dyadic(1.0).unwrap(), &Lattice::new(1, 1, 2), 4).unwrap();
        assert!(matches!(monotonicity_check(&table), Err(Error::UnsupportedDimension(2))));
    }

    #[test]
    fn start_set_budget() {
        assert!(StartSet::dyadic(1.0).unwrap().level(5).is_ok());
        let thin = StartSet::thinned(0.5).unwrap();
        assert_eq!(thin.level(4).unwrap().len(), 4);
        assert_eq!(thin.level(5).unwrap().len(), 4);
        assert!(matches!(
            StartSet::dyadic(0.5).unwrap().level(4),
            Err(Error::BudgetViolation { .. })
        ));
        let nested = StartSet::explicit(
            1.0,
            vec![vec![DyadicTime::ZERO], vec![DyadicTime::ZERO, DyadicTime::new(1, 1)]],
        );
        assert!(nested.is_ok());
        let broken = StartSet::explicit(1.0, vec![vec![DyadicTime::new(1, 1)], vec![DyadicTime::ZERO]]);
        assert!(broken.is_err());
    }

    #[test]
    fn lattice_points() {
        let l = Lattice::new(2, 1, 2);
        assert_eq!(l.len(), 9);
        let p = l.points();
        assert_eq!(&p[..4], &[-0.25, -0.25, -0.25, 0.0]);
        assert_eq!(&p[16..], &[0.25, 0.25]);
    }
}
