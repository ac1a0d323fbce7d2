use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::brownian::DyadicBrownianPath;
use crate::drift::DriftSpec;
use crate::dyadic::DyadicTime;
use crate::error::{Error, Result};
use crate::rng;
use crate::stats;

/// A path `h: [r, u] → ℝ^d` sampled on the level-`m` grid with
/// `|h(t) - h(s)| ≤ |t - s|` and `max |h| ≤ N`.
#[derive(Clone, Debug, PartialEq)]
pub struct LipschitzPerturbation {
    start: DyadicTime,
    end: DyadicTime,
    level: u32,
    horizon: f64,
    bound: f64,
    dim: usize,
    values: Vec<f64>,
}

const LIP_TOL: f64 = 1e-12;

impl LipschitzPerturbation {
    pub fn new(
        start: DyadicTime,
        end: DyadicTime,
        level: u32,
        horizon: f64,
        bound: f64,
        dim: usize,
        values: Vec<f64>,
    ) -> Result<Self> {
        if start >= end {
            return Err(Error::invalid(format!("empty interval [{start}, {end}]")));
        }
        let a = start.index_at_or_err(level)?;
        let b = end.index_at_or_err(level)?;
        if dim == 0 || values.len() != (b - a + 1) as usize * dim {
            return Err(Error::invalid("perturbation values do not match the grid"));
        }
        let dt = horizon / (level as f64).exp2();
        for (i, p) in values.chunks_exact(dim).enumerate() {
            let norm = p.iter().map(|v| v * v).sum::<f64>().sqrt();
            if norm > bound * (1.0 + LIP_TOL) {
                return Err(Error::invalid(format!("|h| = {norm} exceeds N = {bound} at grid point {i}")));
            }
        }
        for (i, w) in values.windows(2 * dim).step_by(dim).enumerate() {
            let step = w[..dim].iter().zip(&w[dim..]).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
            if step > dt * (1.0 + LIP_TOL) {
                return Err(Error::invalid(format!("slope {} exceeds 1 on cell {i}", step / dt)));
            }
        }
        Ok(LipschitzPerturbation {
            start,
            end,
            level,
            horizon,
            bound,
            dim,
            values,
        })
    }

    /// Nearest admissible perturbation to `target`: per-coordinate slope limiting
    /// from the clipped anchor, then clamping into `reference ± band`, then into `[-N, N]`.
    fn project(
        like: (DyadicTime, DyadicTime, u32, f64, f64, usize),
        mut target: Vec<f64>,
        reference: Option<(&LipschitzPerturbation, f64)>,
    ) -> Result<Self> {
        let (start, end, level, horizon, bound, dim) = like;
        let coord_bound = bound / (dim as f64).sqrt();
        let max_step = horizon / (level as f64).exp2() / (dim as f64).sqrt();
        for c in 0..dim {
            target[c] = target[c].clamp(-coord_bound, coord_bound);
        }
        for i in dim..target.len() {
            let prev = target[i - dim];
            target[i] = target[i].clamp(prev - max_step, prev + max_step);
        }
        if let Some((h, band)) = reference {
            for (v, r) in target.iter_mut().zip(&h.values) {
                *v = v.clamp(r - band, r + band);
            }
        }
        for v in target.iter_mut() {
            *v = v.clamp(-coord_bound, coord_bound);
        }
        Self::new(start, end, level, horizon, bound, dim, target)
    }

    fn shape(&self) -> (DyadicTime, DyadicTime, u32, f64, f64, usize) {
        (self.start, self.end, self.level, self.horizon, self.bound, self.dim)
    }

    pub fn interval(&self) -> (DyadicTime, DyadicTime) {
        (self.start, self.end)
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn anchor(&self) -> &[f64] {
        &self.values[..self.dim]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Per-cell slope vectors.
    pub fn slopes(&self) -> Vec<Vec<f64>> {
        let dt = self.horizon / (self.level as f64).exp2();
        self.values
            .windows(2 * self.dim)
            .step_by(self.dim)
            .map(|w| (0..self.dim).map(|c| (w[self.dim + c] - w[c]) / dt).collect())
            .collect()
    }

    /// `max_t |h(t) - other(t)|` on the shared grid.
    pub fn sup_distance(&self, other: &Self) -> f64 {
        self.values
            .chunks_exact(self.dim)
            .zip(other.values.chunks_exact(self.dim))
            .map(|(a, b)| a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt())
            .fold(0.0, f64::max)
    }
}

/// `φ(h, W) = Σ_k b(t_k, W_{t_k} + h(t_k)) Δ` over the level-`m` cells of `[r, u]`.
pub fn phi(drift: &DriftSpec, path: &DyadicBrownianPath, h: &LipschitzPerturbation) -> Result<Vec<f64>> {
    let m = h.level;
    let a = h.start.index_at_or_err(m)?;
    let b = h.end.index_at_or_err(m)?;
    if path.dim() != h.dim || drift.dim != h.dim {
        return Err(Error::invalid("perturbation dimension does not match drift/path"));
    }
    if m > path.level() || !path.covers(m, a, b) {
        return Err(Error::GridResolution(format!("path does not cover level-{m} indices {a}..={b}")));
    }
    let dt = path.horizon() / (m as f64).exp2();
    let d = h.dim;
    let mut z = vec![0.0; d];
    let mut out = vec![0.0; d];
    let mut acc = vec![0.0; d];
    for (k, hv) in (a..b).zip(h.values.chunks_exact(d)) {
        let w = path.point(m, k);
        for c in 0..d {
            z[c] = w[c] + hv[c];
        }
        drift.eval(k as f64 * dt, &z, &mut out);
        for c in 0..d {
            acc[c] += out[c] * dt;
        }
    }
    Ok(acc)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum PairKind {
    Random,
    /// `h₂ = h₁ + 4l`.
    Shift,
    /// `h₂ = h₁ + 4l · triangle wave`.
    Sawtooth,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct OscillationReport {
    pub l: f64,
    pub num_seeds: usize,
    pub pairs_per_seed: usize,
    /// `|φ(h₁) - φ(h₂)|`, seed-major.
    pub samples: Vec<f64>,
    pub seed_maxima: Vec<f64>,
    pub p50: f64,
    pub p90: f64,
    pub p99: f64,
    pub max: f64,
}

impl OscillationReport {
    fn from_parts(l: f64, pairs_per_seed: usize, samples: Vec<f64>) -> Self {
        let mut sorted = samples.clone();
        sorted.sort_by(f64::total_cmp);
        let seed_maxima = samples
            .chunks(pairs_per_seed.max(1))
            .map(|c| c.iter().copied().fold(0.0, f64::max))
            .collect::<Vec<_>>();
        OscillationReport {
            l,
            num_seeds: seed_maxima.len(),
            pairs_per_seed,
            p50: stats::quantile_sorted(&sorted, 0.5),
            p90: stats::quantile_sorted(&sorted, 0.9),
            p99: stats::quantile_sorted(&sorted, 0.99),
            max: sorted.last().copied().unwrap_or(0.0),
            samples,
            seed_maxima,
        }
    }

    /// Concatenates per-seed reports at the same `l`, in the given order.
    pub fn merge(reports: &[OscillationReport]) -> Result<Self> {
        let first = reports.first().ok_or_else(|| Error::invalid("nothing to merge"))?;
        if reports.iter().any(|r| r.l != first.l || r.pairs_per_seed != first.pairs_per_seed) {
            return Err(Error::invalid("reports differ in l or pairs per seed"));
        }
        let samples = reports.iter().flat_map(|r| r.samples.iter().copied()).collect();
        Ok(Self::from_parts(first.l, first.pairs_per_seed, samples))
    }

    /// Fraction of seeds where some pair exceeds `C l^{4/3}`.
    pub fn exceedance_rate(&self, c: f64) -> f64 {
        let level = c * self.l.powf(4.0 / 3.0);
        let hits = self.seed_maxima.iter().filter(|m| **m > level).count();
        hits as f64 / self.seed_maxima.len().max(1) as f64
    }

    /// Union bound over the `1/l` intervals of length `l` covering `[0, T]`.
    pub fn union_bound(&self, c: f64) -> f64 {
        (self.exceedance_rate(c) / self.l).min(1.0)
    }
}

fn pair_rng(path: &DyadicBrownianPath, r: DyadicTime, u: DyadicTime) -> ChaCha8Rng {
    let purpose = rng::mix64(r.num() ^ (u64::from(r.level()) << 56)) ^ rng::mix64(u.num() ^ (u64::from(u.level()) << 48));
    rng::aux_rng(path.seed(), purpose)
}

/// Samples `|φ(h₁) - φ(h₂)|` over `num_pairs` random pairs plus the two corner
/// pairs, for `h₁` anchored so that `W_r + h₁(r)` is uniform on `[-√l, √l]^d`,
/// the range the path itself covers during the interval.
pub fn oscillation(
    drift: &DriftSpec,
    path: &DyadicBrownianPath,
    r: DyadicTime,
    u: DyadicTime,
    num_pairs: usize,
    bound: f64,
) -> Result<OscillationReport> {
    if drift.envelope1.is_singular() || drift.bound(path.horizon()) > 1.0 + 1e-12 {
        return Err(Error::invalid("oscillation needs a drift bounded by 1"));
    }
    let l_frac = u.checked_sub(r).filter(|l| *l > DyadicTime::ZERO).ok_or_else(|| {
        Error::invalid(format!("need r < u, got {r} and {u}"))
    })?;
    let l = l_frac.to_f64() * path.horizon();
    let m = path.level();
    let a = r.index_at_or_err(m)?;
    let b = u.index_at_or_err(m)?;
    let d = path.dim();
    let cells = (b - a) as usize;
    let shape = (r, u, m, path.horizon(), bound, d);
    let step = path.horizon() / (m as f64).exp2() / (d as f64).sqrt();
    let band = 4.0 * l / (d as f64).sqrt();
    let spread = l.sqrt();
    let mut gen = pair_rng(path, r, u);
    let walk = |gen: &mut ChaCha8Rng, anchor: Vec<f64>| {
        let mut v = anchor;
        v.reserve(cells * d);
        for i in 0..cells * d {
            let s: f64 = gen.gen_range(-1.0..=1.0);
            v.push(v[i] + s * step);
        }
        v
    };
    let w_r = path.point(m, a).to_vec();
    let mut samples = Vec::with_capacity(num_pairs + 2);
    let mut sample = |h1: &LipschitzPerturbation, h2: &LipschitzPerturbation| -> Result<()> {
        let p1 = phi(drift, path, h1)?;
        let p2 = phi(drift, path, h2)?;
        samples.push(p1.iter().zip(&p2).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt());
        Ok(())
    };
    for kind in std::iter::repeat(PairKind::Random).take(num_pairs).chain([PairKind::Shift, PairKind::Sawtooth]) {
        let anchor: Vec<f64> = w_r.iter().map(|w| -w + gen.gen_range(-spread..=spread)).collect();
        let h1 = LipschitzPerturbation::project(shape, walk(&mut gen, anchor), None)?;
        let target = match kind {
            PairKind::Random => {
                let anchor2 = h1.anchor().iter().map(|v| v + gen.gen_range(-band..=band)).collect();
                walk(&mut gen, anchor2)
            }
            PairKind::Shift => h1.values.iter().map(|v| v + band).collect(),
            PairKind::Sawtooth => {
                let period = (cells / 4).max(2) as f64;
                h1.values
                    .chunks_exact(d)
                    .enumerate()
                    .flat_map(|(i, p)| {
                        let phase = (i as f64 / period).fract();
                        let tri = 4.0 * (phase - 0.5).abs() - 1.0;
                        p.iter().map(move |v| v + band * tri).collect::<Vec<_>>()
                    })
                    .collect()
            }
        };
        let h2 = LipschitzPerturbation::project(h1.shape(), target, Some((&h1, band)))?;
        sample(&h1, &h2)?;
    }
    Ok(OscillationReport::from_parts(l, num_pairs + 2, samples))
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct ZetaFit {
    pub zeta: f64,
    pub slope: f64,
    pub r_squared: f64,
}

/// Best of `ln(rate) ≈ a - c l^{-ζ}` for `ζ ∈ {1/2, 1}`; zero rates are skipped.
pub fn zeta_proxy(ls: &[f64], rates: &[f64]) -> Option<ZetaFit> {
    let mut best: Option<ZetaFit> = None;
    for zeta in [0.5, 1.0] {
        let (xs, ys): (Vec<f64>, Vec<f64>) = ls
            .iter()
            .zip(rates)
            .filter(|(_, r)| **r > 0.0)
            .map(|(l, r)| (l.powf(-zeta), r.ln()))
            .unzip();
        if xs.len() < 3 {
            continue;
        }
        if let Some(fit) = stats::fit_line(&xs, &ys) {
            if best.map_or(true, |b| fit.r_squared > b.r_squared) {
                best = Some(ZetaFit {
                    zeta,
                    slope: fit.slope,
                    r_squared: fit.r_squared,
                });
            }
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;

    fn window(seed: u64, r: DyadicTime, u: DyadicTime, m: u32) -> DyadicBrownianPath {
        DyadicBrownianPath::generate_window(seed, 1, 1.0, m, r, u).unwrap()
    }

    #[test]
    fn lipschitz_membership_enforced() {
        let r = DyadicTime::new(1, 1);
        let u = DyadicTime::new(5, 3);
        let ok = LipschitzPerturbation::new(r, u, 3, 1.0, 1.0, 1, vec![0.0, 0.125]).unwrap();
        assert_eq!(ok.slopes(), vec![vec![1.0]]);
        assert!(LipschitzPerturbation::new(r, u, 3, 1.0, 1.0, 1, vec![0.0, 0.2]).is_err());
        assert!(LipschitzPerturbation::new(r, u, 3, 1.0, 0.1, 1, vec![0.0, 0.125]).is_err());
    }

    #[test]
    fn zero_drift_gives_zero() {
        let r = DyadicTime::new(1, 1);
        let u = DyadicTime::new(17, 5);
        let path = window(4, r, u, 15);
        let rep = oscillation(&DriftSpec::zero(1), &path, r, u, 20, 8.0).unwrap();
        assert!(rep.samples.iter().all(|s| *s == 0.0));
    }

    #[test]
    fn clamp_drift_obeys_lipschitz_integral_bound() {
        let drift = DriftSpec::lipschitz(1, 1.0);
        for lvl in 3..7u32 {
            let r = DyadicTime::new(1, 1);
            let u = DyadicTime::new((1u64 << (lvl - 1)) + 1, lvl);
            let l = (-(lvl as f64)).exp2();
            let path = window(lvl as u64, r, u, lvl + 8);
            let rep = oscillation(&drift, &path, r, u, 50, 8.0).unwrap();
            assert!(rep.max <= 4.0 * l * l * (1.0 + 1e-9), "l = {l}: {}", rep.max);
            assert!(rep.p50 <= rep.p90 && rep.p90 <= rep.p99 && rep.p99 <= rep.max);
        }
    }

    #[test]
    fn pairs_respect_band() {
        let r = DyadicTime::new(1, 1);
        let u = DyadicTime::new(9, 4);
        let path = window(7, r, u, 12);
        let shape = (r, u, 12, 1.0, 8.0, 1);
        let h1 = LipschitzPerturbation::project(shape, vec![0.3; 257], None).unwrap();
        let target: Vec<f64> = (0..257).map(|i| if i % 2 == 0 { 1.0 } else { -1.0 }).collect();
        let h2 = LipschitzPerturbation::project(shape, target, Some((&h1, 0.25))).unwrap();
        assert!(h1.sup_distance(&h2) <= 0.25 + 1e-15);
        let swap = (phi(&DriftSpec::sign(1, None), &path, &h1).unwrap()[0]
            - phi(&DriftSpec::sign(1, None), &path, &h2).unwrap()[0])
            .abs();
        let back = (phi(&DriftSpec::sign(1, None), &path, &h2).unwrap()[0]
            - phi(&DriftSpec::sign(1, None), &path, &h1).unwrap()[0])
            .abs();
        assert_eq!(swap, back);
    }

    #[test]
    fn exceedance_and_zeta() {
        let rep = OscillationReport::from_parts(0.5, 2, vec![0.0, 1.0, 0.1, 0.2]);
        assert_eq!(rep.seed_maxima, vec![1.0, 0.2]);
        assert_eq!(rep.exceedance_rate(1.0), 0.5);
        let ls = [0.5, 0.25, 0.125, 0.0625];
        let rates: Vec<f64> = ls.iter().map(|l: &f64| (-l.powf(-1.0)).exp()).collect();
        let fit = zeta_proxy(&ls, &rates).unwrap();
        assert_eq!(fit.zeta, 1.0);
        assert!((fit.slope + 1.0).abs() < 1e-9);
    }
}
