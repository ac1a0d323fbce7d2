//! Seeded Brownian paths on nested dyadic grids (Lévy construction).
//!
//! Level 0 draws `W_T`; each further level draws the midpoints of the previous
//! cells from the Brownian-bridge law. Midpoint `i` of level `j` always uses the
//! counter-stream key `(seed, j, i)`, so a path sampled at level `m` agrees
//! bit-for-bit with any finer sampling at the level-`m` times, and a window of
//! the path is bit-identical to the same stretch of the full path.

use std::io::{Read, Write};

use crate::dyadic::DyadicTime;
use crate::error::{Error, Result};
use crate::rng;

/// Upper bound on the sampling level (2^30 cells).
pub const MAX_PATH_LEVEL: u32 = 30;

const MAGIC: &[u8; 8] = b"FLBMPATH";
const FORMAT_VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct DyadicBrownianPath {
    seed: u64,
    dim: usize,
    horizon: f64,
    level: u32,
    /// Global level-`level` index of the first stored point.
    first: u64,
    values: Vec<f64>,
}

impl DyadicBrownianPath {
    pub fn generate(seed: u64, dim: usize, horizon: f64, level: u32) -> Result<Self> {
        Self::generate_window(seed, dim, horizon, level, DyadicTime::ZERO, DyadicTime::ONE)
    }

    /// The path restricted to `[start, end]` (fractions of the horizon), sampled at
    /// `level`. Values coincide bit-exactly with [`generate`](Self::generate).
    pub fn generate_window(
        seed: u64,
        dim: usize,
        horizon: f64,
        level: u32,
        start: DyadicTime,
        end: DyadicTime,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("dimension must be at least 1"));
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::invalid(format!("horizon must be positive, got {horizon}")));
        }
        if level > MAX_PATH_LEVEL {
            return Err(Error::invalid(format!("level {level} exceeds {MAX_PATH_LEVEL}")));
        }
        if !(start < end && end <= DyadicTime::ONE) {
            return Err(Error::invalid(format!("window [{start}, {end}] is not inside [0, 1]")));
        }
        let sd = horizon.sqrt();
        let mut values = vec![0.0; 2 * dim];
        for c in 0..dim {
            values[dim + c] = sd * rng::normal(seed, 0, 0, c as u32);
        }
        let mut path = DyadicBrownianPath {
            seed,
            dim,
            horizon,
            level: 0,
            first: 0,
            values,
        };
        while path.level < level {
            path = path.refine_within(start, end);
        }
        Ok(path)
    }

    /// One level finer; existing grid values are kept bit-exactly.
    pub fn refine(&self) -> Self {
        let (start, end) = self.span();
        self.refine_within(start, end)
    }

    pub fn refined_to(&self, level: u32) -> Result<Self> {
        if level > MAX_PATH_LEVEL {
            return Err(Error::invalid(format!("level {level} exceeds {MAX_PATH_LEVEL}")));
        }
        let mut p = self.clone();
        while p.level < level {
            p = p.refine();
        }
        Ok(p)
    }

    fn refine_within(&self, start: DyadicTime, end: DyadicTime) -> Self {
        let d = self.dim;
        let new_level = self.level + 1;
        let sd = (self.horizon / (self.level as f64 + 2.0).exp2()).sqrt();
        let lo = floor_index(start, new_level);
        let hi = ceil_index(end, new_level);
        let mut values = Vec::with_capacity(((hi - lo + 1) as usize) * d);
        for g in lo..=hi {
            let parent = g / 2;
            let a = self.local(parent);
            if g % 2 == 0 {
                values.extend_from_slice(&self.values[a * d..(a + 1) * d]);
            } else {
                for c in 0..d {
                    let left = self.values[a * d + c];
                    let right = self.values[(a + 1) * d + c];
                    let z = rng::normal(self.seed, new_level, parent, c as u32);
                    values.push(0.5 * (left + right) + sd * z);
                }
            }
        }
        DyadicBrownianPath {
            seed: self.seed,
            dim: d,
            horizon: self.horizon,
            level: new_level,
            first: lo,
            values,
        }
    }

    #[inline]
    fn local(&self, global: u64) -> usize {
        (global - self.first) as usize
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    /// Stored values, time-major then coordinate.
    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Global index range `[first, last]` stored at the native level.
    pub fn index_range(&self) -> (u64, u64) {
        (self.first, self.first + (self.values.len() / self.dim) as u64 - 1)
    }

    pub fn is_full(&self) -> bool {
        self.index_range() == (0, 1u64 << self.level)
    }

    /// Time span covered, as fractions of the horizon.
    pub fn span(&self) -> (DyadicTime, DyadicTime) {
        let (a, b) = self.index_range();
        (DyadicTime::new(a, self.level), DyadicTime::new(b, self.level))
    }

    /// Whether the level-`m` indices `from..=to` are all stored.
    pub fn covers(&self, m: u32, from: u64, to: u64) -> bool {
        if m > self.level {
            return false;
        }
        let (a, b) = self.index_range();
        let shift = self.level - m;
        from << shift >= a && to << shift <= b
    }

    /// Value at level-`m` grid index `idx` (unchecked beyond debug assertions).
    #[inline]
    pub fn point(&self, m: u32, idx: u64) -> &[f64] {
        debug_assert!(m <= self.level);
        let i = self.local(idx << (self.level - m));
        &self.values[i * self.dim..(i + 1) * self.dim]
    }

    pub fn value_at(&self, t: DyadicTime) -> Result<&[f64]> {
        if !t.in_unit_interval() {
            return Err(Error::invalid(format!("time {t} lies outside [0, T]")));
        }
        let idx = t.index_at(self.level).ok_or_else(|| {
            Error::GridResolution(format!(
                "time {t} is not on the level-{} grid; refine first",
                self.level
            ))
        })?;
        let (a, b) = self.index_range();
        if idx < a || idx > b {
            return Err(Error::GridResolution(format!("time {t} lies outside the sampled window")));
        }
        Ok(self.point(self.level, idx))
    }

    pub fn value_at_f64(&self, t: f64) -> Result<&[f64]> {
        if !(0.0..=self.horizon).contains(&t) {
            return Err(Error::invalid(format!("time {t} lies outside [0, {}]", self.horizon)));
        }
        self.value_at(DyadicTime::from_f64(t / self.horizon)?)
    }

    /// Binary dump: header (magic, version, seed, d, T as num/den, level) then
    /// little-endian f64 values, time-major and coordinate-minor.
    pub fn write_to<W: Write>(&self, mut w: W) -> Result<()> {
        if !self.is_full() {
            return Err(Error::invalid("only full paths can be dumped"));
        }
        let (num, den) = horizon_ratio(self.horizon)?;
        w.write_all(MAGIC)?;
        w.write_all(&FORMAT_VERSION.to_le_bytes())?;
        w.write_all(&self.seed.to_le_bytes())?;
        w.write_all(&(self.dim as u32).to_le_bytes())?;
        w.write_all(&num.to_le_bytes())?;
        w.write_all(&den.to_le_bytes())?;
        w.write_all(&self.level.to_le_bytes())?;
        for v in &self.values {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    pub fn read_from<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic)?;
        if &magic != MAGIC {
            return Err(Error::format("not a flowlab path dump (bad magic)"));
        }
        let version = read_u32(&mut r)?;
        if version != FORMAT_VERSION {
            return Err(Error::format(format!("unsupported path dump version {version}")));
        }
        let seed = read_u64(&mut r)?;
        let dim = read_u32(&mut r)? as usize;
        let num = read_u64(&mut r)?;
        let den = read_u64(&mut r)?;
        let level = read_u32(&mut r)?;
        if dim == 0 || num == 0 || den == 0 || level > MAX_PATH_LEVEL {
            return Err(Error::format("corrupt path dump header"));
        }
        let len = ((1usize << level) + 1) * dim;
        let mut values = Vec::with_capacity(len);
        let mut buf = [0u8; 8];
        for _ in 0..len {
            r.read_exact(&mut buf)?;
            values.push(f64::from_le_bytes(buf));
        }
        Ok(DyadicBrownianPath {
            seed,
            dim,
            horizon: num as f64 / den as f64,
            level,
            first: 0,
            values,
        })
    }
}

fn floor_index(t: DyadicTime, level: u32) -> u64 {
    if level >= t.level() {
        t.num() << (level - t.level())
    } else {
        t.num() >> (t.level() - level)
    }
}

fn ceil_index(t: DyadicTime, level: u32) -> u64 {
    if level >= t.level() {
        t.num() << (level - t.level())
    } else {
        let s = t.level() - level;
        (t.num() + (1u64 << s) - 1) >> s
    }
}

/// Exact `num / den` representation of a float horizon, `den` a power of two.
fn horizon_ratio(t: f64) -> Result<(u64, u64)> {
    let bits = t.to_bits();
    let exp = ((bits >> 52) & 0x7ff) as i64;
    if exp == 0 || exp == 0x7ff {
        return Err(Error::invalid(format!("horizon {t} has no exact ratio encoding")));
    }
    let mut mant = (bits & ((1u64 << 52) - 1)) | (1u64 << 52);
    let mut e = exp - 1075;
    while mant % 2 == 0 && e < 0 {
        mant >>= 1;
        e += 1;
    }
    if e >= 0 {
        let num = mant
            .checked_shl(e as u32)
            .filter(|v| v >> e == mant)
            .ok_or_else(|| Error::invalid(format!("horizon {t} too large to encode")))?;
        Ok((num, 1))
    } else if -e <= 63 {
        Ok((mant, 1u64 << (-e)))
    } else {
        Err(Error::invalid(format!("horizon {t} too small to encode")))
    }
}

fn read_u32<R: Read>(r: &mut R) -> Result<u32> {
    let mut b = [0u8; 4];
    r.read_exact(&mut b)?;
    Ok(u32::from_le_bytes(b))
}

fn read_u64<R: Read>(r: &mut R) -> Result<u64> {
    let mut b = [0u8; 8];
    r.read_exact(&mut b)?;
    Ok(u64::from_le_bytes(b))
}
