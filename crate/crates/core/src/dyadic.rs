//! Exact dyadic rationals `k / 2^j` used for every time coordinate.
//!
//! Times are stored as fractions of the horizon `T`, so `DyadicTime::ONE` is the
//! terminal time whatever `T` is. Values are always kept in lowest terms, which
//! makes equality and grid membership exact integer checks.

use std::cmp::Ordering;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Deepest level any grid in the crate may use.
pub const MAX_LEVEL: u32 = 62;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct DyadicTime {
    num: u64,
    level: u32,
}

impl DyadicTime {
    pub const ZERO: DyadicTime = DyadicTime { num: 0, level: 0 };
    pub const ONE: DyadicTime = DyadicTime { num: 1, level: 0 };

    /// `num / 2^level`, reduced to lowest terms.
    pub fn new(num: u64, level: u32) -> Self {
        assert!(level <= MAX_LEVEL, "dyadic level {level} exceeds {MAX_LEVEL}");
        let mut t = DyadicTime { num, level };
        if num == 0 {
            t.level = 0;
            return t;
        }
        let shift = num.trailing_zeros().min(level);
        t.num >>= shift;
        t.level -= shift;
        t
    }

    /// Exact conversion of a finite non-negative float.
    pub fn from_f64(x: f64) -> Result<Self> {
        if !x.is_finite() || x < 0.0 {
            return Err(Error::invalid(format!("time {x} is not a finite non-negative number")));
        }
        if x == 0.0 {
            return Ok(Self::ZERO);
        }
        let bits = x.to_bits();
        let exp = ((bits >> 52) & 0x7ff) as i64;
        let frac = bits & ((1u64 << 52) - 1);
        let (mant, exp) = if exp == 0 {
            (frac, -1074)
        } else {
            (frac | (1u64 << 52), exp - 1075)
        };
        if exp >= 0 {
            let num = mant
                .checked_shl(exp as u32)
                .filter(|v| v >> exp == mant)
                .ok_or_else(|| Error::invalid(format!("time {x} too large")))?;
            return Ok(Self::new(num, 0));
        }
        let tz = mant.trailing_zeros() as i64;
        let level = (-exp - tz.min(-exp)) as u64;
        if level > MAX_LEVEL as u64 {
            return Err(Error::GridResolution(format!(
                "time {x} needs dyadic level {level} > {MAX_LEVEL}"
            )));
        }
        Ok(Self::new(mant >> tz.min(-exp), level as u32))
    }

    pub fn num(self) -> u64 {
        self.num
    }

    pub fn level(self) -> u32 {
        self.level
    }

    /// Index of this time on the level-`level` grid, if it lies on it.
    pub fn index_at(self, level: u32) -> Option<u64> {
        if self.level > level {
            None
        } else {
            self.num.checked_shl(level - self.level).filter(|v| v >> (level - self.level) == self.num)
        }
    }

    pub fn index_at_or_err(self, level: u32) -> Result<u64> {
        self.index_at(level).ok_or_else(|| {
            Error::GridResolution(format!("time {self} is not on the level-{level} grid"))
        })
    }

    pub fn to_f64(self) -> f64 {
        self.num as f64 / (self.level as f64).exp2()
    }

    /// Whether the time lies in the closed unit interval `[0, 1]` (i.e. `[0, T]`).
    pub fn in_unit_interval(self) -> bool {
        self <= Self::ONE
    }

    pub fn checked_add(self, other: Self) -> Option<Self> {
        let level = self.level.max(other.level);
        let a = self.index_at(level)?;
        let b = other.index_at(level)?;
        Some(Self::new(a.checked_add(b)?, level))
    }

    pub fn checked_sub(self, other: Self) -> Option<Self> {
        let level = self.level.max(other.level);
        let a = self.index_at(level)?;
        let b = other.index_at(level)?;
        Some(Self::new(a.checked_sub(b)?, level))
    }
}

impl Ord for DyadicTime {
    fn cmp(&self, other: &Self) -> Ordering {
        let level = self.level.max(other.level);
        let a = (self.num as u128) << (level - self.level);
        let b = (other.num as u128) << (level - other.level);
        a.cmp(&b)
    }
}

impl PartialOrd for DyadicTime {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for DyadicTime {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.level == 0 {
            write!(f, "{}", self.num)
        } else {
            write!(f, "{}/2^{}", self.num, self.level)
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn normalizes() {
        let t = DyadicTime::new(4, 3);
        assert_eq!((t.num(), t.level()), (1, 1));
        assert_eq!(DyadicTime::new(0, 7), DyadicTime::ZERO);
        assert_eq!(DyadicTime::new(8, 3), DyadicTime::ONE);
    }

    #[test]
    fn grid_membership() {
        let t = DyadicTime::new(3, 3);
        assert_eq!(t.index_at(3), Some(3));
        assert_eq!(t.index_at(5), Some(12));
        assert_eq!(t.index_at(2), None);
    }

    #[test]
    fn float_round_trip() {
        for x in [0.0, 0.5, 0.375, 1.0, 3.0, 1.0 / 1024.0] {
            assert_eq!(DyadicTime::from_f64(x).unwrap().to_f64(), x);
        }
        let third = DyadicTime::from_f64(1.0 / 3.0).unwrap();
        assert!(third.level() > 50);
        assert!(DyadicTime::from_f64(-0.5).is_err());
        assert!(DyadicTime::from_f64(f64::NAN).is_err());
    }

    #[test]
    fn ordering_and_arithmetic() {
        let a = DyadicTime::new(1, 2);
        let b = DyadicTime::new(3, 3);
        assert!(a < b);
        assert_eq!(a.checked_add(b), Some(DyadicTime::new(5, 3)));
        assert_eq!(b.checked_sub(a), Some(DyadicTime::new(1, 3)));
        assert_eq!(a.checked_sub(b), None);
    }
}
