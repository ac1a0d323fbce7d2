//! Counter-based Gaussian stream.
//!
//! Every draw is a pure function of `(seed, level, index, lane)`, so values never
//! depend on call order, thread scheduling or how far a path has been refined.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// SplitMix64 finalizer: a bijective avalanche mix on 64 bits.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

#[inline]
fn key(seed: u64, level: u32, index: u64, lane: u64) -> u64 {
    let mut h = mix64(seed.wrapping_add(GOLDEN));
    h = mix64(h ^ (level as u64).wrapping_mul(GOLDEN));
    h = mix64(h ^ index);
    mix64(h ^ lane.wrapping_mul(0xd6e8_feb8_6659_fd93))
}

/// Uniform on the open interval (0, 1) with 53 random bits.
#[inline]
fn open_unit(bits: u64) -> f64 {
    ((bits >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Standard normal draw addressed by `(seed, level, index, coordinate)`.
#[inline]
pub fn normal(seed: u64, level: u32, index: u64, coord: u32) -> f64 {
    let lane = (coord as u64) << 1;
    let u1 = open_unit(key(seed, level, index, lane));
    let u2 = open_unit(key(seed, level, index, lane | 1));
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

/// Purpose-separated sequential generator for auxiliary randomness
/// (perturbation pairs, anchors). Independent of the Brownian stream.
pub fn aux_rng(seed: u64, purpose: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(key(seed, u32::MAX, purpose, u64::MAX))
}
