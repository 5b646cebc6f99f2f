//! Counter-based seed derivation.
//!
//! Every random choice in the crate is a pure function of a master seed, a
//! purpose tag and an index, so designs can be rebuilt bit-for-bit from their
//! seed without storing random tapes.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GOLDEN: u64 = 0x9e37_79b9_7f4a_7c15;

/// Purpose tags. Distinct tags give independent streams from one seed.
pub mod tags {
    pub const KWISE_COEFF: u64 = 0x01;
    pub const IDENT: u64 = 0x10;
    pub const LIST_FILTER: u64 = 0x11;
    pub const DISJUNCT: u64 = 0x12;
    pub const FOREACH_SINGLE: u64 = 0x13;
    pub const FOREACH_BANDS: u64 = 0x14;
    pub const BANDS: u64 = 0x15;
    pub const NOISY: u64 = 0x20;
    pub const SPLIT_COPY: u64 = 0x21;
    pub const VOTE_BUCKET: u64 = 0x22;
    pub const VOTE_INNER: u64 = 0x23;
    pub const VOTE_FINAL: u64 = 0x24;
    pub const NOISE: u64 = 0x30;
    pub const HH_IDENT: u64 = 0x40;
    pub const HH_FILTER: u64 = 0x41;
    pub const HH_EST: u64 = 0x42;
    pub const WEAK_HASH: u64 = 0x50;
    pub const WEAK_GAUSS: u64 = 0x51;
    pub const CS_POS: u64 = 0x52;
    pub const CS_SIGN: u64 = 0x53;
}

/// SplitMix64 finalizer.
#[inline]
pub fn mix64(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Derives a 64-bit value keyed by `(seed, tag, index)`.
#[inline]
pub fn derive(seed: u64, tag: u64, index: u64) -> u64 {
    let base = mix64(seed ^ mix64(tag.wrapping_add(GOLDEN)));
    mix64(base.wrapping_add(index.wrapping_mul(GOLDEN)).wrapping_add(GOLDEN))
}

/// Derives a value keyed by two indices.
#[inline]
pub fn derive2(seed: u64, tag: u64, a: u64, b: u64) -> u64 {
    derive(derive(seed, tag, a), tag, b)
}

/// A seeded sequential stream for bulk draws (coefficients, supports).
pub fn stream(seed: u64, tag: u64, index: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(derive(seed, tag, index))
}

/// Uniform value in `[0, bound)` from a derived word (multiply-shift, no modulo bias
/// beyond 2^-64 resolution).
#[inline]
pub fn below(word: u64, bound: u64) -> u64 {
    ((word as u128 * bound as u128) >> 64) as u64
}

/// Uniform in the open interval (0, 1).
#[inline]
pub fn unit_open(word: u64) -> f64 {
    ((word >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
}

/// Standard normal sample keyed by `key` (Box–Muller over two derived words).
pub fn gaussian(key: u64) -> f64 {
    let u1 = unit_open(mix64(key ^ GOLDEN));
    let u2 = unit_open(mix64(key.wrapping_add(0x632b_e59b_d9b4_e019)));
    (-2.0 * u1.ln()).sqrt() * (std::f64::consts::TAU * u2).cos()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn derive_separates_tags_and_indices() {
        assert_ne!(derive(1, 2, 3), derive(1, 3, 3));
        assert_ne!(derive(1, 2, 3), derive(1, 2, 4));
        assert_eq!(derive(1, 2, 3), derive(1, 2, 3));
    }

    #[test]
    fn gaussian_moments() {
        let n = 200_000u64;
        let (mut s, mut s2) = (0.0, 0.0);
        for i in 0..n {
            let g = gaussian(derive(9, 1, i));
            s += g;
            s2 += g * g;
        }
        let mean = s / n as f64;
        let var = s2 / n as f64 - mean * mean;
        assert!(mean.abs() < 0.01, "mean {mean}");
        assert!((var - 1.0).abs() < 0.02, "var {var}");
    }

    #[test]
    fn below_stays_in_range() {
        for i in 0..10_000 {
            assert!(below(derive(0, 0, i), 7) < 7);
        }
        assert_eq!(below(u64::MAX, 1), 0);
    }
}
