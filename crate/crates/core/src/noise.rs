//! Bit-flip helpers shared by the noise models.

use rand::seq::index::sample;
use rand::Rng;

use crate::error::{Error, Result};

/// Flips `count` uniformly chosen bits equal to `from` (within `bits`) to `!from`.
pub fn flip_uniform<R: Rng>(bits: &mut [bool], from: bool, count: usize, rng: &mut R) -> Result<()> {
    let candidates: Vec<usize> = (0..bits.len()).filter(|&i| bits[i] == from).collect();
    if count > candidates.len() {
        return Err(Error::NotEnoughBits { requested: count, available: candidates.len() });
    }
    for j in sample(rng, candidates.len(), count) {
        bits[candidates[j]] = !from;
    }
    Ok(())
}

/// Flips `count` uniformly chosen `from` bits across several segments viewed as one.
pub fn flip_uniform_segments<R: Rng>(
    segments: &mut [Vec<bool>],
    from: bool,
    count: usize,
    rng: &mut R,
) -> Result<()> {
    let candidates: Vec<(usize, usize)> = segments
        .iter()
        .enumerate()
        .flat_map(|(s, seg)| seg.iter().enumerate().filter(|(_, &b)| b == from).map(move |(i, _)| (s, i)))
        .collect();
    if count > candidates.len() {
        return Err(Error::NotEnoughBits { requested: count, available: candidates.len() });
    }
    for j in sample(rng, candidates.len(), count) {
        let (s, i) = candidates[j];
        segments[s][i] = !from;
    }
    Ok(())
}
