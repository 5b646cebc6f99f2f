//! False-negative tolerance by bucket voting.
//!
//! Each of `C_v·k` repetitions hashes the universe into `ceil(10k/log2 n)` buckets and
//! keeps a small error-tolerant band design per bucket. Elements returned by the
//! inner decoders in at least half the repetitions form a list, which a disjunct
//! design then filters with noisy point queries.

use crate::combinatorial::{random_bands, random_code_disjunct, SparseDesign, DEFAULT_C2, DEFAULT_C3};
use crate::error::{invalid, Error, Result};
use crate::noise::flip_uniform;
use crate::rng::{self, tags};
use crate::util::{ceil_log2, exact_log2};

pub const DEFAULT_C_V: u64 = 4;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VotingParams {
    /// Repetitions are `c_v·k`.
    pub c_v: u64,
    /// Regime constant: requires `k > c·log2 n`.
    pub c: f64,
    /// Inner designs have `band_factor·(ceil(log2 |U|) + slack)` bands …
    pub band_factor: u64,
    /// … of `width_factor·log2 n` rows.
    pub width_factor: u64,
    pub c2: u64,
    pub c3: u64,
}

impl Default for VotingParams {
    fn default() -> Self {
        Self { c_v: DEFAULT_C_V, c: 1.0, band_factor: 3, width_factor: 2, c2: DEFAULT_C2, c3: DEFAULT_C3 }
    }
}

#[derive(Debug, Clone)]
struct Inner {
    offset: usize,
    /// Sorted global indices hashed to this bucket.
    universe: Vec<u64>,
    design: SparseDesign,
}

#[derive(Debug, Clone)]
pub struct VotingReduction {
    k: u64,
    n: u64,
    e1: u64,
    seed: u64,
    reps: usize,
    buckets: usize,
    inner_slack: usize,
    /// Indexed by `ρ·buckets + b`.
    inner: Vec<Inner>,
    filter_offset: usize,
    filter: SparseDesign,
}

impl VotingReduction {
    /// `e1` is the total false-negative budget; inner decoders use slack `ceil(e1/k)`.
    pub fn build(k: u64, n: u64, e1: u64, seed: u64) -> Result<Self> {
        Self::with_params(k, n, e1, seed, &VotingParams::default())
    }

    pub fn with_params(k: u64, n: u64, e1: u64, seed: u64, params: &VotingParams) -> Result<Self> {
        let log_n = exact_log2(n, "n")?.max(1) as u64;
        if k == 0 || k > n {
            return Err(invalid(format!("need 1 <= k <= n, got k = {k}, n = {n}")));
        }
        if k as f64 <= params.c * log_n as f64 {
            return Err(Error::Regime(format!(
                "bucket voting needs k > {}·log2 n = {}, got k = {k}",
                params.c,
                params.c * log_n as f64
            )));
        }
        if params.c_v == 0 || params.band_factor == 0 || params.width_factor == 0 {
            return Err(invalid("voting constants must be positive"));
        }
        let reps = (params.c_v * k) as usize;
        let buckets = (10 * k).div_ceil(log_n) as usize;
        let inner_slack = e1.div_ceil(k) as usize;
        let width = params.width_factor * log_n;

        let mut universes = vec![Vec::new(); reps * buckets];
        for rho in 0..reps {
            for i in 0..n {
                let b = rng::below(rng::derive2(seed, tags::VOTE_BUCKET, rho as u64, i), buckets as u64) as usize;
                universes[rho * buckets + b].push(i);
            }
        }
        let mut offset = 0;
        let mut inner = Vec::with_capacity(universes.len());
        for (slot, universe) in universes.into_iter().enumerate() {
            let size = universe.len() as u64;
            let bands = (params.band_factor * (ceil_log2(size.max(1)) as u64 + inner_slack as u64)).max(1);
            let design = random_bands(bands, width, size, log_n, rng::derive(seed, tags::VOTE_INNER, slot as u64))?;
            let rows = design.rows();
            inner.push(Inner { offset, universe, design });
            offset += rows;
        }
        let filter = random_code_disjunct(k, n, params.c2, params.c3, rng::derive(seed, tags::VOTE_FINAL, 0))?;
        Ok(Self { k, n, e1, seed, reps, buckets, inner_slack, inner, filter_offset: offset, filter })
    }

    pub fn k(&self) -> u64 {
        self.k
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn e1(&self) -> u64 {
        self.e1
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn reps(&self) -> usize {
        self.reps
    }

    pub fn buckets(&self) -> usize {
        self.buckets
    }

    pub fn inner_slack(&self) -> usize {
        self.inner_slack
    }

    /// Minimum number of inner lists an element must appear in.
    pub fn majority(&self) -> usize {
        self.reps.div_ceil(2)
    }

    pub fn rows(&self) -> usize {
        self.filter_offset + self.filter.rows()
    }

    pub fn filter(&self) -> &SparseDesign {
        &self.filter
    }

    /// Bucket of `i` in repetition `rho`.
    pub fn bucket_of(&self, rho: usize, i: u64) -> Result<usize> {
        if i >= self.n {
            return Err(Error::IndexOutOfRange { index: i, n: self.n });
        }
        if rho >= self.reps {
            return Err(invalid(format!("repetition {rho} outside {}", self.reps)));
        }
        Ok(rng::below(rng::derive2(self.seed, tags::VOTE_BUCKET, rho as u64, i), self.buckets as u64) as usize)
    }

    /// Universe of bucket `b` in repetition `rho`.
    pub fn bucket_universe(&self, rho: usize, b: usize) -> &[u64] {
        &self.inner[rho * self.buckets + b].universe
    }

    /// Rows (global) of column `i`, ascending.
    pub fn column(&self, i: u64) -> Result<Vec<usize>> {
        let mut rows = Vec::new();
        for rho in 0..self.reps {
            let inner = &self.inner[rho * self.buckets + self.bucket_of(rho, i)?];
            let local = inner.universe.binary_search(&i).expect("bucket universe holds its members") as u64;
            rows.extend(inner.design.column(local)?.iter().map(|&r| inner.offset + r as usize));
        }
        rows.extend(self.filter.column(i)?.iter().map(|&r| self.filter_offset + r as usize));
        Ok(rows)
    }

    pub fn measure(&self, support: &[u64]) -> Result<Vec<bool>> {
        let mut out = vec![false; self.rows()];
        for &i in support {
            for r in self.column(i)? {
                out[r] = true;
            }
        }
        Ok(out)
    }

    /// Flips `fn_total` uniformly chosen positive tests to negative.
    pub fn inject_false_negatives(&self, outcome: &[bool], fn_total: usize, seed: u64) -> Result<Vec<bool>> {
        self.check_len(outcome)?;
        let mut noisy = outcome.to_vec();
        flip_uniform(&mut noisy, true, fn_total, &mut rng::stream(seed, tags::NOISE, 2))?;
        Ok(noisy)
    }

    fn check_len(&self, outcome: &[bool]) -> Result<()> {
        if outcome.len() != self.rows() {
            return Err(Error::Mismatch(format!("outcome has {} bits, design has {} rows", outcome.len(), self.rows())));
        }
        Ok(())
    }

    /// Majority list `L` before the final filter.
    pub fn vote(&self, outcome: &[bool]) -> Result<Vec<u64>> {
        self.check_len(outcome)?;
        let mut votes = vec![0u32; self.n as usize];
        for inner in &self.inner {
            let slice = &outcome[inner.offset..inner.offset + inner.design.rows()];
            for local in inner.design.noisy_naive_decode(slice, self.inner_slack)? {
                votes[inner.universe[local as usize] as usize] += 1;
            }
        }
        let majority = self.majority() as u32;
        Ok((0..self.n).filter(|&i| votes[i as usize] >= majority).collect())
    }

    pub fn decode_voting(&self, outcome: &[bool]) -> Result<Vec<u64>> {
        let list = self.vote(outcome)?;
        let tail = &outcome[self.filter_offset..];
        let mut out = Vec::with_capacity(list.len());
        for i in list {
            if self.filter.noisy_point_query(tail, i, self.e1 as usize)? {
                out.push(i);
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::seq::index::sample;

    fn support(n: u64, k: u64, seed: u64) -> Vec<u64> {
        let mut r = rng::stream(seed, 0x98, 0);
        let mut s: Vec<u64> = sample(&mut r, n as usize, k as usize).into_iter().map(|i| i as u64).collect();
        s.sort_unstable();
        s
    }

    #[test]
    fn regime_is_enforced() {
        assert!(matches!(VotingReduction::build(8, 1024, 0, 1), Err(Error::Regime(_))));
        assert!(matches!(VotingReduction::build(10, 1024, 0, 1), Err(Error::Regime(_))));
        assert!(VotingReduction::build(11, 1024, 0, 1).is_ok());
    }

    #[test]
    fn structure() {
        let v = VotingReduction::build(16, 1024, 32, 5).unwrap();
        assert_eq!((v.reps(), v.buckets(), v.inner_slack(), v.majority()), (64, 16, 2, 32));
        for rho in [0, 17, 63] {
            let mut all: Vec<u64> = (0..16).flat_map(|b| v.bucket_universe(rho, b).to_vec()).collect();
            all.sort_unstable();
            assert_eq!(all, (0..1024).collect::<Vec<_>>());
            assert!(v.bucket_universe(rho, v.bucket_of(rho, 77).unwrap()).contains(&77));
        }
        let col = v.column(3).unwrap();
        assert!(col.windows(2).all(|w| w[0] < w[1]));
        assert!(v.measure(&[1024]).is_err());
    }

    #[test]
    fn noiseless_exact() {
        let v = VotingReduction::build(16, 1024, 0, 9).unwrap();
        assert!(v.decode_voting(&vec![false; v.rows()]).unwrap().is_empty());
        for seed in 0..10 {
            let s = support(1024, 16, seed);
            assert_eq!(v.decode_voting(&v.measure(&s).unwrap()).unwrap(), s);
        }
        assert!(v.decode_voting(&[true]).is_err());
    }

    #[test]
    fn majority_threshold() {
        // Positives only in the blocks of fewer than half the repetitions cannot elect 5.
        let v = VotingReduction::build(16, 1024, 0, 2).unwrap();
        let light_up = |y: &mut Vec<bool>, rho: usize| {
            let inner = &v.inner[rho * v.buckets() + v.bucket_of(rho, 5).unwrap()];
            let local = inner.universe.binary_search(&5).unwrap() as u64;
            for &r in inner.design.column(local).unwrap() {
                y[inner.offset + r as usize] = true;
            }
        };
        let mut y = vec![false; v.rows()];
        for rho in 0..v.majority() - 1 {
            light_up(&mut y, rho);
        }
        assert!(!v.vote(&y).unwrap().contains(&5));
        light_up(&mut y, v.majority() - 1);
        assert!(v.vote(&y).unwrap().contains(&5));
    }

    #[test]
    fn tolerates_false_negatives() {
        let (k, n, e1) = (16u64, 1024u64, 32u64);
        let v = VotingReduction::build(k, n, e1, 3).unwrap();
        for seed in 0..10 {
            let s = support(n, k, seed + 50);
            let y = v.inject_false_negatives(&v.measure(&s).unwrap(), e1 as usize, seed).unwrap();
            assert_eq!(v.decode_voting(&y).unwrap(), s);
        }
    }
}
