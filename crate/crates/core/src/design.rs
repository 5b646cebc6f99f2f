//! The level-structured identification matrix and its prefix-tree decoder.
//!
//! Level `ℓ ∈ {log k, …, log n}` has `C·k` rows, and column `i` has its single
//! nonzero at row `h_ℓ(bPref_ℓ(i))`. Decoding walks the binary prefix tree from
//! depth `log k`, discarding any prefix whose row tested negative and splitting
//! the survivors.

use std::ops::RangeInclusive;

use crate::error::{invalid, Error, Result};
use crate::hashing::{BucketHash, KWiseHash, LevelHash};
use crate::noise::flip_uniform_segments;
use crate::rng::{self, tags};
use crate::util::exact_log2;

pub const DEFAULT_C: u64 = 16;
pub const DEFAULT_C_L: u64 = 4;
pub const DEFAULT_C_FP: u64 = 2;
pub const DEFAULT_KAPPA_CAP: usize = 4096;

/// The top `len` bits of the `total_bits`-bit representation of `value`.
pub fn bprefix(value: u64, total_bits: u32, len: u32) -> Result<u64> {
    if len > total_bits {
        return Err(invalid(format!("prefix length {len} exceeds {total_bits} bits")));
    }
    if total_bits < 64 && value >> total_bits != 0 {
        return Err(invalid(format!("{value} does not fit in {total_bits} bits")));
    }
    Ok(if len == 0 { 0 } else { value >> (total_bits - len) })
}

/// Independence of the packed level hash: `(C_L + 1)·k·log2(n/k)`, capped.
pub fn default_kappa(k: u64, n: u64, c_l: u64, cap: usize) -> usize {
    let span = (n / k).max(1).trailing_zeros() as u64;
    (((c_l + 1) * k * span) as usize).clamp(1, cap.max(1))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct IdentParams {
    /// Rows per level are `c·k`.
    pub c: u64,
    /// List-size constant; only used to size κ.
    pub c_l: u64,
    pub kappa_cap: usize,
    /// Explicit independence; overrides the formula when set.
    pub kappa: Option<usize>,
}

impl Default for IdentParams {
    fn default() -> Self {
        Self { c: DEFAULT_C, c_l: DEFAULT_C_L, kappa_cap: DEFAULT_KAPPA_CAP, kappa: None }
    }
}

/// Decoder work counters.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct DecodeStats {
    pub prefixes_inserted: u64,
    pub tests_read: u64,
}

impl DecodeStats {
    pub fn absorb(&mut self, other: DecodeStats) {
        self.prefixes_inserted += other.prefixes_inserted;
        self.tests_read += other.tests_read;
    }
}

/// Identifies the design an outcome came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OutcomeMeta {
    pub k: u64,
    pub n: u64,
    pub c: u64,
    pub seed: u64,
}

/// Boolean test results, one bit vector of width `C·k` per level.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Outcome {
    pub meta: OutcomeMeta,
    /// `levels[j]` holds level `log k + j`.
    pub levels: Vec<Vec<bool>>,
}

impl Outcome {
    pub fn popcount(&self) -> usize {
        self.levels.iter().flatten().filter(|&&b| b).count()
    }

    /// `true` iff every bit set here is also set in `other`.
    pub fn is_dominated_by(&self, other: &Outcome) -> bool {
        self.levels
            .iter()
            .flatten()
            .zip(other.levels.iter().flatten())
            .all(|(&a, &b)| !a || b)
    }

    pub fn or(&self, other: &Outcome) -> Result<Outcome> {
        if self.meta != other.meta {
            return Err(Error::Mismatch("OR of outcomes from different designs".into()));
        }
        let levels = self
            .levels
            .iter()
            .zip(&other.levels)
            .map(|(a, b)| a.iter().zip(b).map(|(&x, &y)| x || y).collect())
            .collect();
        Ok(Outcome { meta: self.meta, levels })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Placement {
    Uniform,
    /// False positives land first on the rows of the sibling subtrees of these
    /// defectives, then uniformly.
    AdversarialNearDefectives(Vec<u64>),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NoisePolicy {
    pub fp_per_level: usize,
    pub fn_total: usize,
    pub placement: Placement,
    pub seed: u64,
}

impl NoisePolicy {
    pub fn uniform(fp_per_level: usize, fn_total: usize, seed: u64) -> Self {
        Self { fp_per_level, fn_total, placement: Placement::Uniform, seed }
    }
}

#[derive(Debug, Clone)]
pub struct IdentificationDesign {
    k: u64,
    n: u64,
    log_k: u32,
    log_n: u32,
    c: u64,
    seed: u64,
    packed: KWiseHash,
}

impl IdentificationDesign {
    pub fn build(k: u64, n: u64, c: u64, seed: u64) -> Result<Self> {
        Self::with_params(k, n, seed, &IdentParams { c, ..IdentParams::default() })
    }

    pub fn with_params(k: u64, n: u64, seed: u64, params: &IdentParams) -> Result<Self> {
        Self::with_hash_seed(k, n, seed, rng::derive(seed, tags::IDENT, 0), params)
    }

    /// Builds with an explicit seed for the packed hash (used by designs that
    /// stack several hash repetitions).
    pub(crate) fn with_hash_seed(k: u64, n: u64, seed: u64, hash_seed: u64, params: &IdentParams) -> Result<Self> {
        let log_k = exact_log2(k, "k")?;
        let log_n = exact_log2(n, "n")?;
        if k > n {
            return Err(invalid(format!("k = {k} exceeds n = {n}")));
        }
        if params.c < 2 {
            return Err(invalid("C must be at least 2"));
        }
        let kappa = params
            .kappa
            .unwrap_or_else(|| default_kappa(k, n, params.c_l, params.kappa_cap));
        let packed = KWiseHash::new(kappa, params.c * k, log_n + 1, hash_seed)?;
        Ok(Self { k, n, log_k, log_n, c: params.c, seed, packed })
    }

    pub fn k(&self) -> u64 {
        self.k
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn c(&self) -> u64 {
        self.c
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn log_n(&self) -> u32 {
        self.log_n
    }

    pub fn log_k(&self) -> u32 {
        self.log_k
    }

    pub fn kappa(&self) -> usize {
        self.packed.degree()
    }

    pub fn levels(&self) -> RangeInclusive<u32> {
        self.log_k..=self.log_n
    }

    pub fn num_levels(&self) -> usize {
        (self.log_n - self.log_k + 1) as usize
    }

    pub fn rows_per_level(&self) -> usize {
        (self.c * self.k) as usize
    }

    pub fn rows(&self) -> usize {
        self.rows_per_level() * self.num_levels()
    }

    pub fn meta(&self) -> OutcomeMeta {
        OutcomeMeta { k: self.k, n: self.n, c: self.c, seed: self.seed }
    }

    pub fn level_hash(&self, level: u32) -> Result<LevelHash<'_>> {
        if !self.levels().contains(&level) {
            return Err(invalid(format!("level {level} outside {:?}", self.levels())));
        }
        self.packed.level(level)
    }

    #[cfg(test)]
    pub(crate) fn packed(&self) -> &KWiseHash {
        &self.packed
    }

    /// Row of column `index` inside level `level`.
    pub fn row_of(&self, level: u32, index: u64) -> Result<usize> {
        self.check_index(index)?;
        let prefix = bprefix(index, self.log_n, level)?;
        Ok(self.level_hash(level)?.eval(prefix)? as usize)
    }

    #[inline]
    pub(crate) fn row_unchecked(&self, level: u32, index: u64) -> usize {
        let prefix = index >> (self.log_n - level);
        self.packed.eval_unchecked((1u64 << level) | prefix) as usize
    }

    fn check_index(&self, index: u64) -> Result<()> {
        if index >= self.n {
            return Err(Error::IndexOutOfRange { index, n: self.n });
        }
        Ok(())
    }

    pub fn empty_outcome(&self) -> Outcome {
        Outcome { meta: self.meta(), levels: vec![vec![false; self.rows_per_level()]; self.num_levels()] }
    }

    pub fn measure(&self, support: &[u64]) -> Result<Outcome> {
        support.iter().try_for_each(|&i| self.check_index(i))?;
        let mut out = self.empty_outcome();
        for (j, level) in self.levels().enumerate() {
            for &i in support {
                out.levels[j][self.row_unchecked(level, i)] = true;
            }
        }
        Ok(out)
    }

    fn check_outcome(&self, outcome: &Outcome) -> Result<()> {
        if outcome.meta != self.meta() {
            return Err(Error::Mismatch(format!("outcome {:?} vs design {:?}", outcome.meta, self.meta())));
        }
        if outcome.levels.len() != self.num_levels()
            || outcome.levels.iter().any(|l| l.len() != self.rows_per_level())
        {
            return Err(Error::Mismatch("level count or width differs".into()));
        }
        Ok(())
    }

    /// Returns a noisy copy of `outcome`.
    pub fn inject_noise(&self, outcome: &Outcome, policy: &NoisePolicy) -> Result<Outcome> {
        self.check_outcome(outcome)?;
        let mut rng = rng::stream(policy.seed, tags::NOISE, 0);
        let mut noisy = outcome.clone();
        for (j, level) in self.levels().enumerate() {
            let bits = &mut noisy.levels[j];
            let zeros = bits.iter().filter(|&&b| !b).count();
            if policy.fp_per_level > zeros {
                return Err(Error::NotEnoughBits { requested: policy.fp_per_level, available: zeros });
            }
            let mut remaining = policy.fp_per_level;
            if let Placement::AdversarialNearDefectives(defectives) = &policy.placement {
                for &i in defectives {
                    if remaining == 0 || level == 0 {
                        break;
                    }
                    self.check_index(i)?;
                    let sibling = (i >> (self.log_n - level)) ^ 1;
                    let row = self.packed.eval_unchecked((1u64 << level) | sibling) as usize;
                    if !bits[row] {
                        bits[row] = true;
                        remaining -= 1;
                    }
                }
            }
            crate::noise::flip_uniform(bits, false, remaining, &mut rng)?;
        }
        flip_uniform_segments(&mut noisy.levels, true, policy.fn_total, &mut rng)?;
        Ok(noisy)
    }

    /// Rows of `prefixes` (all of bit-length `level`) within level `level`.
    pub fn locate_batch(&self, level: u32, prefixes: &[u64]) -> Result<Vec<usize>> {
        Ok(self
            .level_hash(level)?
            .eval_batch(prefixes)?
            .into_iter()
            .map(|q| q as usize)
            .collect())
    }

    pub fn identify(&self, outcome: &Outcome) -> Result<Vec<u64>> {
        self.identify_with_stats(outcome).map(|(list, _)| list)
    }

    /// Prefix-tree decoding. Returns the sorted surviving indices.
    pub fn identify_with_stats(&self, outcome: &Outcome) -> Result<(Vec<u64>, DecodeStats)> {
        self.check_outcome(outcome)?;
        let mut stats = DecodeStats { prefixes_inserted: self.k, tests_read: 0 };
        let mut list: Vec<u64> = (0..self.k).collect();
        for (j, level) in self.levels().enumerate() {
            let rows = self.locate_batch(level, &list)?;
            stats.tests_read += list.len() as u64;
            let bits = &outcome.levels[j];
            let survivors = list.iter().zip(rows).filter(|(_, q)| bits[*q]).map(|(&p, _)| p);
            if level == self.log_n {
                let mut out: Vec<u64> = survivors.collect();
                out.sort_unstable();
                return Ok((out, stats));
            }
            list = survivors.flat_map(|p| [p << 1, (p << 1) | 1]).collect();
            stats.prefixes_inserted += list.len() as u64;
        }
        unreachable!("the final level always returns")
    }
}
