//! Identification that survives adversarial test errors.
//!
//! [`NoisyDesign`] learns `d = ceil(α·log k)` bits per level and keeps `R`
//! independent hash repetitions per level; a prefix is dropped only when a strict
//! majority of its `R` tests came back negative. [`SplitDesign`] stacks copies so
//! that one of them sees few false positives, and [`VotingReduction`] handles
//! false negatives by bucket voting.

mod voting;

pub use voting::{VotingParams, VotingReduction, DEFAULT_C_V};

use crate::design::{bprefix, default_kappa, DecodeStats, Placement, DEFAULT_C, DEFAULT_C_L, DEFAULT_KAPPA_CAP};
use crate::error::{invalid, Error, Result};
use crate::hashing::KWiseHash;
use crate::noise::flip_uniform;
use crate::rng::{self, tags};
use crate::util::exact_log2;

pub const DEFAULT_C_R: u64 = 6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoisyParams {
    /// Rows per block are `c·k`.
    pub c: u64,
    /// `R = c_r·log2 k` (with `log2 k` floored at 1).
    pub c_r: u64,
    pub c_l: u64,
    pub kappa_cap: usize,
    pub kappa: Option<usize>,
    /// Forces `R`.
    pub reps: Option<usize>,
}

impl Default for NoisyParams {
    fn default() -> Self {
        Self { c: DEFAULT_C, c_r: DEFAULT_C_R, c_l: DEFAULT_C_L, kappa_cap: DEFAULT_KAPPA_CAP, kappa: None, reps: None }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NoisyMeta {
    pub k: u64,
    pub n: u64,
    pub c: u64,
    pub d: u32,
    pub reps: usize,
    pub seed: u64,
}

/// `levels[ℓ]` is the concatenation of the `R` blocks of level `ℓ`, each `C·k` wide.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NoisyOutcome {
    pub meta: NoisyMeta,
    pub levels: Vec<Vec<bool>>,
}

impl NoisyOutcome {
    pub fn popcount(&self) -> usize {
        self.levels.iter().flatten().filter(|&&b| b).count()
    }
}

#[derive(Debug, Clone)]
pub struct NoisyDesign {
    k: u64,
    n: u64,
    log_k: u32,
    log_n: u32,
    alpha: f64,
    d: u32,
    height: usize,
    c: u64,
    c_l: u64,
    seed: u64,
    hashes: Vec<KWiseHash>,
}

impl NoisyDesign {
    pub fn build(k: u64, n: u64, alpha: f64, seed: u64) -> Result<Self> {
        Self::with_params(k, n, alpha, seed, &NoisyParams::default())
    }

    pub fn with_params(k: u64, n: u64, alpha: f64, seed: u64, params: &NoisyParams) -> Result<Self> {
        let log_k = exact_log2(k, "k")?;
        let log_n = exact_log2(n, "n")?;
        if k > n {
            return Err(invalid(format!("k = {k} exceeds n = {n}")));
        }
        if !(alpha > 0.0 && alpha <= 1.0) {
            return Err(invalid(format!("alpha = {alpha} outside (0, 1]")));
        }
        if params.c < 2 || params.c_r == 0 {
            return Err(invalid("C must be at least 2 and C_R positive"));
        }
        // k = 1 has no bits to learn from log k; walk one bit at a time.
        let d = ((alpha * log_k as f64).ceil() as u32).max(1);
        let reps = params.reps.unwrap_or((params.c_r * log_k.max(1) as u64) as usize);
        if reps == 0 {
            return Err(invalid("need at least one repetition"));
        }
        let height = (log_n - log_k).div_ceil(d) as usize + 1;
        let kappa = params
            .kappa
            .unwrap_or_else(|| default_kappa(k, n, params.c_l, params.kappa_cap));
        let hashes = (0..reps)
            .map(|r| KWiseHash::new(kappa, params.c * k, log_n + 1, rng::derive(seed, tags::IDENT, r as u64)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { k, n, log_k, log_n, alpha, d, height, c: params.c, c_l: params.c_l, seed, hashes })
    }

    pub fn k(&self) -> u64 {
        self.k
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn branching(&self) -> u64 {
        1 << self.d
    }

    pub fn reps(&self) -> usize {
        self.hashes.len()
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn block_width(&self) -> usize {
        (self.c * self.k) as usize
    }

    pub fn rows(&self) -> usize {
        self.height * self.reps() * self.block_width()
    }

    pub fn meta(&self) -> NoisyMeta {
        NoisyMeta { k: self.k, n: self.n, c: self.c, d: self.d, reps: self.reps(), seed: self.seed }
    }

    /// Prefix length examined at level `ℓ`.
    pub fn prefix_len(&self, level: usize) -> u32 {
        (self.log_k + level as u32 * self.d).min(self.log_n)
    }

    /// `C_L·k·log_k(n/k) + k`, the certified list size.
    pub fn list_bound(&self) -> u64 {
        let span = (self.log_n - self.log_k) as u64;
        self.c_l * self.k * span.div_ceil(self.log_k.max(1) as u64) + self.k
    }

    /// `C_L·k^{1+α}·log2(n/k)`, the bound on prefixes inserted during a clean decode.
    pub fn insert_bound(&self) -> u64 {
        let span = (self.log_n - self.log_k).max(1) as f64;
        (self.c_l as f64 * (self.k as f64).powf(1.0 + self.alpha) * span).ceil() as u64
    }

    /// Row of column `index` in block `(level, rep)`.
    pub fn row_of(&self, level: usize, rep: usize, index: u64) -> Result<usize> {
        if index >= self.n {
            return Err(Error::IndexOutOfRange { index, n: self.n });
        }
        if level >= self.height || rep >= self.reps() {
            return Err(invalid(format!("block ({level}, {rep}) outside {}x{}", self.height, self.reps())));
        }
        let len = self.prefix_len(level);
        Ok(self.row_unchecked(len, rep, bprefix(index, self.log_n, len)?))
    }

    #[inline]
    fn row_unchecked(&self, len: u32, rep: usize, prefix: u64) -> usize {
        self.hashes[rep].eval_unchecked((1u64 << len) | prefix) as usize
    }

    pub fn empty_outcome(&self) -> NoisyOutcome {
        NoisyOutcome { meta: self.meta(), levels: vec![vec![false; self.reps() * self.block_width()]; self.height] }
    }

    pub fn measure(&self, support: &[u64]) -> Result<NoisyOutcome> {
        if let Some(&i) = support.iter().find(|&&i| i >= self.n) {
            return Err(Error::IndexOutOfRange { index: i, n: self.n });
        }
        let w = self.block_width();
        let mut out = self.empty_outcome();
        for level in 0..self.height {
            let len = self.prefix_len(level);
            for &i in support {
                let p = i >> (self.log_n - len);
                for r in 0..self.reps() {
                    out.levels[level][r * w + self.row_unchecked(len, r, p)] = true;
                }
            }
        }
        Ok(out)
    }

    fn check_outcome(&self, outcome: &NoisyOutcome) -> Result<()> {
        if outcome.meta != self.meta() {
            return Err(Error::Mismatch(format!("outcome {:?} vs design {:?}", outcome.meta, self.meta())));
        }
        let width = self.reps() * self.block_width();
        if outcome.levels.len() != self.height || outcome.levels.iter().any(|l| l.len() != width) {
            return Err(Error::Mismatch("level count or width differs".into()));
        }
        Ok(())
    }

    /// Flips `fp_per_level` zeros per level (spread over that level's `R` blocks) and
    /// then `fn_total` ones anywhere. Adversarial placement first hits the rows of
    /// prefixes that share all but their last learned bits with a defective.
    pub fn inject_noise(
        &self,
        outcome: &NoisyOutcome,
        fp_per_level: usize,
        fn_total: usize,
        placement: &Placement,
        seed: u64,
    ) -> Result<NoisyOutcome> {
        self.check_outcome(outcome)?;
        let mut rng = rng::stream(seed, tags::NOISE, 1);
        let mut noisy = outcome.clone();
        let w = self.block_width();
        for level in 0..self.height {
            let bits = &mut noisy.levels[level];
            let zeros = bits.iter().filter(|&&b| !b).count();
            if fp_per_level > zeros {
                return Err(Error::NotEnoughBits { requested: fp_per_level, available: zeros });
            }
            let mut remaining = fp_per_level;
            if let Placement::AdversarialNearDefectives(defectives) = placement {
                let len = self.prefix_len(level);
                let step = len - self.prefix_len(level.saturating_sub(1));
                'outer: for &i in defectives {
                    if i >= self.n {
                        return Err(Error::IndexOutOfRange { index: i, n: self.n });
                    }
                    let p = i >> (self.log_n - len);
                    for sib in 1..(1u64 << step) {
                        for r in 0..self.reps() {
                            if remaining == 0 {
                                break 'outer;
                            }
                            let q = r * w + self.row_unchecked(len, r, p ^ sib);
                            if !bits[q] {
                                bits[q] = true;
                                remaining -= 1;
                            }
                        }
                    }
                }
            }
            flip_uniform(bits, false, remaining, &mut rng)?;
        }
        crate::noise::flip_uniform_segments(&mut noisy.levels, true, fn_total, &mut rng)?;
        Ok(noisy)
    }

    pub fn identify_under_errors(&self, outcome: &NoisyOutcome) -> Result<Vec<u64>> {
        self.identify_with_stats(outcome).map(|(l, _)| l)
    }

    pub fn identify_with_stats(&self, outcome: &NoisyOutcome) -> Result<(Vec<u64>, DecodeStats)> {
        Ok(self.identify_budgeted(outcome, u64::MAX)?.expect("unbounded budget always finishes"))
    }

    /// Decodes, giving up (returning `None`) once more than `budget` prefixes have
    /// been inserted.
    pub fn identify_budgeted(&self, outcome: &NoisyOutcome, budget: u64) -> Result<Option<(Vec<u64>, DecodeStats)>> {
        self.check_outcome(outcome)?;
        let w = self.block_width();
        let reps = self.reps();
        let mut stats = DecodeStats { prefixes_inserted: self.k, tests_read: 0 };
        let mut list: Vec<u64> = (0..self.k).collect();
        for level in 0..self.height {
            let len = self.prefix_len(level);
            let bits = &outcome.levels[level];
            stats.tests_read += (list.len() * reps) as u64;
            list.retain(|&p| {
                let negatives = (0..reps).filter(|&r| !bits[r * w + self.row_unchecked(len, r, p)]).count();
                2 * negatives <= reps
            });
            if level + 1 == self.height {
                list.sort_unstable();
                return Ok(Some((list, stats)));
            }
            let step = self.prefix_len(level + 1) - len;
            stats.prefixes_inserted += (list.len() as u64) << step;
            if stats.prefixes_inserted > budget {
                return Ok(None);
            }
            list = list.iter().flat_map(|&p| (0..1u64 << step).map(move |s| (p << step) | s)).collect();
        }
        unreachable!("the final level always returns")
    }
}

/// Copies of a [`NoisyDesign`] decoded as a race.
#[derive(Debug, Clone)]
pub struct SplitDesign {
    copies: Vec<NoisyDesign>,
    budget: u64,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RaceResult {
    pub list: Vec<u64>,
    pub winner: usize,
    /// Prefixes inserted per copy, `None` where the copy ran out of budget.
    pub steps: Vec<Option<u64>>,
}

/// `1 + ceil(e0 / (k·log2 k))`, with `k·log2 k` floored at 1.
pub fn split_copies(k: u64, e0: u64) -> u64 {
    let per_copy = (k * k.max(1).trailing_zeros() as u64).max(1);
    1 + e0.div_ceil(per_copy)
}

impl SplitDesign {
    pub fn build(k: u64, n: u64, e0: u64, alpha: f64, seed: u64) -> Result<Self> {
        Self::with_params(k, n, e0, alpha, seed, &NoisyParams::default())
    }

    pub fn with_params(k: u64, n: u64, e0: u64, alpha: f64, seed: u64, params: &NoisyParams) -> Result<Self> {
        let copies = (0..split_copies(k, e0))
            .map(|j| NoisyDesign::with_params(k, n, alpha, rng::derive(seed, tags::SPLIT_COPY, j), params))
            .collect::<Result<Vec<_>>>()?;
        let budget = 8 * copies[0].insert_bound();
        Ok(Self { copies, budget })
    }

    pub fn copies(&self) -> &[NoisyDesign] {
        &self.copies
    }

    /// Per-copy insert budget: 8× the clean-instance bound.
    pub fn budget(&self) -> u64 {
        self.budget
    }

    pub fn rows(&self) -> usize {
        self.copies.iter().map(NoisyDesign::rows).sum()
    }

    pub fn measure(&self, support: &[u64]) -> Result<Vec<NoisyOutcome>> {
        self.copies.iter().map(|c| c.measure(support)).collect()
    }

    /// The copy that finishes in the fewest steps with a list inside the certified
    /// bound wins; ties go to the lower index.
    pub fn decode_race(&self, outcomes: &[NoisyOutcome]) -> Result<RaceResult> {
        if outcomes.len() != self.copies.len() {
            return Err(Error::Mismatch(format!("{} outcomes for {} copies", outcomes.len(), self.copies.len())));
        }
        let mut steps = Vec::with_capacity(self.copies.len());
        let mut best: Option<(u64, usize, Vec<u64>)> = None;
        for (j, (copy, outcome)) in self.copies.iter().zip(outcomes).enumerate() {
            let run = copy.identify_budgeted(outcome, self.budget)?;
            steps.push(run.as_ref().map(|(_, s)| s.prefixes_inserted));
            if let Some((list, s)) = run {
                let certified = list.len() as u64 <= copy.list_bound();
                if certified && best.as_ref().map_or(true, |(b, _, _)| s.prefixes_inserted < *b) {
                    best = Some((s.prefixes_inserted, j, list));
                }
            }
        }
        match best {
            Some((_, winner, list)) => Ok(RaceResult { list, winner, steps }),
            None => Err(Error::RaceExhausted { copies: self.copies.len() }),
        }
    }
}
