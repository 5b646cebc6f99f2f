//! Strict-turnstile ℓ1 heavy hitters over the identification matrix.
//!
//! Counters mirror the rows of an [`IdentificationDesign`]; a query binarizes them
//! at `‖x‖₁/k`, runs the prefix-tree decoder and filters the survivors with a
//! banded counter structure. Updates are buffered and applied a bounded number of
//! counter increments at a time (two alternating buffers), so the per-update work
//! is a fixed constant `W`.

mod snapshot;

pub use snapshot::{decode_sketch, encode_sketch, read_sketch, write_sketch, HH_SNAPSHOT_VERSION};

use crate::design::{IdentParams, IdentificationDesign, Outcome, DEFAULT_C, DEFAULT_C_L, DEFAULT_KAPPA_CAP};
use crate::error::{invalid, Error, Result};
use crate::rng::{self, tags};
use crate::util::round_up_pow2;

/// Prefix rows are memoized when `log2 n` is at most this.
const ROW_CACHE_MAX_BITS: u32 = 22;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HhConfig {
    pub ident: IdentParams,
    /// Filter has `ceil(filter_bands·log2(n/k))` bands …
    pub filter_bands: f64,
    /// … of `filter_width·k` counters.
    pub filter_width: u64,
    pub estimates: bool,
    /// Estimate table: `est_c2·k·log2 n` bands of `est_c3·k` buckets.
    pub est_c2: u64,
    pub est_c3: u64,
    /// Buffer capacity `B = ceil(kappa_b·k·log2(n/k))`.
    pub kappa_b: f64,
}

impl Default for HhConfig {
    fn default() -> Self {
        Self {
            ident: IdentParams { c: DEFAULT_C, c_l: DEFAULT_C_L, kappa_cap: DEFAULT_KAPPA_CAP, kappa: None },
            filter_bands: 2.0,
            filter_width: 4,
            estimates: true,
            est_c2: 4,
            est_c3: 4,
            kappa_b: 1.0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StreamUpdate {
    pub index: u64,
    pub delta: f64,
}

/// Instrumentation of the de-amortized flush.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct HhStats {
    pub updates: u64,
    pub total_steps: u64,
    pub max_steps_per_update: u64,
    pub swaps: u64,
}

/// A banded counter structure: `bands × width` counters, one position per column per band.
#[derive(Debug, Clone, PartialEq)]
struct Banded {
    bands: usize,
    width: u64,
    seed: u64,
    tag: u64,
    counters: Vec<f64>,
}

impl Banded {
    fn new(bands: usize, width: u64, seed: u64, tag: u64) -> Self {
        Self { bands, width, seed, tag, counters: vec![0.0; bands * width as usize] }
    }

    #[inline]
    fn slot(&self, band: usize, i: u64) -> usize {
        band * self.width as usize + rng::below(rng::derive2(self.seed, self.tag, band as u64, i), self.width) as usize
    }

    fn all_at_least(&self, i: u64, threshold: f64) -> bool {
        (0..self.bands).all(|b| self.counters[self.slot(b, i)] >= threshold)
    }

    fn min_bucket(&self, i: u64) -> f64 {
        (0..self.bands).map(|b| self.counters[self.slot(b, i)]).fold(f64::INFINITY, f64::min)
    }
}

#[derive(Debug, Clone)]
pub struct HhSketch {
    k: u64,
    n: u64,
    seed: u64,
    config: HhConfig,
    design: IdentificationDesign,
    ident: Vec<Vec<f64>>,
    norm: f64,
    filter: Banded,
    est: Option<Banded>,
    capacity: usize,
    steps_per_update: u64,
    buffers: [Vec<StreamUpdate>; 2],
    active: usize,
    /// Position in the inactive buffer: entry and sub-step within it.
    cursor: (usize, usize),
    stats: HhStats,
    row_cache: Option<Vec<u32>>,
}

impl HhSketch {
    /// `k` and `n` are rounded up to powers of two.
    pub fn new(k: u64, n: u64, seed: u64, config: HhConfig) -> Result<Self> {
        if k == 0 || n == 0 || k > n {
            return Err(invalid(format!("need 1 <= k <= n, got k = {k}, n = {n}")));
        }
        if !(config.filter_bands > 0.0 && config.kappa_b > 0.0) || config.filter_width == 0 {
            return Err(invalid("filter and buffer constants must be positive"));
        }
        if config.estimates && (config.est_c2 == 0 || config.est_c3 == 0) {
            return Err(invalid("estimate constants must be positive"));
        }
        let (k, n) = round_up_pow2(k, n);
        let design = IdentificationDesign::with_params(k, n, rng::derive(seed, tags::HH_IDENT, 0), &config.ident)?;
        let span = (design.log_n() - design.log_k()).max(1) as f64;
        let filter_bands = (config.filter_bands * span).ceil() as usize;
        let filter = Banded::new(filter_bands, config.filter_width * k, rng::derive(seed, tags::HH_FILTER, 0), tags::HH_FILTER);
        let est = config.estimates.then(|| {
            let bands = (config.est_c2 * k) as usize * design.log_n().max(1) as usize;
            Banded::new(bands, config.est_c3 * k, rng::derive(seed, tags::HH_EST, 0), tags::HH_EST)
        });
        let capacity = ((config.kappa_b * k as f64 * span).ceil() as usize).max(1);
        let per_entry = 1 + design.num_levels() + filter.bands + est.as_ref().map_or(0, |e| e.bands);
        let steps_per_update = (capacity * per_entry).div_ceil(capacity) as u64;
        let row_cache = (design.log_n() <= ROW_CACHE_MAX_BITS).then(|| vec![u32::MAX; 2 * n as usize]);
        Ok(Self {
            k,
            n,
            seed,
            config,
            ident: vec![vec![0.0; design.rows_per_level()]; design.num_levels()],
            design,
            norm: 0.0,
            filter,
            est,
            capacity,
            steps_per_update,
            buffers: [Vec::with_capacity(capacity), Vec::with_capacity(capacity)],
            active: 0,
            cursor: (0, 0),
            stats: HhStats::default(),
            row_cache,
        })
    }

    pub fn k(&self) -> u64 {
        self.k
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn config(&self) -> &HhConfig {
        &self.config
    }

    pub fn design(&self) -> &IdentificationDesign {
        &self.design
    }

    /// Sum of the applied updates (pending ones excluded).
    pub fn norm(&self) -> f64 {
        self.norm
    }

    pub fn ident_counters(&self) -> &[Vec<f64>] {
        &self.ident
    }

    pub fn filter_bands(&self) -> usize {
        self.filter.bands
    }

    pub fn filter_width(&self) -> u64 {
        self.filter.width
    }

    pub fn filter_counters(&self) -> &[f64] {
        &self.filter.counters
    }

    /// `(bands, width)` of the estimate table, if enabled.
    pub fn estimate_shape(&self) -> Option<(usize, u64)> {
        self.est.as_ref().map(|e| (e.bands, e.width))
    }

    pub fn estimate_counters(&self) -> Option<&[f64]> {
        self.est.as_ref().map(|e| e.counters.as_slice())
    }

    /// Buffer capacity `B`.
    pub fn capacity(&self) -> usize {
        self.capacity
    }

    /// Counter increments needed to apply one buffered update.
    pub fn work_per_entry(&self) -> usize {
        1 + self.design.num_levels() + self.filter.bands + self.est.as_ref().map_or(0, |e| e.bands)
    }

    /// The per-update step bound `W`.
    pub fn steps_per_update(&self) -> u64 {
        self.steps_per_update
    }

    pub fn pending(&self) -> usize {
        self.buffers[0].len() + self.buffers[1].len() - self.cursor.0
    }

    pub fn stats(&self) -> HhStats {
        self.stats
    }

    pub fn update(&mut self, index: u64, delta: f64) -> Result<()> {
        self.apply(StreamUpdate { index, delta })
    }

    pub fn apply(&mut self, u: StreamUpdate) -> Result<()> {
        if u.index >= self.n {
            return Err(Error::IndexOutOfRange { index: u.index, n: self.n });
        }
        self.buffers[self.active].push(u);
        let done = self.run_steps(self.steps_per_update);
        self.stats.updates += 1;
        self.stats.total_steps += done;
        self.stats.max_steps_per_update = self.stats.max_steps_per_update.max(done);
        if self.buffers[self.active].len() == self.capacity {
            debug_assert!(self.inactive_drained(), "flush work outran its budget");
            self.buffers[1 - self.active].clear();
            self.cursor = (0, 0);
            self.active = 1 - self.active;
            self.stats.swaps += 1;
        }
        Ok(())
    }

    fn inactive_drained(&self) -> bool {
        self.cursor.0 == self.buffers[1 - self.active].len()
    }

    /// Runs up to `budget` counter increments from the inactive buffer.
    fn run_steps(&mut self, budget: u64) -> u64 {
        let per_entry = self.work_per_entry();
        let mut done = 0;
        while done < budget && !self.inactive_drained() {
            let (entry, sub) = self.cursor;
            let u = self.buffers[1 - self.active][entry];
            self.step(u, sub);
            done += 1;
            self.cursor = if sub + 1 == per_entry { (entry + 1, 0) } else { (entry, sub + 1) };
        }
        done
    }

    fn level_row(&mut self, level: u32, i: u64) -> usize {
        let key = ((1u64 << level) | (i >> (self.design.log_n() - level))) as usize;
        match &mut self.row_cache {
            Some(cache) => {
                if cache[key] == u32::MAX {
                    cache[key] = self.design.row_unchecked(level, i) as u32;
                }
                cache[key] as usize
            }
            None => self.design.row_unchecked(level, i),
        }
    }

    /// Sub-step order: norm, identification levels, filter bands, estimate bands.
    fn step(&mut self, u: StreamUpdate, sub: usize) {
        let levels = self.design.num_levels();
        if sub == 0 {
            self.norm += u.delta;
        } else if sub <= levels {
            let j = sub - 1;
            let row = self.level_row(self.design.log_k() + j as u32, u.index);
            self.ident[j][row] += u.delta;
        } else if sub <= levels + self.filter.bands {
            let slot = self.filter.slot(sub - 1 - levels, u.index);
            self.filter.counters[slot] += u.delta;
        } else {
            let est = self.est.as_mut().expect("sub-step beyond the filter implies an estimate table");
            let slot = est.slot(sub - 1 - levels - self.filter.bands, u.index);
            est.counters[slot] += u.delta;
        }
    }

    /// Applies every pending update.
    pub fn flush(&mut self) {
        self.run_steps(u64::MAX);
        self.buffers[1 - self.active].clear();
        self.active = 1 - self.active;
        self.cursor = (0, 0);
        self.run_steps(u64::MAX);
        self.buffers[1 - self.active].clear();
        self.cursor = (0, 0);
    }

    pub fn threshold(&self) -> f64 {
        self.norm / self.k as f64
    }

    /// Indices whose identification buckets and filter buckets all reach `‖x‖₁/k`.
    pub fn query(&mut self) -> Vec<u64> {
        self.flush();
        if self.norm <= 0.0 {
            return Vec::new();
        }
        let t = self.threshold();
        let outcome = Outcome {
            meta: self.design.meta(),
            levels: self.ident.iter().map(|l| l.iter().map(|&v| v >= t).collect()).collect(),
        };
        let list = self.design.identify(&outcome).expect("sketch outcome matches its own design");
        list.into_iter().filter(|&i| self.filter.all_at_least(i, t)).collect()
    }

    /// Minimum over estimate bands of the bucket holding `i`; never below `xᵢ` when `x ≥ 0`.
    pub fn point_estimate(&mut self, i: u64) -> Result<f64> {
        if i >= self.n {
            return Err(Error::IndexOutOfRange { index: i, n: self.n });
        }
        if self.est.is_none() {
            return Err(Error::EstimatesDisabled);
        }
        self.flush();
        Ok(self.est.as_ref().expect("checked above").min_bucket(i))
    }

    /// Query list annotated with estimates, dropping estimates below `‖x‖₁/k`.
    pub fn query_with_estimates(&mut self) -> Result<Vec<(u64, f64)>> {
        if self.est.is_none() {
            return Err(Error::EstimatesDisabled);
        }
        let list = self.query();
        let t = self.threshold();
        let est = self.est.as_ref().expect("checked above");
        Ok(list.into_iter().map(|i| (i, est.min_bucket(i))).filter(|&(_, e)| e >= t).collect())
    }
}
