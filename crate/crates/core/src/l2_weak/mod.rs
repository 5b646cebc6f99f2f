//! ℓ2/ℓ2 weak identification: Gaussian bucket measurements over the prefix tree,
//! followed by CountSketch estimation and pruning to `2k` entries.

mod countsketch;

pub use countsketch::{CountSketch, DEFAULT_CS_BUCKETS, DEFAULT_CS_C};

use crate::design::{bprefix, DecodeStats};
use crate::error::{invalid, Error, Result};
use crate::hashing::KWiseHash;
use crate::rng::{self, tags};
use crate::util::{exact_log2, median, top_by_score};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeakParams {
    /// Repetitions and bucket width constant.
    pub c: f64,
    /// Survivors per level are `c_t·(k/ε)·log2(n/k)`.
    pub c_t: f64,
    /// Independence of the per-repetition hashes.
    pub kappa: usize,
    pub cs_c: f64,
    pub cs_buckets: u64,
}

impl Default for WeakParams {
    fn default() -> Self {
        Self { c: 8.0, c_t: 8.0, kappa: 8, cs_c: DEFAULT_CS_C, cs_buckets: DEFAULT_CS_BUCKETS }
    }
}

/// `log2(n/k) / log2 log2(n/k)`, taken as 1 when the ratio is degenerate.
fn shrink_ratio(span: u32) -> f64 {
    if span < 2 {
        1.0
    } else {
        span as f64 / (span as f64).log2()
    }
}

/// Power of two nearest to `x` (ties to the smaller), at least 2.
fn nearest_pow2(x: f64) -> u64 {
    let lo = (x.max(1.0).log2().floor() as u32).max(1);
    let (a, b) = (1u64 << lo, 1u64 << (lo + 1));
    if x - a as f64 <= b as f64 - x {
        a
    } else {
        b
    }
}

fn validate(k: u64, n: u64, eps: f64, delta: f64) -> Result<(u32, u32)> {
    let log_k = exact_log2(k, "k")?;
    let log_n = exact_log2(n, "n")?;
    if k > n {
        return Err(invalid(format!("k = {k} exceeds n = {n}")));
    }
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(invalid(format!("epsilon = {eps} outside (0, 1]")));
    }
    if !(delta > 0.0 && delta < 1.0) {
        return Err(invalid(format!("delta = {delta} outside (0, 1)")));
    }
    Ok((log_k, log_n))
}

#[derive(Debug, Clone)]
pub struct GaussianDesign {
    k: u64,
    n: u64,
    eps: f64,
    delta: f64,
    log_k: u32,
    log_n: u32,
    d: u32,
    height: usize,
    reps: usize,
    width: u64,
    list_cap: usize,
    gauss_seed: u64,
    hashes: Vec<KWiseHash>,
}

impl GaussianDesign {
    pub fn build(k: u64, n: u64, eps: f64, delta: f64, seed: u64) -> Result<Self> {
        Self::with_params(k, n, eps, delta, seed, &WeakParams::default())
    }

    pub fn with_params(k: u64, n: u64, eps: f64, delta: f64, seed: u64, params: &WeakParams) -> Result<Self> {
        let (log_k, log_n) = validate(k, n, eps, delta)?;
        if params.c <= 0.0 || params.c_t <= 0.0 || params.kappa == 0 {
            return Err(invalid("weak-system constants must be positive"));
        }
        let span = log_n - log_k;
        let ratio = shrink_ratio(span);
        let d = nearest_pow2(ratio).trailing_zeros();
        let height = span.div_ceil(d) as usize + 1;
        let reps = (params.c * (ratio + (1.0 / delta).log2() / k as f64)).ceil() as usize;
        let width = (params.c * k as f64 / eps).ceil() as u64;
        let list_cap = (params.c_t * (k as f64 / eps) * span.max(1) as f64).ceil() as usize;
        let hashes = (0..reps)
            .map(|r| KWiseHash::new(params.kappa, width, log_n + 1, rng::derive(seed, tags::WEAK_HASH, r as u64)))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self {
            k,
            n,
            eps,
            delta,
            log_k,
            log_n,
            d,
            height,
            reps,
            width,
            list_cap,
            gauss_seed: rng::derive(seed, tags::WEAK_GAUSS, 0),
            hashes,
        })
    }

    pub fn k(&self) -> u64 {
        self.k
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn eps(&self) -> f64 {
        self.eps
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Branching factor `D = 2^d`.
    pub fn branching(&self) -> u64 {
        1 << self.d
    }

    pub fn d(&self) -> u32 {
        self.d
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn reps(&self) -> usize {
        self.reps
    }

    /// Buckets per block, `ceil(C·k/ε)`.
    pub fn width(&self) -> u64 {
        self.width
    }

    pub fn rows(&self) -> usize {
        self.height * self.reps * self.width as usize
    }

    /// Prefixes kept per level.
    pub fn list_cap(&self) -> usize {
        self.list_cap
    }

    pub fn prefix_len(&self, level: usize) -> u32 {
        (self.log_k + level as u32 * self.d).min(self.log_n)
    }

    #[inline]
    fn bucket(&self, len: u32, rep: usize, prefix: u64) -> usize {
        self.hashes[rep].eval_unchecked((1u64 << len) | prefix) as usize
    }

    #[inline]
    fn gaussian(&self, level: usize, rep: usize, i: u64) -> f64 {
        rng::gaussian(rng::derive2(self.gauss_seed, tags::WEAK_GAUSS, (level * self.reps + rep) as u64, i))
    }

    /// Bucket and coefficient of column `i` in block `(level, rep)`.
    pub fn entry(&self, level: usize, rep: usize, i: u64) -> Result<(usize, f64)> {
        if i >= self.n {
            return Err(Error::IndexOutOfRange { index: i, n: self.n });
        }
        if level >= self.height || rep >= self.reps {
            return Err(invalid(format!("block ({level}, {rep}) outside {}x{}", self.height, self.reps)));
        }
        let len = self.prefix_len(level);
        Ok((self.bucket(len, rep, bprefix(i, self.log_n, len)?), self.gaussian(level, rep, i)))
    }

    /// `y[(ℓ·R + r)·width + q]`.
    pub fn measure(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() as u64 != self.n {
            return Err(Error::Mismatch(format!("vector has {} entries, design has {} columns", x.len(), self.n)));
        }
        self.measure_sparse(x.iter().enumerate().filter(|(_, &v)| v != 0.0).map(|(i, &v)| (i as u64, v)))
    }

    pub fn measure_sparse(&self, entries: impl IntoIterator<Item = (u64, f64)>) -> Result<Vec<f64>> {
        let w = self.width as usize;
        let mut y = vec![0.0; self.rows()];
        for (i, v) in entries {
            if i >= self.n {
                return Err(Error::IndexOutOfRange { index: i, n: self.n });
            }
            for level in 0..self.height {
                let len = self.prefix_len(level);
                let p = i >> (self.log_n - len);
                for r in 0..self.reps {
                    y[(level * self.reps + r) * w + self.bucket(len, r, p)] += self.gaussian(level, r, i) * v;
                }
            }
        }
        Ok(y)
    }

    pub fn identify(&self, y: &[f64]) -> Result<Vec<u64>> {
        self.identify_with_stats(y).map(|(l, _)| l)
    }

    /// Keeps the `list_cap` prefixes with the largest median `|y|` at every level.
    pub fn identify_with_stats(&self, y: &[f64]) -> Result<(Vec<u64>, DecodeStats)> {
        if y.len() != self.rows() {
            return Err(Error::Mismatch(format!("{} measurements, design has {}", y.len(), self.rows())));
        }
        let w = self.width as usize;
        let mut stats = DecodeStats { prefixes_inserted: self.k, tests_read: 0 };
        let mut list: Vec<u64> = (0..self.k).collect();
        let mut vals = vec![0.0; self.reps];
        for level in 0..self.height {
            let len = self.prefix_len(level);
            let base = level * self.reps * w;
            let scored: Vec<(u64, f64)> = list
                .iter()
                .map(|&p| {
                    for (r, v) in vals.iter_mut().enumerate() {
                        *v = y[base + r * w + self.bucket(len, r, p)].abs();
                    }
                    (p, median(&mut vals))
                })
                .collect();
            stats.tests_read += (list.len() * self.reps) as u64;
            list = top_by_score(scored, self.list_cap);
            if level + 1 == self.height {
                return Ok((list, stats));
            }
            let step = self.prefix_len(level + 1) - len;
            stats.prefixes_inserted += (list.len() as u64) << step;
            list = list.iter().flat_map(|&p| (0..1u64 << step).map(move |s| (p << step) | s)).collect();
        }
        unreachable!("the final level always returns")
    }

    /// `true` iff no two distinct-prefix members of `support` share a bucket in more
    /// than half the repetitions of any level.
    pub fn collision_free(&self, support: &[u64]) -> Result<bool> {
        if let Some(&i) = support.iter().find(|&&i| i >= self.n) {
            return Err(Error::IndexOutOfRange { index: i, n: self.n });
        }
        for level in 0..self.height {
            let len = self.prefix_len(level);
            for (a, &i) in support.iter().enumerate() {
                for &j in &support[a + 1..] {
                    let (pi, pj) = (i >> (self.log_n - len), j >> (self.log_n - len));
                    if pi == pj {
                        continue;
                    }
                    let shared = (0..self.reps).filter(|&r| self.bucket(len, r, pi) == self.bucket(len, r, pj)).count();
                    if 2 * shared > self.reps {
                        return Ok(false);
                    }
                }
            }
        }
        Ok(true)
    }
}

/// Gaussian identification plus CountSketch pruning.
#[derive(Debug, Clone)]
pub struct WeakSystem {
    pub design: GaussianDesign,
    pub sketch: CountSketch,
}

#[derive(Debug, Clone, PartialEq)]
pub struct WeakMeasurement {
    pub ident: Vec<f64>,
    pub sketch: Vec<f64>,
}

impl WeakSystem {
    pub fn build(k: u64, n: u64, eps: f64, delta: f64, seed: u64) -> Result<Self> {
        Self::with_params(k, n, eps, delta, seed, &WeakParams::default())
    }

    pub fn with_params(k: u64, n: u64, eps: f64, delta: f64, seed: u64, params: &WeakParams) -> Result<Self> {
        let design = GaussianDesign::with_params(k, n, eps, delta, seed, params)?;
        let sketch = CountSketch::with_params(k, n, delta, seed, params.cs_c, params.cs_buckets)?;
        Ok(Self { design, sketch })
    }

    pub fn rows(&self) -> usize {
        self.design.rows() + self.sketch.rows()
    }

    pub fn measure(&self, x: &[f64]) -> Result<WeakMeasurement> {
        Ok(WeakMeasurement { ident: self.design.measure(x)?, sketch: self.sketch.measure(x)? })
    }

    /// At most `2k` entries `(index, value)`, sorted by index.
    pub fn recover(&self, m: &WeakMeasurement) -> Result<Vec<(u64, f64)>> {
        let candidates = self.design.identify(&m.ident)?;
        self.sketch.estimate_and_prune(&m.sketch, &candidates, 2 * self.design.k() as usize)
    }

    pub fn collision_free(&self, support: &[u64]) -> Result<bool> {
        Ok(self.design.collision_free(support)? && self.sketch.collision_free(support)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::util::norm_without_top;
    use rand::Rng;

    #[test]
    fn parameter_arithmetic() {
        let d = GaussianDesign::build(4, 1 << 16, 0.5, 0.1, 1).unwrap();
        assert_eq!((d.branching(), d.d(), d.height()), (4, 2, 8));
        // R = ceil(8·(14/log2 14 + log2 10 / 4))
        let ratio = 14.0 / 14f64.log2();
        assert_eq!(d.reps(), (8.0 * (ratio + 10f64.log2() / 4.0)).ceil() as usize);
        assert_eq!(d.width(), 64);
        assert_eq!(d.rows(), d.height() * d.reps() * 64);
        assert_eq!(d.list_cap(), 8 * 8 * 14);
        let d = GaussianDesign::build(8, 1 << 14, 0.5, 0.1, 1).unwrap();
        assert_eq!((d.branching(), d.height(), d.prefix_len(6)), (4, 7, 14));
        assert!(GaussianDesign::build(8, 1 << 14, 0.0, 0.1, 1).is_err());
        assert!(GaussianDesign::build(8, 1 << 14, 0.5, 1.0, 1).is_err());
        assert!(GaussianDesign::build(6, 1 << 14, 0.5, 0.1, 1).is_err());
        let tiny = GaussianDesign::build(4, 8, 0.5, 0.1, 1).unwrap();
        assert_eq!((tiny.branching(), tiny.height()), (2, 2));
    }

    #[test]
    fn nearest_power_of_two() {
        assert_eq!(nearest_pow2(3.68), 4);
        assert_eq!(nearest_pow2(2.9), 2);
        assert_eq!(nearest_pow2(3.0), 2);
        assert_eq!(nearest_pow2(1.0), 2);
        assert_eq!(nearest_pow2(6.5), 8);
    }

    #[test]
    fn entries_regenerate_identically() {
        let a = GaussianDesign::build(4, 1 << 10, 0.5, 0.1, 33).unwrap();
        let b = GaussianDesign::build(4, 1 << 10, 0.5, 0.1, 33).unwrap();
        let (q1, g1) = a.entry(1, 0, 7).unwrap();
        let (q2, g2) = b.entry(1, 0, 7).unwrap();
        assert_eq!(q1, q2);
        assert_eq!(g1.to_bits(), g2.to_bits());
        assert!(a.entry(a.height(), 0, 7).is_err());
    }

    #[test]
    fn unit_vector_measurement() {
        let d = GaussianDesign::build(4, 1 << 10, 0.5, 0.1, 2).unwrap();
        assert!(d.measure(&vec![0.0; 1024]).unwrap().iter().all(|&v| v == 0.0));
        let mut x = vec![0.0; 1024];
        x[300] = 1.0;
        let y = d.measure(&x).unwrap();
        let w = d.width() as usize;
        for level in 0..d.height() {
            for r in 0..d.reps() {
                let block = &y[(level * d.reps() + r) * w..][..w];
                let (q, g) = d.entry(level, r, 300).unwrap();
                assert_eq!(block.iter().filter(|&&v| v != 0.0).count(), 1);
                assert_eq!(block[q], g);
            }
        }
        assert!(d.measure(&[1.0]).is_err());
    }

    #[test]
    fn measurement_is_linear() {
        let d = GaussianDesign::build(4, 1 << 10, 0.5, 0.1, 3).unwrap();
        let mut r = rng::stream(1, 1, 1);
        let x: Vec<f64> = (0..1024).map(|_| r.gen_range(-1.0..1.0)).collect();
        let z: Vec<f64> = (0..1024).map(|_| r.gen_range(-1.0..1.0)).collect();
        let (a, b) = (1.7, -0.3);
        let mix: Vec<f64> = x.iter().zip(&z).map(|(u, v)| a * u + b * v).collect();
        let (yx, yz, ym) = (d.measure(&x).unwrap(), d.measure(&z).unwrap(), d.measure(&mix).unwrap());
        for j in 0..ym.len() {
            let expect = a * yx[j] + b * yz[j];
            assert!((ym[j] - expect).abs() <= 1e-9 * (1.0 + expect.abs()));
        }
    }

    #[test]
    fn zero_measurements_give_smallest_prefixes() {
        let d = GaussianDesign::build(2, 1 << 8, 1.0, 0.1, 4).unwrap();
        let (list, _) = d.identify_with_stats(&vec![0.0; d.rows()]).unwrap();
        assert_eq!(list, (0..d.list_cap().min(256) as u64).collect::<Vec<_>>());
        assert!(d.identify(&[0.0]).is_err());
    }

    #[test]
    fn single_spike_is_found_and_recovered() {
        for seed in 0..20 {
            let sys = WeakSystem::build(8, 1 << 12, 0.5, 0.1, seed).unwrap();
            let i = rng::below(rng::derive(seed, 1, 1), 1 << 12);
            let mut x = vec![0.0; 1 << 12];
            x[i as usize] = 1.0;
            let m = sys.measure(&x).unwrap();
            assert!(sys.design.identify(&m.ident).unwrap().contains(&i));
            assert_eq!(sys.recover(&m).unwrap(), vec![(i, 1.0)]);
        }
    }

    #[test]
    fn exactly_sparse_inputs_recover_exactly_when_collision_free() {
        let (k, n) = (8u64, 1u64 << 12);
        let mut checked = 0;
        for seed in 0..20 {
            let sys = WeakSystem::build(k, n, 0.5, 0.1, seed).unwrap();
            let mut r = rng::stream(seed, 2, 2);
            let support: Vec<u64> = rand::seq::index::sample(&mut r, n as usize, k as usize).into_iter().map(|i| i as u64).collect();
            let mut x = vec![0.0; n as usize];
            for &i in &support {
                x[i as usize] = r.gen_range(1.0..4.0) * if r.gen_bool(0.5) { 1.0 } else { -1.0 };
            }
            if !sys.collision_free(&support).unwrap() {
                continue;
            }
            checked += 1;
            let out = sys.recover(&sys.measure(&x).unwrap()).unwrap();
            assert!(out.len() <= 2 * k as usize);
            let mut resid = x.clone();
            for &(i, v) in &out {
                resid[i as usize] -= v;
            }
            assert_eq!(norm_without_top(&resid, 0), 0.0, "seed {seed}");
        }
        assert!(checked >= 15);
    }
}
