use crate::error::{invalid, Error, Result};
use crate::rng::{self, tags};
use crate::util::{exact_log2, median, top_by_score};

pub const DEFAULT_CS_C: f64 = 2.0;
pub const DEFAULT_CS_BUCKETS: u64 = 8;

/// `R'` bands of `c'·k` signed buckets; each column has one position and one sign per band.
#[derive(Debug, Clone)]
pub struct CountSketch {
    n: u64,
    bands: usize,
    buckets: u64,
    seed: u64,
}

impl CountSketch {
    pub fn build(k: u64, n: u64, delta: f64, seed: u64) -> Result<Self> {
        Self::with_params(k, n, delta, seed, DEFAULT_CS_C, DEFAULT_CS_BUCKETS)
    }

    /// `R' = ceil(c·(log2(n/k) + log2(1/δ)/k))` bands of `bucket_factor·k` buckets.
    pub fn with_params(k: u64, n: u64, delta: f64, seed: u64, c: f64, bucket_factor: u64) -> Result<Self> {
        let log_k = exact_log2(k, "k")?;
        let log_n = exact_log2(n, "n")?;
        if k > n || !(delta > 0.0 && delta < 1.0) || c <= 0.0 || bucket_factor == 0 {
            return Err(invalid("CountSketch needs k <= n, 0 < δ < 1 and positive constants"));
        }
        let span = (log_n - log_k) as f64;
        let bands = ((c * (span + (1.0 / delta).log2() / k as f64)).ceil() as usize).max(1);
        Ok(Self { n, bands, buckets: bucket_factor * k, seed: rng::derive(seed, tags::CS_POS, 0) })
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    pub fn buckets(&self) -> u64 {
        self.buckets
    }

    pub fn rows(&self) -> usize {
        self.bands * self.buckets as usize
    }

    /// Position (within band) and sign of column `i` in band `r`.
    #[inline]
    pub fn cell(&self, r: usize, i: u64) -> (usize, f64) {
        let pos = rng::below(rng::derive2(self.seed, tags::CS_POS, r as u64, i), self.buckets) as usize;
        let sign = if rng::derive2(self.seed, tags::CS_SIGN, r as u64, i) >> 63 == 0 { 1.0 } else { -1.0 };
        (pos, sign)
    }

    pub fn measure(&self, x: &[f64]) -> Result<Vec<f64>> {
        if x.len() as u64 != self.n {
            return Err(Error::Mismatch(format!("vector has {} entries, sketch has {} columns", x.len(), self.n)));
        }
        let w = self.buckets as usize;
        let mut y = vec![0.0; self.rows()];
        for (i, &v) in x.iter().enumerate().filter(|(_, &v)| v != 0.0) {
            for r in 0..self.bands {
                let (q, s) = self.cell(r, i as u64);
                y[r * w + q] += s * v;
            }
        }
        Ok(y)
    }

    fn check_len(&self, y: &[f64]) -> Result<()> {
        if y.len() != self.rows() {
            return Err(Error::Mismatch(format!("{} measurements, sketch has {}", y.len(), self.rows())));
        }
        Ok(())
    }

    /// Median over bands of `σ(r,i)·y[r][q(r,i)]`.
    pub fn estimate(&self, y: &[f64], i: u64) -> Result<f64> {
        self.check_len(y)?;
        if i >= self.n {
            return Err(Error::IndexOutOfRange { index: i, n: self.n });
        }
        let w = self.buckets as usize;
        let mut vals: Vec<f64> = (0..self.bands)
            .map(|r| {
                let (q, s) = self.cell(r, i);
                s * y[r * w + q]
            })
            .collect();
        Ok(median(&mut vals))
    }

    /// Estimates every candidate and keeps the `keep` largest in magnitude (ties to the
    /// smaller index); zero estimates are dropped. Sorted by index.
    pub fn estimate_and_prune(&self, y: &[f64], candidates: &[u64], keep: usize) -> Result<Vec<(u64, f64)>> {
        let mut est = Vec::with_capacity(candidates.len());
        for &i in candidates {
            let v = self.estimate(y, i)?;
            if v != 0.0 {
                est.push((i, v));
            }
        }
        let kept = top_by_score(est.iter().map(|&(i, v)| (i, v.abs())).collect(), keep);
        Ok(est.into_iter().filter(|(i, _)| kept.binary_search(i).is_ok()).collect())
    }

    /// `true` iff every member of `support` shares its bucket with another member in at
    /// most `floor((R'-1)/2)` bands, so the median of each is exact on a zero tail.
    pub fn collision_free(&self, support: &[u64]) -> Result<bool> {
        if let Some(&i) = support.iter().find(|&&i| i >= self.n) {
            return Err(Error::IndexOutOfRange { index: i, n: self.n });
        }
        let limit = (self.bands - 1) / 2;
        for &i in support {
            let hit = (0..self.bands)
                .filter(|&r| {
                    let q = self.cell(r, i).0;
                    support.iter().any(|&j| j != i && self.cell(r, j).0 == q)
                })
                .count();
            if hit > limit {
                return Ok(false);
            }
        }
        Ok(true)
    }
}
