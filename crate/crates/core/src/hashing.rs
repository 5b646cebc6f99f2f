//! κ-wise independent hashing over Mersenne prime fields.
//!
//! A [`KWiseHash`] is a random polynomial of degree κ-1 over GF(p) reduced into
//! `[0, range)`. A [`LevelHash`] is the restriction of one packed polynomial to the
//! keys `{2^ℓ, …, 2^{ℓ+1}-1}`, which lets a single hash serve every prefix length
//! of the identification matrix.

use rand::Rng;

use crate::error::{Error, Result};
use crate::rng::{self, tags};

/// `(largest admissible domain bits, Mersenne exponent)`, smallest prime first.
/// Each prime satisfies `p >= 2 * 2^bits`.
pub const PRIME_TABLE: [(u32, u32); 2] = [(29, 31), (40, 61)];

/// Evaluation of a bucket hash.
pub trait BucketHash {
    fn range(&self) -> u64;

    fn eval(&self, key: u64) -> Result<u64>;

    /// Multipoint evaluation. Elementwise identical to mapping [`BucketHash::eval`].
    fn eval_batch(&self, keys: &[u64]) -> Result<Vec<u64>> {
        keys.iter().map(|&k| self.eval(k)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct KWiseHash {
    exponent: u32,
    prime: u64,
    domain_bits: u32,
    range: u64,
    coefficients: Vec<u64>,
}

#[inline]
fn reduce(x: u128, exponent: u32, prime: u64) -> u64 {
    let p = prime as u128;
    let mut r = (x & p) + (x >> exponent);
    r = (r & p) + (r >> exponent);
    let r = r as u64;
    if r >= prime {
        r - prime
    } else {
        r
    }
}

impl KWiseHash {
    /// Builds a hash with `degree` coefficients drawn from the seeded stream.
    pub fn new(degree: usize, range: u64, domain_bits: u32, seed: u64) -> Result<Self> {
        if degree == 0 {
            return Err(Error::InvalidParameter("hash degree must be at least 1".into()));
        }
        if range == 0 {
            return Err(Error::InvalidParameter("hash range must be at least 1".into()));
        }
        let (_, exponent) = PRIME_TABLE
            .iter()
            .copied()
            .find(|&(bits, _)| domain_bits <= bits)
            .ok_or(Error::UnsupportedDomain(domain_bits))?;
        let prime = (1u64 << exponent) - 1;
        let mut stream = rng::stream(seed, tags::KWISE_COEFF, 0);
        let coefficients = (0..degree).map(|_| stream.gen_range(0..prime)).collect();
        Ok(Self { exponent, prime, domain_bits, range, coefficients })
    }

    pub fn degree(&self) -> usize {
        self.coefficients.len()
    }

    pub fn prime(&self) -> u64 {
        self.prime
    }

    pub fn domain_bits(&self) -> u32 {
        self.domain_bits
    }

    pub fn coefficients(&self) -> &[u64] {
        &self.coefficients
    }

    /// Horner evaluation; `key` must already be checked against the domain.
    #[inline]
    pub(crate) fn eval_unchecked(&self, key: u64) -> u64 {
        let x = key as u128;
        let mut acc = 0u64;
        for &c in self.coefficients.iter().rev() {
            acc = reduce(acc as u128 * x + c as u128, self.exponent, self.prime);
        }
        acc % self.range
    }

    /// The restriction of this hash to prefixes of length `level`.
    pub fn level(&self, level: u32) -> Result<LevelHash<'_>> {
        if level >= self.domain_bits {
            return Err(Error::InvalidParameter(format!(
                "level {level} needs keys of {} bits, domain has {}",
                level + 1,
                self.domain_bits
            )));
        }
        Ok(LevelHash { parent: self, level })
    }
}

impl BucketHash for KWiseHash {
    fn range(&self) -> u64 {
        self.range
    }

    fn eval(&self, key: u64) -> Result<u64> {
        if self.domain_bits < 64 && key >> self.domain_bits != 0 {
            return Err(Error::KeyOutOfDomain { key, bits: self.domain_bits });
        }
        Ok(self.eval_unchecked(key))
    }

    fn eval_batch(&self, keys: &[u64]) -> Result<Vec<u64>> {
        if let Some(&key) = keys.iter().find(|&&k| k >> self.domain_bits != 0) {
            return Err(Error::KeyOutOfDomain { key, bits: self.domain_bits });
        }
        // TODO: switch to subproduct-tree multipoint evaluation once batches exceed
        // a few thousand keys; per-key Horner is faster below that.
        Ok(keys.iter().map(|&k| self.eval_unchecked(k)).collect())
    }
}

/// `h_ℓ(p) = g(2^ℓ + p)` for prefixes `p` of bit-length `ℓ`.
#[derive(Debug, Clone, Copy)]
pub struct LevelHash<'a> {
    parent: &'a KWiseHash,
    level: u32,
}

impl<'a> LevelHash<'a> {
    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn parent(&self) -> &'a KWiseHash {
        self.parent
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, prefix: u64) -> u64 {
        self.parent.eval_unchecked((1u64 << self.level) | prefix)
    }

    fn check(&self, prefix: u64) -> Result<()> {
        if prefix >> self.level != 0 {
            return Err(Error::PrefixLength { prefix, len: self.level });
        }
        Ok(())
    }
}

impl BucketHash for LevelHash<'_> {
    fn range(&self) -> u64 {
        self.parent.range
    }

    fn eval(&self, prefix: u64) -> Result<u64> {
        self.check(prefix)?;
        Ok(self.eval_unchecked(prefix))
    }

    fn eval_batch(&self, prefixes: &[u64]) -> Result<Vec<u64>> {
        prefixes.iter().try_for_each(|&p| self.check(p))?;
        let offset = 1u64 << self.level;
        let keys: Vec<u64> = prefixes.iter().map(|&p| offset | p).collect();
        self.parent.eval_batch(&keys)
    }
}
