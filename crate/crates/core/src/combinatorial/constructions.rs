use super::{DesignKind, SparseDesign};
use crate::error::{invalid, Error, Result};
use crate::rng::{self, tags};
use crate::util::ceil_log2;

pub const DEFAULT_C1: u64 = 12;
pub const DEFAULT_C2: u64 = 4;
pub const DEFAULT_C3: u64 = 4;
/// Largest prime below 2^16; Kautz–Singleton fields stop here.
pub const MAX_TABLE_PRIME: u64 = 65_521;

fn check_kn(k: u64, n: u64) -> Result<()> {
    if k == 0 || n == 0 || k > n {
        return Err(invalid(format!("need 1 <= k <= n, got k = {k}, n = {n}")));
    }
    if n > u32::MAX as u64 {
        return Err(invalid("n must fit in 32 bits"));
    }
    Ok(())
}

fn banded_columns(bands: u64, width: u64, n: u64, seed: u64, tag: u64) -> Vec<Vec<u32>> {
    (0..n)
        .map(|i| {
            (0..bands)
                .map(|b| (b * width + rng::below(rng::derive2(seed, tag, b, i), width)) as u32)
                .collect()
        })
        .collect()
}

/// `bands` bands of `width` rows; each column gets one uniform row per band.
pub fn random_bands(bands: u64, width: u64, n: u64, k: u64, seed: u64) -> Result<SparseDesign> {
    if width == 0 {
        return Err(invalid("band width must be positive"));
    }
    if bands.saturating_mul(width) > u32::MAX as u64 {
        return Err(invalid("design has too many rows"));
    }
    let columns = banded_columns(bands, width, n, seed, tags::BANDS);
    SparseDesign::from_columns(DesignKind::RandomBand, k, (bands * width) as usize, seed, columns)
}

/// `ceil(log2(n/k))` bands of `c1·k` rows (at least one band).
pub fn random_list_disjunct(k: u64, n: u64, c1: u64, seed: u64) -> Result<SparseDesign> {
    check_kn(k, n)?;
    if c1 == 0 {
        return Err(invalid("c1 must be positive"));
    }
    let bands = ceil_log2(n.div_ceil(k)).max(1) as u64;
    let width = c1 * k;
    let columns = banded_columns(bands, width, n, seed, tags::LIST_FILTER);
    SparseDesign::from_columns(DesignKind::RandomListDisjunct, k, (bands * width) as usize, seed, columns)
}

/// `c2·k·ceil(log2 n)` bands of `c3·k` buckets.
pub fn random_code_disjunct(k: u64, n: u64, c2: u64, c3: u64, seed: u64) -> Result<SparseDesign> {
    check_kn(k, n)?;
    if c2 == 0 || c3 == 0 {
        return Err(invalid("c2 and c3 must be positive"));
    }
    let bands = c2 * k * (ceil_log2(n).max(1) as u64);
    let width = c3 * k;
    if bands * width > u32::MAX as u64 {
        return Err(invalid("design has too many rows"));
    }
    let columns = banded_columns(bands, width, n, seed, tags::DISJUNCT);
    SparseDesign::from_columns(DesignKind::RandomCodeDisjunct, k, (bands * width) as usize, seed, columns)
}

/// Primes `<= limit` by sieve.
pub fn primes_up_to(limit: u64) -> Vec<u64> {
    let limit = limit as usize;
    let mut composite = vec![false; limit + 1];
    let mut primes = Vec::new();
    for i in 2..=limit {
        if !composite[i] {
            primes.push(i as u64);
            let mut j = i * i;
            while j <= limit {
                composite[j] = true;
                j += i;
            }
        }
    }
    primes
}

fn smallest_pow_at_least(base: u64, target: u64) -> u32 {
    let mut t = 1;
    let mut acc = base as u128;
    while acc < target as u128 {
        acc *= base as u128;
        t += 1;
    }
    t
}

/// Field size `q` and message length `t` chosen for `kautz_singleton(k, n)`.
pub fn kautz_singleton_field(k: u64, n: u64) -> Result<(u64, u32)> {
    check_kn(k, n)?;
    let s = smallest_pow_at_least(k + 1, n) as u64;
    let target = 2 * k * s + 1;
    let q = primes_up_to(MAX_TABLE_PRIME)
        .into_iter()
        .find(|&p| p >= target)
        .ok_or(Error::PrimeTableExceeded(target))?;
    Ok((q, smallest_pow_at_least(q, n)))
}

/// Kautz–Singleton over the least tabulated prime field that makes it `k`-disjunct.
pub fn kautz_singleton(k: u64, n: u64) -> Result<SparseDesign> {
    let (q, t) = kautz_singleton_field(k, n)?;
    let mut d = kautz_singleton_with(q, t, n)?;
    d.k = k;
    Ok(d)
}

/// Columns are the Reed–Solomon codewords of the `n` lowest-numbered polynomials of
/// degree `< t` over GF(q) (coefficients are the base-`q` digits of the column
/// index), evaluated at every field element; row index = `position·q + symbol`.
pub fn kautz_singleton_with(q: u64, t: u32, n: u64) -> Result<SparseDesign> {
    if q > MAX_TABLE_PRIME || !primes_up_to(q).last().is_some_and(|&p| p == q) {
        return Err(invalid(format!("q = {q} is not a tabulated prime")));
    }
    if t == 0 || (q as u128).pow(t) < n as u128 {
        return Err(invalid(format!("{q}^{t} polynomials cannot index {n} columns")));
    }
    let columns = (0..n)
        .map(|i| {
            let mut coeffs = Vec::with_capacity(t as usize);
            let mut rest = i;
            for _ in 0..t {
                coeffs.push(rest % q);
                rest /= q;
            }
            (0..q)
                .map(|a| {
                    let symbol = coeffs.iter().rev().fold(0u64, |acc, &c| (acc * a + c) % q);
                    (a * q + symbol) as u32
                })
                .collect()
        })
        .collect();
    // A column's support lists one row per position, already sorted.
    let k = (q - 1) / (t as u64).saturating_sub(1).max(1);
    SparseDesign::from_columns(DesignKind::KautzSingleton, k, (q * q) as usize, 0, columns)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::combinatorial::{verify_disjunct, verify_list_disjunct, DEFAULT_VERIFY_BUDGET};

    #[test]
    fn list_disjunct_shape() {
        let d = random_list_disjunct(2, 8, 8, 1).unwrap();
        assert_eq!(d.rows(), 32);
        assert!(d.columns().iter().all(|c| c.len() == 2));
        assert_eq!(d, random_list_disjunct(2, 8, 8, 1).unwrap());
        assert_ne!(d, random_list_disjunct(2, 8, 8, 2).unwrap());
        assert!(random_list_disjunct(0, 8, 8, 1).is_err());
        assert!(random_list_disjunct(9, 8, 8, 1).is_err());
    }

    #[test]
    fn code_disjunct_shape() {
        let d = random_code_disjunct(1, 4, DEFAULT_C2, DEFAULT_C3, 1).unwrap();
        assert!(d.columns().iter().all(|c| c.len() == (DEFAULT_C2 * 2) as usize));
        assert_eq!(d.rows(), (DEFAULT_C2 * DEFAULT_C3 * 2) as usize);
        let d = random_code_disjunct(2, 16, 4, 4, 1).unwrap();
        assert_eq!(d.rows(), 4 * 4 * 4 * 4);
    }

    #[test]
    fn code_disjunct_point_query_covers_defectives() {
        let d = random_code_disjunct(3, 200, 4, 4, 5).unwrap();
        let s = [4u64, 77, 150];
        let y = d.measure(&s).unwrap();
        for i in s {
            assert!(d.point_query(&y, i).unwrap());
        }
    }

    #[test]
    fn code_disjunct_usually_verifies() {
        let passed = (0..100)
            .filter(|&seed| {
                let d = random_code_disjunct(2, 16, 4, 4, seed).unwrap();
                verify_disjunct(&d, 2, DEFAULT_VERIFY_BUDGET).unwrap()
            })
            .count();
        assert!(passed >= 90, "{passed}/100");
    }

    #[test]
    fn list_disjunct_usually_verifies() {
        let passed = (0..100)
            .filter(|&seed| {
                let d = random_list_disjunct(2, 32, 12, seed).unwrap();
                verify_list_disjunct(&d, 2, 2, DEFAULT_VERIFY_BUDGET).unwrap()
            })
            .count();
        assert!(passed >= 95, "{passed}/100");
    }

    #[test]
    fn sieve() {
        assert_eq!(primes_up_to(20), vec![2, 3, 5, 7, 11, 13, 17, 19]);
        assert_eq!(*primes_up_to(MAX_TABLE_PRIME).last().unwrap(), MAX_TABLE_PRIME);
    }

    #[test]
    fn kautz_singleton_parameters() {
        // k = 2, n = 64: s = ceil(log3 64) = 4, q >= 17, t = ceil(log17 64) = 2.
        assert_eq!(kautz_singleton_field(2, 64).unwrap(), (17, 2));
        let d = kautz_singleton(2, 64).unwrap();
        assert_eq!(d.rows(), 289);
        assert_eq!(d.k(), 2);
        assert!(d.columns().iter().all(|c| c.len() == 17));
        assert!(verify_disjunct(&d, 2, DEFAULT_VERIFY_BUDGET).unwrap());
        assert!(matches!(kautz_singleton_field(40_000, 1 << 31), Err(Error::PrimeTableExceeded(_))));
        assert!(kautz_singleton_with(15, 2, 10).is_err());
        assert!(kautz_singleton_with(5, 1, 10).is_err());
    }

    #[test]
    fn kautz_singleton_intersections_bounded_by_degree() {
        for (q, t) in [(5u64, 2u32), (7, 2), (5, 3), (11, 2)] {
            let n = q.pow(t);
            let d = kautz_singleton_with(q, t, n).unwrap();
            assert_eq!(n, d.n());
            for a in 0..n {
                for b in a + 1..n {
                    let ca = d.column(a).unwrap();
                    let cb = d.column(b).unwrap();
                    let shared = ca.iter().filter(|r| cb.binary_search(r).is_ok()).count();
                    assert!(shared < t as usize, "q={q} t={t} columns {a},{b} share {shared}");
                }
            }
        }
    }
}
