//! Sparse 0/1 test designs stored by column support, with the naive decoder and
//! point queries.

pub(crate) mod codec;
mod constructions;
mod verify;

pub use codec::{decode_design, encode_design, read_design, write_design, SNAPSHOT_VERSION};
pub use constructions::{
    kautz_singleton, kautz_singleton_with, kautz_singleton_field, primes_up_to, random_bands,
    random_code_disjunct, random_list_disjunct, DEFAULT_C1, DEFAULT_C2, DEFAULT_C3, MAX_TABLE_PRIME,
};
pub use verify::{certify_disjunct, for_each_subset, verify_disjunct, verify_list_disjunct, DEFAULT_VERIFY_BUDGET};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DesignKind {
    RandomListDisjunct,
    RandomCodeDisjunct,
    KautzSingleton,
    /// Generic banded design (one uniform row per band per column).
    RandomBand,
}

impl DesignKind {
    pub(crate) fn code(self) -> u8 {
        match self {
            DesignKind::RandomListDisjunct => 1,
            DesignKind::RandomCodeDisjunct => 2,
            DesignKind::KautzSingleton => 3,
            DesignKind::RandomBand => 4,
        }
    }

    pub(crate) fn from_code(code: u8) -> Option<Self> {
        Some(match code {
            1 => DesignKind::RandomListDisjunct,
            2 => DesignKind::RandomCodeDisjunct,
            3 => DesignKind::KautzSingleton,
            4 => DesignKind::RandomBand,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SparseDesign {
    kind: DesignKind,
    k: u64,
    n: u64,
    m: usize,
    seed: u64,
    columns: Vec<Vec<u32>>,
}

impl SparseDesign {
    /// Validates and wraps explicit column supports. Supports are sorted and deduplicated.
    pub fn from_columns(
        kind: DesignKind,
        k: u64,
        m: usize,
        seed: u64,
        mut columns: Vec<Vec<u32>>,
    ) -> Result<Self> {
        for col in &mut columns {
            col.sort_unstable();
            col.dedup();
            if let Some(&r) = col.last() {
                if r as usize >= m {
                    return Err(Error::InvalidParameter(format!("row {r} outside {m} rows")));
                }
            }
        }
        Ok(Self { kind, k, n: columns.len() as u64, m, seed, columns })
    }

    pub fn kind(&self) -> DesignKind {
        self.kind
    }

    pub fn k(&self) -> u64 {
        self.k
    }

    pub fn n(&self) -> u64 {
        self.n
    }

    pub fn rows(&self) -> usize {
        self.m
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn column(&self, i: u64) -> Result<&[u32]> {
        self.columns
            .get(i as usize)
            .map(Vec::as_slice)
            .ok_or(Error::IndexOutOfRange { index: i, n: self.n })
    }

    pub fn columns(&self) -> &[Vec<u32>] {
        &self.columns
    }

    pub fn max_column_sparsity(&self) -> usize {
        self.columns.iter().map(Vec::len).max().unwrap_or(0)
    }

    fn check_len(&self, outcome: &[bool]) -> Result<()> {
        if outcome.len() != self.m {
            return Err(Error::Mismatch(format!("outcome has {} bits, design has {} rows", outcome.len(), self.m)));
        }
        Ok(())
    }

    /// OR of the columns in `support`.
    pub fn measure(&self, support: &[u64]) -> Result<Vec<bool>> {
        let mut out = vec![false; self.m];
        for &i in support {
            for &r in self.column(i)? {
                out[r as usize] = true;
            }
        }
        Ok(out)
    }

    /// Columns whose support is covered by the positive tests.
    pub fn naive_decode(&self, outcome: &[bool]) -> Result<Vec<u64>> {
        self.check_len(outcome)?;
        Ok((0..self.n)
            .filter(|&i| self.columns[i as usize].iter().all(|&r| outcome[r as usize]))
            .collect())
    }

    pub fn point_query(&self, outcome: &[bool], i: u64) -> Result<bool> {
        self.noisy_point_query(outcome, i, 0)
    }

    /// `true` iff at most `fn_slack` rows of column `i` tested negative.
    pub fn noisy_point_query(&self, outcome: &[bool], i: u64, fn_slack: usize) -> Result<bool> {
        self.check_len(outcome)?;
        let mut negatives = 0;
        for &r in self.column(i)? {
            if !outcome[r as usize] {
                negatives += 1;
                if negatives > fn_slack {
                    return Ok(false);
                }
            }
        }
        Ok(true)
    }

    /// Noisy naive decoder: every column with at most `fn_slack` negative rows.
    pub fn noisy_naive_decode(&self, outcome: &[bool], fn_slack: usize) -> Result<Vec<u64>> {
        self.check_len(outcome)?;
        let mut out = Vec::new();
        for i in 0..self.n {
            if self.noisy_point_query(outcome, i, fn_slack)? {
                out.push(i);
            }
        }
        Ok(out)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use rand::Rng;

    fn identity(n: usize) -> SparseDesign {
        SparseDesign::from_columns(DesignKind::RandomBand, 1, n, 0, (0..n as u32).map(|i| vec![i]).collect()).unwrap()
    }

    #[test]
    fn naive_decode_extremes() {
        let d = random_list_disjunct(2, 32, 12, 1).unwrap();
        assert!(d.naive_decode(&vec![false; d.rows()]).unwrap().is_empty());
        assert_eq!(d.naive_decode(&vec![true; d.rows()]).unwrap(), (0..32).collect::<Vec<_>>());
        assert!(d.naive_decode(&[true]).is_err());
    }

    #[test]
    fn measure_semantics() {
        let d = random_code_disjunct(2, 16, 4, 4, 3).unwrap();
        assert!(d.measure(&[]).unwrap().iter().all(|&b| !b));
        let single = d.measure(&[5]).unwrap();
        let rows: Vec<u32> = (0..d.rows() as u32).filter(|&r| single[r as usize]).collect();
        assert_eq!(rows, d.column(5).unwrap());
        let a = d.measure(&[1, 2]).unwrap();
        let b = d.measure(&[9]).unwrap();
        let ab: Vec<bool> = a.iter().zip(&b).map(|(x, y)| *x || *y).collect();
        assert_eq!(d.measure(&[1, 2, 9]).unwrap(), ab);
        assert!(d.measure(&[16]).is_err());
    }

    #[test]
    fn point_queries_agree_with_naive_decoder() {
        let d = random_list_disjunct(4, 256, 12, 8).unwrap();
        let mut r = rng::stream(1, 1, 1);
        for _ in 0..50 {
            let outcome: Vec<bool> = (0..d.rows()).map(|_| r.gen_bool(0.6)).collect();
            let naive = d.naive_decode(&outcome).unwrap();
            let pq: Vec<u64> = (0..d.n()).filter(|&i| d.point_query(&outcome, i).unwrap()).collect();
            assert_eq!(naive, pq);
        }
        assert!(d.point_query(&vec![true; d.rows()], 3).unwrap());
        assert!(d.point_query(&vec![true; d.rows()], 256).is_err());
    }

    #[test]
    fn noisy_point_query_slack() {
        let d = random_list_disjunct(4, 256, 12, 8).unwrap();
        let mut r = rng::stream(2, 1, 1);
        for _ in 0..10_000 {
            let outcome: Vec<bool> = (0..d.rows()).map(|_| r.gen_bool(0.97)).collect();
            let i = r.gen_range(0..d.n());
            assert_eq!(d.noisy_point_query(&outcome, i, 0).unwrap(), d.point_query(&outcome, i).unwrap());
        }
        let mut outcome = d.measure(&[10, 20]).unwrap();
        outcome[d.column(10).unwrap()[0] as usize] = false;
        assert!(!d.noisy_point_query(&outcome, 10, 0).unwrap());
        assert!(d.noisy_point_query(&outcome, 10, 1).unwrap());
    }

    #[test]
    fn noisy_decode_keeps_defectives_with_controlled_flips() {
        let e1 = 3;
        let d = random_bands(16, 48, 1024, 4, 77).unwrap();
        let mut r = rng::stream(3, 3, 3);
        for _ in 0..50 {
            let support: Vec<u64> = rand::seq::index::sample(&mut r, 1024, 4).into_iter().map(|i| i as u64).collect();
            let mut outcome = d.measure(&support).unwrap();
            for &i in &support {
                let col = d.column(i).unwrap();
                for &row in rand::seq::index::sample(&mut r, col.len(), e1).into_iter().map(|j| &col[j]) {
                    outcome[row as usize] = false;
                }
            }
            let decoded = d.noisy_naive_decode(&outcome, e1 * support.len()).unwrap();
            for i in &support {
                assert!(d.noisy_point_query(&outcome, *i, e1 * support.len()).unwrap());
                assert!(decoded.contains(i));
            }
        }
    }

    #[test]
    fn identity_is_disjunct_and_all_ones_column_breaks_it() {
        let d = identity(5);
        assert!(verify_disjunct(&d, 4, DEFAULT_VERIFY_BUDGET).unwrap());
        let mut cols: Vec<Vec<u32>> = (0..4u32).map(|i| vec![i]).collect();
        cols.push(vec![0, 1, 2, 3]);
        let d = SparseDesign::from_columns(DesignKind::RandomBand, 1, 4, 0, cols).unwrap();
        assert!(!verify_disjunct(&d, 1, DEFAULT_VERIFY_BUDGET).unwrap());
    }

    #[test]
    fn from_columns_validates() {
        assert!(SparseDesign::from_columns(DesignKind::RandomBand, 1, 3, 0, vec![vec![3]]).is_err());
        let d = SparseDesign::from_columns(DesignKind::RandomBand, 1, 3, 0, vec![vec![2, 0, 2]]).unwrap();
        assert_eq!(d.column(0).unwrap(), &[0, 2]);
    }
}
