//! Composed group-testing schemes: identification followed by point-query filters.

use crate::combinatorial::{
    kautz_singleton, kautz_singleton_field, random_bands, random_code_disjunct, random_list_disjunct,
    DesignKind, SparseDesign, DEFAULT_C1, DEFAULT_C2, DEFAULT_C3,
};
use crate::design::{DecodeStats, IdentParams, IdentificationDesign, Outcome};
use crate::error::{invalid, Error, Result};
use crate::rng::{self, tags};
use crate::util::ceil_log2;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PipelineParams {
    pub ident: IdentParams,
    pub c1: u64,
    pub c2: u64,
    pub c3: u64,
}

impl Default for PipelineParams {
    fn default() -> Self {
        Self { ident: IdentParams::default(), c1: DEFAULT_C1, c2: DEFAULT_C2, c3: DEFAULT_C3 }
    }
}

fn filter_list(design: &SparseDesign, outcome: &[bool], list: Vec<u64>) -> Result<Vec<u64>> {
    let mut kept = Vec::with_capacity(list.len());
    for i in list {
        if design.point_query(outcome, i)? {
            kept.push(i);
        }
    }
    Ok(kept)
}

/// Identification matrix stacked on a random `(k, k)`-list-disjunct filter.
#[derive(Debug, Clone)]
pub struct ListPipeline {
    pub ident: IdentificationDesign,
    pub filter: SparseDesign,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ListOutcome {
    pub ident: Outcome,
    pub filter: Vec<bool>,
}

impl ListPipeline {
    pub fn build(k: u64, n: u64, seed: u64, params: &PipelineParams) -> Result<Self> {
        let ident = IdentificationDesign::with_params(k, n, rng::derive(seed, tags::IDENT, 1), &params.ident)?;
        let filter = random_list_disjunct(k, n, params.c1, rng::derive(seed, tags::LIST_FILTER, 0))?;
        Ok(Self { ident, filter })
    }

    pub fn rows(&self) -> usize {
        self.ident.rows() + self.filter.rows()
    }

    pub fn measure(&self, support: &[u64]) -> Result<ListOutcome> {
        Ok(ListOutcome { ident: self.ident.measure(support)?, filter: self.filter.measure(support)? })
    }

    pub fn decode_list(&self, outcome: &ListOutcome) -> Result<Vec<u64>> {
        self.decode_list_with_stats(outcome).map(|(l, _)| l)
    }

    pub fn decode_list_with_stats(&self, outcome: &ListOutcome) -> Result<(Vec<u64>, DecodeStats)> {
        let (list, mut stats) = self.ident.identify_with_stats(&outcome.ident)?;
        stats.tests_read += list.len() as u64 * self.filter.max_column_sparsity() as u64;
        Ok((filter_list(&self.filter, &outcome.filter, list)?, stats))
    }
}

/// Picks Kautz–Singleton when its `q²` rows beat the random code's `c2·c3·k²·log n`.
pub fn disjunct_filter(k: u64, n: u64, c2: u64, c3: u64, seed: u64) -> Result<SparseDesign> {
    let random_rows = (c2 * c3 * k * k) as u128 * ceil_log2(n).max(1) as u128;
    match kautz_singleton_field(k, n) {
        Ok((q, _)) if (q as u128 * q as u128) < random_rows => kautz_singleton(k, n),
        Ok(_) | Err(Error::PrimeTableExceeded(_)) => random_code_disjunct(k, n, c2, c3, seed),
        Err(e) => Err(e),
    }
}

/// List pipeline followed by a `k`-disjunct filter for exact recovery.
#[derive(Debug, Clone)]
pub struct ExactPipeline {
    pub list: ListPipeline,
    pub disjunct: SparseDesign,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ExactOutcome {
    pub list: ListOutcome,
    pub disjunct: Vec<bool>,
}

impl ExactPipeline {
    pub fn build(k: u64, n: u64, seed: u64, params: &PipelineParams) -> Result<Self> {
        let list = ListPipeline::build(k, n, seed, params)?;
        let disjunct = disjunct_filter(k, n, params.c2, params.c3, rng::derive(seed, tags::DISJUNCT, 0))?;
        Ok(Self { list, disjunct })
    }

    /// Uses a caller-supplied disjunct design (must share `n`).
    pub fn with_disjunct(list: ListPipeline, disjunct: SparseDesign) -> Result<Self> {
        if disjunct.n() != list.ident.n() {
            return Err(invalid("disjunct design universe differs from the list pipeline"));
        }
        Ok(Self { list, disjunct })
    }

    pub fn rows(&self) -> usize {
        self.list.rows() + self.disjunct.rows()
    }

    pub fn measure(&self, support: &[u64]) -> Result<ExactOutcome> {
        Ok(ExactOutcome { list: self.list.measure(support)?, disjunct: self.disjunct.measure(support)? })
    }

    pub fn decode_exact(&self, outcome: &ExactOutcome) -> Result<Vec<u64>> {
        self.decode_exact_with_stats(outcome).map(|(l, _)| l)
    }

    pub fn decode_exact_with_stats(&self, outcome: &ExactOutcome) -> Result<(Vec<u64>, DecodeStats)> {
        let (list, mut stats) = self.list.decode_list_with_stats(&outcome.list)?;
        stats.tests_read += list.len() as u64 * self.disjunct.max_column_sparsity() as u64;
        Ok((filter_list(&self.disjunct, &outcome.disjunct, list)?, stats))
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ForEachParams {
    pub ident: IdentParams,
    /// `M'` has `c·k·log2(n/k)` rows.
    pub c: u64,
    /// `M''` has `c_bands·log2 n` bands …
    pub c_bands: u64,
    /// … of `c_width·k` rows.
    pub c_width: u64,
}

impl Default for ForEachParams {
    fn default() -> Self {
        Self { ident: IdentParams::default(), c: 4, c_bands: 2, c_width: 4 }
    }
}

/// Randomized scheme for a fixed defective set: identification, then a single-band
/// filter `M'`, then a multi-band filter `M''`.
#[derive(Debug, Clone)]
pub struct ForEachDesign {
    pub ident: IdentificationDesign,
    pub single: SparseDesign,
    pub bands: SparseDesign,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ForEachOutcome {
    pub ident: Outcome,
    pub single: Vec<bool>,
    pub bands: Vec<bool>,
}

impl ForEachDesign {
    pub fn build(k: u64, n: u64, seed: u64, params: &ForEachParams) -> Result<Self> {
        if params.c == 0 || params.c_bands == 0 || params.c_width == 0 {
            return Err(invalid("for-each constants must be positive"));
        }
        let ident = IdentificationDesign::with_params(k, n, rng::derive(seed, tags::IDENT, 2), &params.ident)?;
        let span = ceil_log2(n.div_ceil(k)).max(1) as u64;
        let single = random_bands(1, params.c * k * span, n, k, rng::derive(seed, tags::FOREACH_SINGLE, 0))?;
        let bands = random_bands(
            params.c_bands * ceil_log2(n).max(1) as u64,
            params.c_width * k,
            n,
            k,
            rng::derive(seed, tags::FOREACH_BANDS, 0),
        )?;
        debug_assert_eq!(single.kind(), DesignKind::RandomBand);
        Ok(Self { ident, single, bands })
    }

    pub fn rows(&self) -> usize {
        self.ident.rows() + self.single.rows() + self.bands.rows()
    }

    pub fn measure(&self, support: &[u64]) -> Result<ForEachOutcome> {
        Ok(ForEachOutcome {
            ident: self.ident.measure(support)?,
            single: self.single.measure(support)?,
            bands: self.bands.measure(support)?,
        })
    }

    pub fn decode_foreach(&self, outcome: &ForEachOutcome) -> Result<Vec<u64>> {
        self.decode_foreach_with_stats(outcome).map(|(l, _)| l)
    }

    pub fn decode_foreach_with_stats(&self, outcome: &ForEachOutcome) -> Result<(Vec<u64>, DecodeStats)> {
        let (list, mut stats) = self.ident.identify_with_stats(&outcome.ident)?;
        stats.tests_read += list.len() as u64;
        let list = filter_list(&self.single, &outcome.single, list)?;
        stats.tests_read += list.len() as u64 * self.bands.max_column_sparsity() as u64;
        Ok((filter_list(&self.bands, &outcome.bands, list)?, stats))
    }
}
