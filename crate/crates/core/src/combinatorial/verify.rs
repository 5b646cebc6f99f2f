//! Exhaustive disjunctness checks.
//!
//! A design is `(k, ℓ)`-list-disjunct iff no `k`-set `S` covers more than `ℓ`
//! columns outside itself (a column is covered when its support lies inside the
//! union of the supports of `S`). This is equivalent to the `T`-set formulation
//! and needs only `C(n, k)` unions.

use super::SparseDesign;
use crate::error::{invalid, Error, Result};

pub const DEFAULT_VERIFY_BUDGET: u128 = 200_000_000;

fn binomial(n: u64, k: u64) -> u128 {
    let k = k.min(n - k);
    (0..k).fold(1u128, |acc, i| acc * (n - i) as u128 / (i + 1) as u128)
}

/// Visits every `k`-subset of `[0, n)` in lexicographic order until `f` returns `false`.
pub fn for_each_subset(n: usize, k: usize, mut f: impl FnMut(&[usize]) -> bool) -> bool {
    if k > n {
        return true;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        if !f(&idx) {
            return false;
        }
        let mut i = k;
        loop {
            if i == 0 {
                return true;
            }
            i -= 1;
            if idx[i] != i + n - k {
                break;
            }
            if i == 0 {
                return true;
            }
        }
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

pub fn verify_list_disjunct(design: &SparseDesign, k: u64, list: u64, budget: u128) -> Result<bool> {
    let n = design.n();
    if k > n {
        return Err(invalid(format!("k = {k} exceeds n = {n}")));
    }
    let needed = binomial(n, k) * n as u128;
    if needed > budget {
        return Err(Error::BudgetExceeded { needed, budget });
    }
    // Rows stamped with the current subset id mark the union of its supports.
    let mut stamp = vec![0u64; design.rows()];
    let mut in_set = vec![false; n as usize];
    let mut id = 0u64;
    Ok(for_each_subset(n as usize, k as usize, |subset| {
        id += 1;
        for &s in subset {
            in_set[s] = true;
            for &r in &design.columns[s] {
                stamp[r as usize] = id;
            }
        }
        let mut covered = 0u64;
        let mut ok = true;
        for (j, col) in design.columns.iter().enumerate() {
            if !in_set[j] && col.iter().all(|&r| stamp[r as usize] == id) {
                covered += 1;
                if covered > list {
                    ok = false;
                    break;
                }
            }
        }
        for &s in subset {
            in_set[s] = false;
        }
        ok
    }))
}

/// `k`-disjunct is `(k, 0)`-list-disjunct.
pub fn verify_disjunct(design: &SparseDesign, k: u64, budget: u128) -> Result<bool> {
    verify_list_disjunct(design, k, 0, budget)
}

fn overlap(a: &[u32], b: &[u32]) -> usize {
    let (mut i, mut j, mut c) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                c += 1;
                i += 1;
                j += 1;
            }
        }
    }
    c
}

/// Sufficient condition for `k`-disjunctness in `O(n²·w)`: if every column has
/// weight at least `w` and any two columns share at most `λ` rows, then `k·λ < w`
/// leaves every column a private row against any `k` others.
pub fn certify_disjunct(design: &SparseDesign, k: u64) -> bool {
    let cols = design.columns();
    let Some(w) = cols.iter().map(Vec::len).min() else {
        return true;
    };
    let mut lambda = 0;
    for (a, ca) in cols.iter().enumerate() {
        for cb in &cols[a + 1..] {
            lambda = lambda.max(overlap(ca, cb));
            if k as u128 * lambda as u128 >= w as u128 {
                return false;
            }
        }
    }
    true
}
