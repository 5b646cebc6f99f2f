use std::cmp::Ordering;

use crate::error::{invalid, Result};

/// Rounds `(k, n)` up to powers of two.
pub fn round_up_pow2(k: u64, n: u64) -> (u64, u64) {
    (k.max(1).next_power_of_two(), n.max(1).next_power_of_two())
}

/// `log2(x)` for a power of two.
pub fn exact_log2(x: u64, what: &str) -> Result<u32> {
    if x == 0 || !x.is_power_of_two() {
        return Err(invalid(format!("{what} = {x} is not a power of two")));
    }
    Ok(x.trailing_zeros())
}

pub fn ceil_log2(x: u64) -> u32 {
    if x <= 1 {
        0
    } else {
        64 - (x - 1).leading_zeros()
    }
}

/// Median with the usual even-length convention (mean of the two middle values).
pub fn median(values: &mut [f64]) -> f64 {
    assert!(!values.is_empty(), "median of an empty slice");
    values.sort_by(f64::total_cmp);
    let mid = values.len() / 2;
    if values.len() % 2 == 1 {
        values[mid]
    } else {
        0.5 * (values[mid - 1] + values[mid])
    }
}

/// Keeps the `count` keys with the largest score; ties go to the smaller key.
/// Returns the kept keys sorted ascending.
pub fn top_by_score(mut scored: Vec<(u64, f64)>, count: usize) -> Vec<u64> {
    if scored.len() > count {
        let order = |a: &(u64, f64), b: &(u64, f64)| -> Ordering {
            b.1.total_cmp(&a.1).then(a.0.cmp(&b.0))
        };
        scored.select_nth_unstable_by(count, order);
        scored.truncate(count);
    }
    let mut keys: Vec<u64> = scored.into_iter().map(|(k, _)| k).collect();
    keys.sort_unstable();
    keys
}

/// `‖v_{-s}‖₂`: the ℓ2 norm after removing the `s` largest-magnitude entries.
pub fn norm_without_top(values: &[f64], s: usize) -> f64 {
    let mut sq: Vec<f64> = values.iter().map(|v| v * v).collect();
    if s >= sq.len() {
        return 0.0;
    }
    if s > 0 {
        sq.select_nth_unstable_by(s - 1, |a, b| b.total_cmp(a));
    }
    sq[s..].iter().sum::<f64>().sqrt()
}
