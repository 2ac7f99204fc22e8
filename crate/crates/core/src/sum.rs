//! Deterministic summation.
//!
//! Every reduction in the crate goes through [`pairwise_sum`], which splits the
//! input at fixed midpoints regardless of thread count, so the result depends
//! only on the order of the input slice.

const BLOCK: usize = 64;

/// Pairwise (cascade) summation with a fixed split pattern.
pub fn pairwise_sum(values: &[f64]) -> f64 {
    if values.len() <= BLOCK {
        let mut acc = 0.0;
        for &v in values {
            acc += v;
        }
        return acc;
    }
    let mid = values.len() / 2;
    pairwise_sum(&values[..mid]) + pairwise_sum(&values[mid..])
}

/// Pairwise sum of `f(x)` over the input, in input order.
pub fn pairwise_sum_by<T>(items: &[T], f: impl Fn(&T) -> f64 + Copy) -> f64 {
    if items.len() <= BLOCK {
        let mut acc = 0.0;
        for it in items {
            acc += f(it);
        }
        return acc;
    }
    let mid = items.len() / 2;
    pairwise_sum_by(&items[..mid], f) + pairwise_sum_by(&items[mid..], f)
}
