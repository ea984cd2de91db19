//! Reductions with a fixed summation tree.
//!
//! Inputs are cut into fixed-size blocks; each block is summed left to right
//! and the block sums are combined pairwise. The tree only depends on the
//! input length, so results are bit-identical for any thread count.

use rayon::prelude::*;

const BLOCK: usize = 2048;

fn pairwise(values: &[f64]) -> f64 {
    match values.len() {
        0 => 0.0,
        1 => values[0],
        n => {
            let mid = n / 2;
            pairwise(&values[..mid]) + pairwise(&values[mid..])
        }
    }
}

/// Deterministic sum of a slice.
pub fn sum(values: &[f64]) -> f64 {
    let partial: Vec<f64> = values
        .par_chunks(BLOCK)
        .map(|c| c.iter().sum::<f64>())
        .collect();
    pairwise(&partial)
}

/// Deterministic sum of `f(i)` over `0..len`.
pub fn sum_by<F>(len: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync,
{
    let blocks = len.div_ceil(BLOCK);
    let partial: Vec<f64> = (0..blocks)
        .into_par_iter()
        .map(|b| {
            let lo = b * BLOCK;
            let hi = (lo + BLOCK).min(len);
            (lo..hi).map(&f).sum::<f64>()
        })
        .collect();
    pairwise(&partial)
}

/// Deterministic dot product `Σ a_i b_i`.
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let partial: Vec<f64> = a
        .par_chunks(BLOCK)
        .zip(b.par_chunks(BLOCK))
        .map(|(x, y)| x.iter().zip(y).map(|(p, q)| p * q).sum::<f64>())
        .collect();
    pairwise(&partial)
}
