use rayon::prelude::*;

use super::AugmentationError;
use crate::exec::Parallelism;

/// Values each worker scans sequentially before the tree phase.
const LEAF_CHUNK: usize = 4096;

/// Number of arrays in a pairwise max-reduction schedule over `n` values,
/// counting the input: 16 values reduce as 16, 8, 4, 2, 1.
pub fn tree_levels(n: usize) -> usize {
    if n <= 1 {
        return 1;
    }
    (usize::BITS - (n - 1).leading_zeros()) as usize + 1
}

/// Pairwise tree reduction; each level halves the array.
fn tree_max(mut level: Vec<f64>, par: Parallelism) -> f64 {
    while level.len() > 1 {
        level = if par.is_parallel() {
            level.par_chunks(2).map(pair_max).collect()
        } else {
            level.chunks(2).map(pair_max).collect()
        };
    }
    level[0]
}

fn pair_max(pair: &[f64]) -> f64 {
    match pair {
        [a, b] => a.max(*b),
        [a] => *a,
        _ => unreachable!(),
    }
}

/// Exact maximum of `values`.
///
/// Sequential mode is a plain scan. Data-parallel mode reduces leaf chunks on
/// the workers and finishes with a pairwise tree; `max` is exact, so both
/// paths return the same value.
pub fn reduce_max(values: &[f64], par: Parallelism) -> Result<f64, AugmentationError> {
    if values.is_empty() {
        return Err(AugmentationError::EmptyReduction);
    }
    if !par.is_parallel() {
        return Ok(values[1..].iter().fold(values[0], |m, &v| m.max(v)));
    }
    let leaves: Vec<f64> = values
        .par_chunks(LEAF_CHUNK)
        .map(|c| c[1..].iter().fold(c[0], |m, &v| m.max(v)))
        .collect();
    Ok(tree_max(leaves, par))
}

/// Pure tree schedule over all values, returning the maximum and the number of levels used.
pub fn reduce_max_tree(values: &[f64], par: Parallelism) -> Result<(f64, usize), AugmentationError> {
    if values.is_empty() {
        return Err(AugmentationError::EmptyReduction);
    }
    Ok((tree_max(values.to_vec(), par), tree_levels(values.len())))
}
