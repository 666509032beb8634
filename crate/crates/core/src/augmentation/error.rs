use ndarray::ArrayView2;
use rayon::prelude::*;

use super::block::TrajectoryBlock;
use super::reduce::reduce_max;
use super::AugmentationError;
use crate::cheb::{ConvergenceMetric, ErrorMode};
use crate::exec::Parallelism;

/// Norm floor of the relative metric.
pub const ERROR_FLOOR: f64 = 1e-30;

#[derive(Debug, Clone, PartialEq)]
pub struct ErrorSummary {
    /// Largest error over all nodes, per trajectory slot.
    pub per_state_errors: Vec<f64>,
    pub group_max: f64,
}

#[inline]
fn sample_error(cur: &[f64], prev: &[f64], m: usize, slot: usize, mode: ErrorMode) -> f64 {
    let at = |s: &[f64], c: usize| s[c * m + slot];
    let mut dr2 = 0.0;
    let mut dv2 = 0.0;
    let mut r2 = 0.0;
    let mut v2 = 0.0;
    for c in 0..3 {
        let d = at(cur, c) - at(prev, c);
        dr2 += d * d;
        r2 += at(cur, c) * at(cur, c);
        let d = at(cur, c + 3) - at(prev, c + 3);
        dv2 += d * d;
        v2 += at(cur, c + 3) * at(cur, c + 3);
    }
    match mode {
        ErrorMode::Absolute => dr2.sqrt().max(dv2.sqrt()),
        ErrorMode::Relative => {
            let er = dr2.sqrt() / r2.sqrt().max(ERROR_FLOOR);
            let ev = dv2.sqrt() / v2.sqrt().max(ERROR_FLOOR);
            er.max(ev)
        }
    }
}

/// Per-trajectory maxima over nodes of `max(position error, velocity error)`.
fn per_state(
    current: ArrayView2<f64>,
    previous: ArrayView2<f64>,
    m: usize,
    mode: ErrorMode,
    par: Parallelism,
) -> Vec<f64> {
    let row_errors = |j: usize| -> Vec<f64> {
        let cur = current.row(j);
        let prev = previous.row(j);
        let cur = cur.as_slice().expect("standard layout");
        let prev = prev.as_slice().expect("standard layout");
        (0..m).map(|slot| sample_error(cur, prev, m, slot, mode)).collect()
    };
    let fold = |mut acc: Vec<f64>, row: Vec<f64>| {
        for (a, r) in acc.iter_mut().zip(row) {
            *a = a.max(r);
        }
        acc
    };
    let n = current.nrows();
    if par.is_parallel() {
        (0..n)
            .into_par_iter()
            .map(row_errors)
            .reduce(|| vec![0.0; m], fold)
    } else {
        (0..n).map(row_errors).fold(vec![0.0; m], fold)
    }
}

pub fn block_iteration_error(
    current: &TrajectoryBlock,
    previous: &TrajectoryBlock,
    mode: ErrorMode,
    par: Parallelism,
) -> Result<ErrorSummary, AugmentationError> {
    if current.data().dim() != previous.data().dim() || current.group_size() != previous.group_size() {
        return Err(AugmentationError::Shape(format!(
            "cannot compare blocks {:?} and {:?}",
            current.data().dim(),
            previous.data().dim()
        )));
    }
    let per_state_errors = per_state(
        current.data().view(),
        previous.data().view(),
        current.group_size(),
        mode,
        par,
    );
    let group_max = reduce_max(&per_state_errors, par)?;
    Ok(ErrorSummary {
        per_state_errors,
        group_max,
    })
}

/// Group-wide stopping metric used inside the fixed-point loop.
#[derive(Debug, Clone, Copy)]
pub struct BlockErrorMetric {
    pub group_size: usize,
    pub mode: ErrorMode,
    pub parallelism: Parallelism,
}

impl ConvergenceMetric for BlockErrorMetric {
    fn measure(&self, current: ArrayView2<f64>, previous: ArrayView2<f64>) -> f64 {
        let errs = per_state(current, previous, self.group_size, self.mode, self.parallelism);
        reduce_max(&errs, self.parallelism).unwrap_or(0.0)
    }
}
