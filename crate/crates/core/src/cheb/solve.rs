use std::time::Instant;

use ndarray::{Array1, Array2, ArrayView2, ArrayViewMut2};
use serde::{Deserialize, Serialize};

use super::matrices::{picard_update_into, PCMatrices};
use super::{ChebError, ChebyshevGrid};
use crate::exec::Parallelism;

/// Produces the `omega2`-scaled derivative block for a whole state block.
pub trait ForceEvaluator {
    type Error: std::error::Error + Send + Sync + 'static;

    fn evaluate(
        &self,
        states: ArrayView2<f64>,
        out: ArrayViewMut2<f64>,
    ) -> Result<(), Self::Error>;
}

/// Scalar distance between two consecutive iterates.
pub trait ConvergenceMetric {
    fn measure(&self, current: ArrayView2<f64>, previous: ArrayView2<f64>) -> f64;
}

/// Largest absolute entry-wise change. Suited to generic (non-orbital) systems.
#[derive(Debug, Clone, Copy, Default)]
pub struct MaxAbsDifference;

impl ConvergenceMetric for MaxAbsDifference {
    fn measure(&self, current: ArrayView2<f64>, previous: ArrayView2<f64>) -> f64 {
        current
            .iter()
            .zip(previous.iter())
            .fold(0.0_f64, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// How state differences are normalised by the stopping test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ErrorMode {
    #[default]
    Relative,
    Absolute,
}

/// Stopping parameters of the fixed-point loop.
#[derive(Debug, Clone, Copy)]
pub struct IterationSettings {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub parallelism: Parallelism,
    pub deadline: Option<Instant>,
}

impl Default for IterationSettings {
    fn default() -> Self {
        Self {
            tolerance: 1e-12,
            max_iterations: 100,
            parallelism: Parallelism::Sequential,
            deadline: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationReport {
    pub iterations: usize,
    pub final_error: f64,
    pub converged: bool,
    pub per_iteration_errors: Vec<f64>,
}

#[derive(Debug, thiserror::Error)]
pub enum SolveError<E: std::error::Error + 'static> {
    #[error(transparent)]
    Cheb(#[from] ChebError),
    #[error("dynamics evaluation failed at iteration {iteration}: {source}")]
    Dynamics {
        iteration: usize,
        #[source]
        source: E,
    },
    #[error("iterate diverged at iteration {iteration}: non-finite value at node {node}, column {column}")]
    Divergence {
        iteration: usize,
        node: usize,
        column: usize,
    },
    #[error("deadline exceeded after {iterations} iterations")]
    Timeout { iterations: usize },
}

fn first_non_finite(block: &Array2<f64>) -> Option<(usize, usize)> {
    block
        .indexed_iter()
        .find(|(_, v)| !v.is_finite())
        .map(|(idx, _)| idx)
}

/// Picard-Chebyshev fixed-point loop on one state block.
///
/// Each pass evaluates the dynamics on every node of the previous iterate,
/// applies the constant-matrix update anchored at `initial_row`, and measures the
/// change with `metric`. Stops once the change is at most `settings.tolerance`;
/// hitting `max_iterations` returns a non-converged report rather than an error.
pub fn pc_solve<D, M>(
    grid: &ChebyshevGrid,
    mats: &PCMatrices,
    dynamics: &D,
    metric: &M,
    guess: Array2<f64>,
    initial_row: &Array1<f64>,
    settings: &IterationSettings,
) -> Result<(Array2<f64>, IterationReport), SolveError<D::Error>>
where
    D: ForceEvaluator,
    M: ConvergenceMetric,
{
    let n = grid.n_nodes();
    if mats.n_nodes() != n {
        return Err(ChebError::Shape(format!(
            "matrices built for {} nodes, grid has {n}",
            mats.n_nodes()
        ))
        .into());
    }
    if guess.nrows() != n || guess.ncols() != initial_row.len() {
        return Err(ChebError::Shape(format!(
            "guess block is {:?}, expected ({n}, {})",
            guess.dim(),
            initial_row.len()
        ))
        .into());
    }
    if settings.tolerance <= 0.0 {
        return Err(ChebError::InvalidTolerance(settings.tolerance).into());
    }

    let mut previous = guess;
    let mut current = Array2::zeros(previous.dim());
    let mut force = Array2::zeros(previous.dim());
    let mut history = Vec::new();
    let mut converged = false;

    for iteration in 1..=settings.max_iterations {
        if let Some(deadline) = settings.deadline {
            if Instant::now() >= deadline {
                return Err(SolveError::Timeout {
                    iterations: iteration - 1,
                });
            }
        }
        dynamics
            .evaluate(previous.view(), force.view_mut())
            .map_err(|source| SolveError::Dynamics { iteration, source })?;
        picard_update_into(
            mats,
            force.view(),
            initial_row.view(),
            current.view_mut(),
            settings.parallelism,
        )?;
        if let Some((node, column)) = first_non_finite(&current) {
            return Err(SolveError::Divergence {
                iteration,
                node,
                column,
            });
        }
        let err = metric.measure(current.view(), previous.view());
        history.push(err);
        std::mem::swap(&mut previous, &mut current);
        if err <= settings.tolerance {
            converged = true;
            break;
        }
    }

    let report = IterationReport {
        iterations: history.len(),
        final_error: history.last().copied().unwrap_or(f64::INFINITY),
        converged,
        per_iteration_errors: history,
    };
    Ok((previous, report))
}
