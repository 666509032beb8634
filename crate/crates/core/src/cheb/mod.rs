//! Chebyshev-Gauss-Lobatto grids, the constant Picard-Chebyshev operators and
//! the fixed-point loop that drives them.

mod grid;
mod matrices;
mod solve;

use std::collections::HashMap;
use std::sync::{Arc, Mutex};

pub use grid::{lobatto_nodes, ChebyshevGrid};
pub use matrices::{
    chebyshev_table, picard_update, picard_update_into, picard_update_staged, PCMatrices,
};
pub use solve::{
    pc_solve, ConvergenceMetric, ErrorMode, ForceEvaluator, IterationReport, IterationSettings,
    MaxAbsDifference, SolveError,
};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ChebError {
    #[error("at least 3 Chebyshev nodes are required, got {0}")]
    InvalidSize(usize),
    #[error("degenerate integration span [{t_start}, {t_end}]")]
    InvalidSpan { t_start: f64, t_end: f64 },
    #[error("tolerance must be positive, got {0}")]
    InvalidTolerance(f64),
    #[error("shape mismatch: {0}")]
    Shape(String),
}

/// Builds each node count's matrices once and hands out shared copies.
#[derive(Debug, Default)]
pub struct MatrixCache {
    entries: Mutex<HashMap<usize, Arc<PCMatrices>>>,
}

impl MatrixCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, n_nodes: usize) -> Result<Arc<PCMatrices>, ChebError> {
        let mut entries = self.entries.lock().expect("matrix cache poisoned");
        if let Some(m) = entries.get(&n_nodes) {
            return Ok(Arc::clone(m));
        }
        let m = Arc::new(PCMatrices::new(n_nodes)?);
        entries.insert(n_nodes, Arc::clone(&m));
        Ok(m)
    }
}
