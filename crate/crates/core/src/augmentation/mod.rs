//! Two-level augmentation: trajectories sharing a grid are stacked column-wise
//! into one block per outer group, and each group is iterated as a single system.

mod block;
mod error;
mod grouping;
mod reduce;

use std::time::Instant;

pub use block::{
    assemble_block, column_index, column_owner, disassemble_block, SampledTrajectory,
    TrajectoryBlock,
};
pub use error::{block_iteration_error, BlockErrorMetric, ErrorSummary, ERROR_FLOOR};
pub use grouping::{split_groups, GroupingPlan};
pub use reduce::{reduce_max, reduce_max_tree, tree_levels};

use crate::cheb::{pc_solve, ChebyshevGrid, ErrorMode, IterationReport, IterationSettings, PCMatrices, SolveError};
use crate::dynamics::{BlockDynamics, DynamicsError, EphemerisTable, ForceModelConfig};
use crate::exec::Parallelism;

#[derive(Debug, thiserror::Error)]
pub enum AugmentationError {
    #[error("shape mismatch: {0}")]
    Shape(String),
    #[error("guess for trajectory {trajectory} is not aligned with the grid or its initial state")]
    Alignment { trajectory: usize },
    #[error("invalid grouping plan: {0}")]
    InvalidPlan(String),
    #[error("cannot reduce an empty array")]
    EmptyReduction,
    #[error("group {group}: {source}")]
    Solve {
        group: usize,
        #[source]
        source: SolveError<DynamicsError>,
    },
    #[error("group {group}: {source}")]
    Dynamics {
        group: usize,
        #[source]
        source: DynamicsError,
    },
}

/// Loop controls for one group solve.
#[derive(Debug, Clone, Copy)]
pub struct GroupSolveSettings {
    pub tolerance: f64,
    pub max_iterations: usize,
    pub error_mode: ErrorMode,
    pub parallelism: Parallelism,
    pub deadline: Option<Instant>,
}

impl Default for GroupSolveSettings {
    fn default() -> Self {
        Self {
            tolerance: 1e-12,
            max_iterations: 100,
            error_mode: ErrorMode::Relative,
            parallelism: Parallelism::Sequential,
            deadline: None,
        }
    }
}

/// Iterates one group's block as a single system until its group-wide error
/// drops to the tolerance. Converged members keep iterating with their group.
#[allow(clippy::too_many_arguments)]
pub fn solve_group(
    group: usize,
    block: TrajectoryBlock,
    grid: &ChebyshevGrid,
    mats: &PCMatrices,
    table: &EphemerisTable,
    config: &ForceModelConfig,
    settings: &GroupSolveSettings,
) -> Result<(TrajectoryBlock, IterationReport), AugmentationError> {
    config
        .validate()
        .map_err(|source| AugmentationError::Dynamics { group, source })?;
    if table.node_times.as_slice() != grid.times() || block.n_nodes() != grid.n_nodes() {
        return Err(AugmentationError::Shape(format!(
            "group {group}: block, grid and ephemeris table are not aligned"
        )));
    }
    let m = block.group_size();
    let dynamics = BlockDynamics {
        table,
        omega2: grid.omega2(),
        group_size: m,
        parallelism: settings.parallelism,
    };
    let metric = BlockErrorMetric {
        group_size: m,
        mode: settings.error_mode,
        parallelism: settings.parallelism,
    };
    let loop_settings = IterationSettings {
        tolerance: settings.tolerance,
        max_iterations: settings.max_iterations,
        parallelism: settings.parallelism,
        deadline: settings.deadline,
    };
    let initial_row = block.initial_row().clone();
    let (data, report) = pc_solve(
        grid,
        mats,
        &dynamics,
        &metric,
        block.into_data(),
        &initial_row,
        &loop_settings,
    )
    .map_err(|source| AugmentationError::Solve { group, source })?;
    let solved = TrajectoryBlock::from_parts(m, data, initial_row)?;
    Ok((solved, report))
}
