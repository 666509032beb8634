use ndarray::{Array1, Array2};

use super::AugmentationError;
use crate::cheb::ChebyshevGrid;
use crate::dynamics::StateVector;

/// Per-trajectory samples on a grid: `states` is `N x 6` in `[x, y, z, vx, vy, vz]` order.
#[derive(Debug, Clone, PartialEq)]
pub struct SampledTrajectory {
    pub times: Vec<f64>,
    pub states: Array2<f64>,
}

impl SampledTrajectory {
    pub fn state(&self, node: usize) -> StateVector {
        let row = self.states.row(node);
        StateVector::from_slice(self.times[node], row.as_slice().expect("standard layout"))
    }

    pub fn to_states(&self) -> Vec<StateVector> {
        (0..self.times.len()).map(|j| self.state(j)).collect()
    }
}

/// Component-major augmented state of one group.
///
/// Row `j` holds every trajectory's sample at node `j` as
/// `[x_1..x_M, y_1..y_M, z_1..z_M, vx_1.., vy_1.., vz_1..]`.
#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryBlock {
    group_size: usize,
    data: Array2<f64>,
    initial_row: Array1<f64>,
}

/// Column of `component` (0..6) of trajectory `slot` in a group of `group_size`.
#[inline]
pub fn column_index(component: usize, slot: usize, group_size: usize) -> usize {
    component * group_size + slot
}

/// Inverse of [`column_index`]: `(component, slot)`.
#[inline]
pub fn column_owner(column: usize, group_size: usize) -> (usize, usize) {
    (column / group_size, column % group_size)
}

impl TrajectoryBlock {
    pub fn from_parts(
        group_size: usize,
        data: Array2<f64>,
        initial_row: Array1<f64>,
    ) -> Result<Self, AugmentationError> {
        if group_size == 0 || data.ncols() != 6 * group_size || initial_row.len() != data.ncols() {
            return Err(AugmentationError::Shape(format!(
                "block {:?} with initial row of {} is not 6 x {group_size} columns",
                data.dim(),
                initial_row.len()
            )));
        }
        let data = if data.is_standard_layout() {
            data
        } else {
            data.as_standard_layout().into_owned()
        };
        Ok(Self {
            group_size,
            data,
            initial_row,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.data.nrows()
    }

    pub fn group_size(&self) -> usize {
        self.group_size
    }

    pub fn data(&self) -> &Array2<f64> {
        &self.data
    }

    pub fn initial_row(&self) -> &Array1<f64> {
        &self.initial_row
    }

    pub fn into_data(self) -> Array2<f64> {
        self.data
    }

    /// Replaces the samples, keeping layout and initial row.
    pub fn with_data(&self, data: Array2<f64>) -> Result<Self, AugmentationError> {
        Self::from_parts(self.group_size, data, self.initial_row.clone())
    }

    pub fn sample(&self, node: usize, slot: usize) -> [f64; 6] {
        let m = self.group_size;
        std::array::from_fn(|c| self.data[[node, column_index(c, slot, m)]])
    }

    pub fn terminal_state(&self, slot: usize, epoch: f64) -> StateVector {
        StateVector::from_slice(epoch, &self.sample(self.n_nodes() - 1, slot))
    }
}

/// Stacks per-trajectory guesses into one component-major block.
pub fn assemble_block(
    initial: &[StateVector],
    grid: &ChebyshevGrid,
    guesses: &[SampledTrajectory],
) -> Result<TrajectoryBlock, AugmentationError> {
    let m = initial.len();
    if m == 0 || guesses.len() != m {
        return Err(AugmentationError::Shape(format!(
            "{} initial states but {} guesses",
            m,
            guesses.len()
        )));
    }
    let n = grid.n_nodes();
    let mut data = Array2::zeros((n, 6 * m));
    let mut initial_row = Array1::zeros(6 * m);
    for (slot, (ic, guess)) in initial.iter().zip(guesses).enumerate() {
        if guess.times.as_slice() != grid.times() || guess.states.dim() != (n, 6) {
            return Err(AugmentationError::Alignment { trajectory: slot });
        }
        let ic_row = ic.to_array();
        if ic.epoch != grid.t_start() || guess.states.row(0).iter().ne(ic_row.iter()) {
            return Err(AugmentationError::Alignment { trajectory: slot });
        }
        for (c, &v) in ic_row.iter().enumerate() {
            let col = column_index(c, slot, m);
            initial_row[col] = v;
            for j in 0..n {
                data[[j, col]] = guess.states[[j, c]];
            }
        }
    }
    TrajectoryBlock::from_parts(m, data, initial_row)
}

/// Splits a block back into per-trajectory `N x 6` samples.
pub fn disassemble_block(block: &TrajectoryBlock, grid: &ChebyshevGrid) -> Vec<SampledTrajectory> {
    let m = block.group_size;
    let n = block.n_nodes();
    (0..m)
        .map(|slot| SampledTrajectory {
            times: grid.times().to_vec(),
            states: Array2::from_shape_fn((n, 6), |(j, c)| block.data[[j, column_index(c, slot, m)]]),
        })
        .collect()
}
