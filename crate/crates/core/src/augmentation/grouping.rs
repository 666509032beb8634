use serde::{Deserialize, Serialize};

use super::AugmentationError;

/// Contiguous partition of a batch into outer groups.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GroupingPlan {
    total: usize,
    group_sizes: Vec<usize>,
    /// `(group, slot)` for every trajectory of the batch.
    assignment: Vec<(usize, usize)>,
}

impl GroupingPlan {
    /// Plan with caller-chosen group sizes, in batch order.
    pub fn from_sizes(group_sizes: Vec<usize>) -> Result<Self, AugmentationError> {
        if group_sizes.is_empty() || group_sizes.contains(&0) {
            return Err(AugmentationError::InvalidPlan(format!(
                "group sizes must be positive, got {group_sizes:?}"
            )));
        }
        let assignment = group_sizes
            .iter()
            .enumerate()
            .flat_map(|(g, &size)| (0..size).map(move |slot| (g, slot)))
            .collect::<Vec<_>>();
        Ok(Self {
            total: assignment.len(),
            group_sizes,
            assignment,
        })
    }

    pub fn total(&self) -> usize {
        self.total
    }

    pub fn n_groups(&self) -> usize {
        self.group_sizes.len()
    }

    pub fn group_sizes(&self) -> &[usize] {
        &self.group_sizes
    }

    pub fn assignment(&self) -> &[(usize, usize)] {
        &self.assignment
    }

    /// Batch index range covered by group `g`.
    pub fn group_range(&self, g: usize) -> std::ops::Range<usize> {
        let start: usize = self.group_sizes[..g].iter().sum();
        start..start + self.group_sizes[g]
    }

    pub fn ranges(&self) -> Vec<std::ops::Range<usize>> {
        (0..self.n_groups()).map(|g| self.group_range(g)).collect()
    }
}

/// Balanced contiguous split: sizes differ by at most one, larger groups first.
pub fn split_groups(total: usize, p_groups: usize) -> Result<GroupingPlan, AugmentationError> {
    if p_groups == 0 || p_groups > total {
        return Err(AugmentationError::InvalidPlan(format!(
            "cannot split {total} trajectories into {p_groups} groups"
        )));
    }
    let base = total / p_groups;
    let extra = total % p_groups;
    let sizes = (0..p_groups)
        .map(|g| if g < extra { base + 1 } else { base })
        .collect();
    GroupingPlan::from_sizes(sizes)
}
