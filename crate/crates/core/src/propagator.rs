//! Segment planning, initial guesses and the segment-by-segment driver that
//! feeds groups of trajectories through the augmented solver.

use std::time::Instant;

use ndarray::{concatenate, s, Array2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::augmentation::{
    assemble_block, disassemble_block, solve_group, split_groups, AugmentationError,
    GroupSolveSettings, GroupingPlan, SampledTrajectory,
};
use crate::cheb::{ChebError, ChebyshevGrid, ErrorMode, IterationReport, MatrixCache, SolveError};
use crate::dynamics::{
    kepler_propagate, osculating_period, EphemerisError, ForceModelConfig, KeplerError, StateVector,
};
use crate::exec::Parallelism;

/// Fraction of a period below which a trailing remainder is folded into the
/// previous segment instead of becoming a sliver of its own.
const SLIVER_FRACTION: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StartMode {
    #[default]
    Warm,
    Cold,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SegmentPolicy {
    #[default]
    Single,
    /// One osculating period of the representative trajectory per segment.
    PerOrbit,
    /// Fixed maximum span in seconds.
    MaxSpan(f64),
    /// Caller-supplied boundaries, including both ends.
    Explicit(Vec<f64>),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Forward,
    Backward,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentPlan {
    pub boundaries: Vec<f64>,
    pub n_nodes: usize,
    pub direction: Direction,
}

impl SegmentPlan {
    pub fn n_segments(&self) -> usize {
        self.boundaries.len() - 1
    }

    pub fn segment(&self, s: usize) -> (f64, f64) {
        (self.boundaries[s], self.boundaries[s + 1])
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupingSpec {
    /// Balanced split into this many groups.
    Count(usize),
    Sizes(Vec<usize>),
}

impl Default for GroupingSpec {
    fn default() -> Self {
        GroupingSpec::Count(1)
    }
}

impl GroupingSpec {
    pub fn plan(&self, total: usize) -> Result<GroupingPlan, AugmentationError> {
        match self {
            GroupingSpec::Count(p) => split_groups(total, *p),
            GroupingSpec::Sizes(sizes) => {
                let plan = GroupingPlan::from_sizes(sizes.clone())?;
                if plan.total() != total {
                    return Err(AugmentationError::InvalidPlan(format!(
                        "group sizes cover {} trajectories, batch has {total}",
                        plan.total()
                    )));
                }
                Ok(plan)
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct PropagationConfig {
    pub n_nodes: usize,
    pub tolerance: f64,
    pub max_iterations: usize,
    pub error_mode: ErrorMode,
    pub start_mode: StartMode,
    pub segment_policy: SegmentPolicy,
    pub force_model: ForceModelConfig,
    pub grouping: GroupingSpec,
    /// Batch index whose orbit sizes per-orbit segments.
    pub representative: usize,
    /// Kernel-level parallelism inside each group solve.
    pub inner_parallelism: Parallelism,
    /// Whether groups of one segment are solved concurrently.
    pub group_parallelism: Parallelism,
    pub deadline: Option<Instant>,
}

impl PropagationConfig {
    pub fn new(force_model: ForceModelConfig) -> Self {
        Self {
            n_nodes: 200,
            tolerance: 1e-12,
            max_iterations: 100,
            error_mode: ErrorMode::Relative,
            start_mode: StartMode::Warm,
            segment_policy: SegmentPolicy::Single,
            force_model,
            grouping: GroupingSpec::Count(1),
            representative: 0,
            inner_parallelism: Parallelism::Sequential,
            group_parallelism: Parallelism::Sequential,
            deadline: None,
        }
    }

    fn group_settings(&self) -> GroupSolveSettings {
        GroupSolveSettings {
            tolerance: self.tolerance,
            max_iterations: self.max_iterations,
            error_mode: self.error_mode,
            parallelism: self.inner_parallelism,
            deadline: self.deadline,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum PropagationError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("segment plan needs an osculating period: {0}")]
    Period(#[source] KeplerError),
    #[error(transparent)]
    Cheb(#[from] ChebError),
    #[error("segment {segment}: ephemeris unavailable: {source}")]
    Ephemeris {
        segment: usize,
        #[source]
        source: EphemerisError,
    },
    #[error("segment {segment}: {source}")]
    Augmentation {
        segment: usize,
        #[source]
        source: AugmentationError,
    },
    #[error("segment {segment}, group {group} did not converge in {iterations} iterations (error {final_error:e})")]
    NotConverged {
        segment: usize,
        group: usize,
        iterations: usize,
        final_error: f64,
        partial: Box<PropagationResult>,
    },
    #[error("deadline exceeded in segment {segment}, group {group}")]
    Timeout { segment: usize, group: usize },
}

/// Iteration report of one group in one segment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupReport {
    pub segment: usize,
    pub group: usize,
    pub group_size: usize,
    pub first_trajectory: usize,
    #[serde(flatten)]
    pub report: IterationReport,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropagationResult {
    pub plan: SegmentPlan,
    pub grouping: GroupingPlan,
    /// Node samples of every trajectory across all completed segments; shared
    /// segment boundaries appear once.
    pub trajectories: Vec<SampledTrajectory>,
    pub reports: Vec<GroupReport>,
    pub completed_segments: usize,
}

impl PropagationResult {
    pub fn final_states(&self) -> Vec<StateVector> {
        self.trajectories
            .iter()
            .map(|t| t.state(t.times.len() - 1))
            .collect()
    }

    pub fn max_iterations(&self) -> usize {
        self.reports.iter().map(|r| r.report.iterations).max().unwrap_or(0)
    }
}

/// Every row equal to the trajectory's initial state.
pub fn cold_start(states: &[StateVector], grid: &ChebyshevGrid) -> Vec<SampledTrajectory> {
    states.iter().map(|s| cold_guess(s, grid)).collect()
}

fn cold_guess(state: &StateVector, grid: &ChebyshevGrid) -> SampledTrajectory {
    let row = state.to_array();
    SampledTrajectory {
        times: grid.times().to_vec(),
        states: Array2::from_shape_fn((grid.n_nodes(), 6), |(_, c)| row[c]),
    }
}

/// Conic samples about the central body; trajectories that are not on a bound
/// orbit get a cold guess and a warning.
pub fn warm_start(
    states: &[StateVector],
    grid: &ChebyshevGrid,
    central_mu: f64,
) -> Vec<SampledTrajectory> {
    states
        .iter()
        .enumerate()
        .map(|(i, s)| match conic_guess(s, grid, central_mu) {
            Ok(g) => g,
            Err(e) => {
                log::warn!("trajectory {i}: no conic warm start ({e}), using cold start");
                cold_guess(s, grid)
            }
        })
        .collect()
}

fn conic_guess(
    state: &StateVector,
    grid: &ChebyshevGrid,
    central_mu: f64,
) -> Result<SampledTrajectory, KeplerError> {
    let n = grid.n_nodes();
    let mut out = Array2::zeros((n, 6));
    out.row_mut(0).assign(&ndarray::arr1(&state.to_array()));
    for (j, &t) in grid.times().iter().enumerate().skip(1) {
        let sj = kepler_propagate(state, central_mu, t - state.epoch)?;
        out.row_mut(j).assign(&ndarray::arr1(&sj.to_array()));
    }
    Ok(SampledTrajectory {
        times: grid.times().to_vec(),
        states: out,
    })
}

/// End of the segment starting at `t` with the representative in `state`.
fn next_boundary(
    policy: &SegmentPolicy,
    state: &StateVector,
    t: f64,
    t_end: f64,
    central_mu: f64,
) -> Result<f64, PropagationError> {
    let sign = (t_end - t).signum();
    let remaining = (t_end - t).abs();
    let step = match policy {
        SegmentPolicy::Single => return Ok(t_end),
        SegmentPolicy::PerOrbit => osculating_period(state, central_mu).map_err(PropagationError::Period)?,
        SegmentPolicy::MaxSpan(span) => *span,
        SegmentPolicy::Explicit(_) => unreachable!("explicit plans are not stepped"),
    };
    if remaining <= step * (1.0 + SLIVER_FRACTION) {
        Ok(t_end)
    } else {
        Ok(t + sign * step)
    }
}

/// Splits `[t_start, t_end]` (either direction) into segments. Per-orbit
/// boundaries follow the representative along its osculating conic.
pub fn plan_segments(
    representative: &StateVector,
    t_start: f64,
    t_end: f64,
    central_mu: f64,
    policy: &SegmentPolicy,
    n_nodes: usize,
) -> Result<SegmentPlan, PropagationError> {
    if !(t_start.is_finite() && t_end.is_finite()) || t_start == t_end {
        return Err(ChebError::InvalidSpan { t_start, t_end }.into());
    }
    let direction = if t_end > t_start {
        Direction::Forward
    } else {
        Direction::Backward
    };
    let boundaries = match policy {
        SegmentPolicy::Explicit(b) => {
            let ok = b.len() >= 2
                && b[0] == t_start
                && b[b.len() - 1] == t_end
                && b.windows(2).all(|w| match direction {
                    Direction::Forward => w[1] > w[0],
                    Direction::Backward => w[1] < w[0],
                });
            if !ok {
                return Err(PropagationError::Config(format!(
                    "explicit boundaries {b:?} must run monotonically from {t_start} to {t_end}"
                )));
            }
            b.clone()
        }
        SegmentPolicy::MaxSpan(span) if !(*span > 0.0 && span.is_finite()) => {
            return Err(PropagationError::Config(format!("segment span must be positive, got {span}")));
        }
        _ => {
            let mut boundaries = vec![t_start];
            let mut state = *representative;
            let mut t = t_start;
            while t != t_end {
                let next = next_boundary(policy, &state, t, t_end, central_mu)?;
                if matches!(policy, SegmentPolicy::PerOrbit) && next != t_end {
                    state = kepler_propagate(&state, central_mu, next - t).map_err(PropagationError::Period)?;
                }
                boundaries.push(next);
                t = next;
            }
            boundaries
        }
    };
    Ok(SegmentPlan {
        boundaries,
        n_nodes,
        direction,
    })
}

fn validate_batch(states: &[StateVector], config: &PropagationConfig) -> Result<(), PropagationError> {
    let Some(first) = states.first() else {
        return Err(PropagationError::Config("empty batch".into()));
    };
    if let Some(i) = states.iter().position(|s| s.epoch != first.epoch) {
        return Err(PropagationError::Config(format!(
            "trajectory {i} has epoch {} but the batch starts at {}",
            states[i].epoch, first.epoch
        )));
    }
    if let Some(i) = states.iter().position(|s| !s.is_finite()) {
        return Err(PropagationError::Config(format!("trajectory {i} is not finite")));
    }
    if config.representative >= states.len() {
        return Err(PropagationError::Config(format!(
            "representative index {} outside batch of {}",
            config.representative,
            states.len()
        )));
    }
    config
        .force_model
        .validate()
        .map_err(|e| PropagationError::Config(e.to_string()))
}

/// Propagates a shared-epoch batch from its epoch by `duration` seconds
/// (negative for backward).
pub fn propagate(
    states: &[StateVector],
    duration: f64,
    config: &PropagationConfig,
) -> Result<PropagationResult, PropagationError> {
    propagate_with_cache(states, duration, config, &MatrixCache::new())
}

pub fn propagate_with_cache(
    states: &[StateVector],
    duration: f64,
    config: &PropagationConfig,
    cache: &MatrixCache,
) -> Result<PropagationResult, PropagationError> {
    validate_batch(states, config)?;
    let t_start = states[0].epoch;
    let t_end = t_start + duration;
    let mu = config.force_model.central_mu;
    let plan = plan_segments(
        &states[config.representative],
        t_start,
        t_end,
        mu,
        &config.segment_policy,
        config.n_nodes,
    )?;
    let grouping = config
        .grouping
        .plan(states.len())
        .map_err(|source| PropagationError::Augmentation { segment: 0, source })?;
    let mats = cache.get(config.n_nodes)?;
    let settings = config.group_settings();

    let mut result = PropagationResult {
        plan: plan.clone(),
        grouping: grouping.clone(),
        trajectories: Vec::new(),
        reports: Vec::new(),
        completed_segments: 0,
    };
    let mut current: Vec<StateVector> = states.to_vec();
    let mut seg_start = t_start;
    let mut segment = 0;
    let mut realized = vec![t_start];
    let dynamic_per_orbit = matches!(config.segment_policy, SegmentPolicy::PerOrbit);

    while seg_start != t_end {
        let seg_end = if dynamic_per_orbit {
            next_boundary(&config.segment_policy, &current[config.representative], seg_start, t_end, mu)?
        } else {
            plan.boundaries[segment + 1]
        };
        let grid = ChebyshevGrid::new(config.n_nodes, seg_start, seg_end)?;
        let table = config
            .force_model
            .ephemeris_table(&grid)
            .map_err(|source| PropagationError::Ephemeris { segment, source })?;
        let guesses = match config.start_mode {
            StartMode::Warm => warm_start(&current, &grid, mu),
            StartMode::Cold => cold_start(&current, &grid),
        };

        let solve_one = |g: usize| {
            let range = grouping.group_range(g);
            let block = assemble_block(&current[range.clone()], &grid, &guesses[range])?;
            solve_group(g, block, &grid, &mats, &table, &config.force_model, &settings)
        };
        let solved: Vec<_> = if config.group_parallelism.is_parallel() {
            (0..grouping.n_groups()).into_par_iter().map(solve_one).collect()
        } else {
            (0..grouping.n_groups()).map(solve_one).collect()
        };

        let mut samples = Vec::with_capacity(states.len());
        let mut reports = Vec::with_capacity(grouping.n_groups());
        for (g, outcome) in solved.into_iter().enumerate() {
            let (block, report) = match outcome {
                Ok(ok) => ok,
                Err(AugmentationError::Solve {
                    group,
                    source: SolveError::Timeout { .. },
                }) => return Err(PropagationError::Timeout { segment, group }),
                Err(source) => return Err(PropagationError::Augmentation { segment, source }),
            };
            let group_report = GroupReport {
                segment,
                group: g,
                group_size: block.group_size(),
                first_trajectory: grouping.group_range(g).start,
                report,
            };
            if !group_report.report.converged {
                let (iterations, final_error) =
                    (group_report.report.iterations, group_report.report.final_error);
                result.reports.extend(reports);
                result.reports.push(group_report);
                return Err(PropagationError::NotConverged {
                    segment,
                    group: g,
                    iterations,
                    final_error,
                    partial: Box::new(result),
                });
            }
            samples.extend(disassemble_block(&block, &grid));
            reports.push(group_report);
        }

        current = samples
            .iter()
            .map(|t| t.state(t.times.len() - 1))
            .collect();
        append_segment(&mut result.trajectories, samples);
        result.reports.extend(reports);
        result.completed_segments += 1;
        realized.push(seg_end);
        seg_start = seg_end;
        segment += 1;
    }
    result.plan.boundaries = realized;
    Ok(result)
}

fn append_segment(acc: &mut Vec<SampledTrajectory>, segment: Vec<SampledTrajectory>) {
    if acc.is_empty() {
        *acc = segment;
        return;
    }
    for (whole, part) in acc.iter_mut().zip(segment) {
        whole.times.extend_from_slice(&part.times[1..]);
        whole.states = concatenate(Axis(0), &[whole.states.view(), part.states.slice(s![1.., ..])])
            .expect("matching column counts");
    }
}
