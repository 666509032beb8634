//! Execution modes, worker pools and the benchmark harness.

use std::fmt;
use std::str::FromStr;
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};

use crate::augmentation::SampledTrajectory;
use crate::cheb::MatrixCache;
use crate::dynamics::{relative_state_error, StateVector};
use crate::exec::Parallelism;
use crate::propagator::{propagate_with_cache, GroupingSpec, PropagationConfig, PropagationError, PropagationResult};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    /// One PC loop per trajectory.
    Independent,
    /// The whole batch as one block on one worker.
    AugmentedSequential,
    /// The whole batch as one block with data-parallel kernels.
    AugmentedParallel,
    /// Several blocks solved concurrently on the worker pool.
    Grouped,
}

impl RunMode {
    pub const ALL: [RunMode; 4] = [
        RunMode::Independent,
        RunMode::AugmentedSequential,
        RunMode::AugmentedParallel,
        RunMode::Grouped,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            RunMode::Independent => "independent",
            RunMode::AugmentedSequential => "augmented_sequential",
            RunMode::AugmentedParallel => "augmented_parallel",
            RunMode::Grouped => "grouped",
        }
    }
}

impl fmt::Display for RunMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for RunMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.trim().to_ascii_lowercase().replace('-', "_");
        RunMode::ALL
            .into_iter()
            .find(|m| m.as_str() == norm)
            .ok_or_else(|| format!("unknown run mode '{s}'"))
    }
}

/// Mode as requested on a benchmark line; `Augmented` picks the sequential
/// block at one thread and the data-parallel block otherwise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModeSelector {
    Fixed(RunMode),
    Augmented,
}

impl ModeSelector {
    pub fn resolve(self, threads: usize) -> RunMode {
        match self {
            ModeSelector::Fixed(m) => m,
            ModeSelector::Augmented if threads <= 1 => RunMode::AugmentedSequential,
            ModeSelector::Augmented => RunMode::AugmentedParallel,
        }
    }
}

impl FromStr for ModeSelector {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s.trim().eq_ignore_ascii_case("augmented") {
            Ok(ModeSelector::Augmented)
        } else {
            s.parse().map(ModeSelector::Fixed)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunRequest {
    pub mode: RunMode,
    pub workers: usize,
    /// Group count for grouped mode. Without it, explicit sizes in the base
    /// configuration are kept, otherwise one group per worker.
    pub groups: Option<usize>,
    pub timeout: Option<Duration>,
}

impl RunRequest {
    pub fn new(mode: RunMode, workers: usize) -> Self {
        Self {
            mode,
            workers,
            groups: None,
            timeout: None,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("invalid run request: {0}")]
    Request(String),
    #[error("cannot start worker pool: {0}")]
    Pool(String),
    #[error("run exceeded its time limit of {0:?}")]
    Timeout(Duration),
    #[error(transparent)]
    Propagation(#[from] PropagationError),
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub mode: RunMode,
    pub workers: usize,
    pub groups: usize,
    pub wall_time_s: f64,
    pub result: PropagationResult,
}

/// Applies a mode's grouping and parallelism to a base configuration.
pub fn configure_mode(
    base: &PropagationConfig,
    n_states: usize,
    request: &RunRequest,
) -> Result<PropagationConfig, RunError> {
    if request.workers == 0 {
        return Err(RunError::Request("at least one worker is required".into()));
    }
    let mut cfg = base.clone();
    let pool_parallel = if request.workers > 1 {
        Parallelism::DataParallel
    } else {
        Parallelism::Sequential
    };
    match request.mode {
        RunMode::Independent => {
            cfg.grouping = GroupingSpec::Count(n_states);
            cfg.inner_parallelism = Parallelism::Sequential;
            cfg.group_parallelism = pool_parallel;
        }
        RunMode::AugmentedSequential => {
            cfg.grouping = GroupingSpec::Count(1);
            cfg.inner_parallelism = Parallelism::Sequential;
            cfg.group_parallelism = Parallelism::Sequential;
        }
        RunMode::AugmentedParallel => {
            cfg.grouping = GroupingSpec::Count(1);
            cfg.inner_parallelism = pool_parallel;
            cfg.group_parallelism = Parallelism::Sequential;
        }
        RunMode::Grouped => {
            cfg.grouping = match (request.groups, &base.grouping) {
                (Some(g), _) => GroupingSpec::Count(g.clamp(1, n_states.max(1))),
                (None, GroupingSpec::Sizes(sizes)) => GroupingSpec::Sizes(sizes.clone()),
                (None, GroupingSpec::Count(_)) => GroupingSpec::Count(request.workers.min(n_states.max(1))),
            };
            cfg.inner_parallelism = Parallelism::Sequential;
            cfg.group_parallelism = pool_parallel;
        }
    }
    Ok(cfg)
}

/// Runs one propagation under `request`; the wall time covers the solve only.
pub fn run_batch(
    states: &[StateVector],
    duration: f64,
    base: &PropagationConfig,
    request: &RunRequest,
) -> Result<RunOutcome, RunError> {
    run_batch_with_cache(states, duration, base, request, &MatrixCache::new())
}

pub fn run_batch_with_cache(
    states: &[StateVector],
    duration: f64,
    base: &PropagationConfig,
    request: &RunRequest,
    cache: &MatrixCache,
) -> Result<RunOutcome, RunError> {
    let mut cfg = configure_mode(base, states.len(), request)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(request.workers)
        .build()
        .map_err(|e| RunError::Pool(e.to_string()))?;
    cache.get(cfg.n_nodes).map_err(PropagationError::from)?;

    let started = Instant::now();
    if let Some(limit) = request.timeout {
        cfg.deadline = Some(started + limit);
    }
    let result = pool.install(|| propagate_with_cache(states, duration, &cfg, cache));
    let wall_time_s = started.elapsed().as_secs_f64();
    let result = match result {
        Err(PropagationError::Timeout { .. }) => {
            return Err(RunError::Timeout(request.timeout.unwrap_or_default()))
        }
        other => other?,
    };
    Ok(RunOutcome {
        mode: request.mode,
        workers: request.workers,
        groups: result.grouping.n_groups(),
        wall_time_s,
        result,
    })
}

/// Largest relative state difference over every node of every trajectory.
pub fn max_discrepancy(a: &[SampledTrajectory], b: &[SampledTrajectory]) -> f64 {
    assert_eq!(a.len(), b.len(), "batches differ in size");
    a.iter()
        .zip(b)
        .flat_map(|(ta, tb)| {
            assert_eq!(ta.times, tb.times, "trajectories are sampled at different epochs");
            (0..ta.times.len()).map(move |j| relative_state_error(&ta.state(j), &tb.state(j), 1e-30))
        })
        .fold(0.0, f64::max)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MachineInfo {
    pub os: String,
    pub arch: String,
    pub available_parallelism: usize,
}

impl MachineInfo {
    pub fn current() -> Self {
        Self {
            os: std::env::consts::OS.into(),
            arch: std::env::consts::ARCH.into(),
            available_parallelism: std::thread::available_parallelism().map_or(1, |n| n.get()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkEntry {
    pub mode: RunMode,
    pub threads: usize,
    pub groups: usize,
    /// Median over the repeats.
    pub wall_time_s: f64,
    pub wall_times_s: Vec<f64>,
    pub speedup: f64,
    pub max_iterations: usize,
    pub group_iterations: Vec<usize>,
    /// Against the independent single-thread baseline.
    pub max_discrepancy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkReport {
    pub machine: MachineInfo,
    pub n_trajectories: usize,
    pub n_nodes: usize,
    pub repeat: usize,
    pub baseline_time_s: f64,
    pub entries: Vec<BenchmarkEntry>,
}

impl BenchmarkReport {
    pub fn entry(&self, mode: RunMode, threads: usize) -> Option<&BenchmarkEntry> {
        self.entries.iter().find(|e| e.mode == mode && e.threads == threads)
    }
}

#[derive(Debug, Clone)]
pub struct BenchmarkOptions {
    pub thread_counts: Vec<usize>,
    pub modes: Vec<ModeSelector>,
    pub repeat: usize,
    pub groups: Option<usize>,
    pub timeout: Option<Duration>,
}

impl Default for BenchmarkOptions {
    fn default() -> Self {
        Self {
            thread_counts: vec![1],
            modes: vec![
                ModeSelector::Fixed(RunMode::Independent),
                ModeSelector::Augmented,
            ],
            repeat: 5,
            groups: None,
            timeout: None,
        }
    }
}

pub fn median(values: &[f64]) -> f64 {
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n == 0 {
        f64::NAN
    } else if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

fn timed_runs(
    states: &[StateVector],
    duration: f64,
    base: &PropagationConfig,
    request: &RunRequest,
    repeat: usize,
    cache: &MatrixCache,
) -> Result<(Vec<f64>, RunOutcome), RunError> {
    let mut times = Vec::with_capacity(repeat);
    let mut first = None;
    for _ in 0..repeat {
        let outcome = run_batch_with_cache(states, duration, base, request, cache)?;
        times.push(outcome.wall_time_s);
        first.get_or_insert(outcome);
    }
    Ok((times, first.expect("repeat is positive")))
}

/// Times every (mode, thread count) pair against the independent
/// single-thread baseline and records cross-mode discrepancies.
pub fn run_benchmark(
    states: &[StateVector],
    duration: f64,
    base: &PropagationConfig,
    options: &BenchmarkOptions,
) -> Result<BenchmarkReport, RunError> {
    if options.repeat == 0 || options.thread_counts.is_empty() || options.modes.is_empty() {
        return Err(RunError::Request(
            "benchmark needs a positive repeat count, threads and modes".into(),
        ));
    }
    let cache = MatrixCache::new();
    let baseline_request = RunRequest {
        timeout: options.timeout,
        ..RunRequest::new(RunMode::Independent, 1)
    };
    let (baseline_times, baseline) =
        timed_runs(states, duration, base, &baseline_request, options.repeat, &cache)?;
    let baseline_time_s = median(&baseline_times);

    let mut entries = Vec::new();
    for &threads in &options.thread_counts {
        for &selector in &options.modes {
            let mode = selector.resolve(threads);
            let request = RunRequest {
                mode,
                workers: threads,
                groups: options.groups,
                timeout: options.timeout,
            };
            let (times, outcome) = if mode == RunMode::Independent && threads == 1 {
                (baseline_times.clone(), baseline.clone())
            } else {
                timed_runs(states, duration, base, &request, options.repeat, &cache)?
            };
            let wall = median(&times);
            log::info!("{mode} on {threads} thread(s): {wall:.4} s");
            entries.push(BenchmarkEntry {
                mode,
                threads,
                groups: outcome.groups,
                wall_time_s: wall,
                wall_times_s: times,
                speedup: baseline_time_s / wall,
                max_iterations: outcome.result.max_iterations(),
                group_iterations: outcome.result.reports.iter().map(|r| r.report.iterations).collect(),
                max_discrepancy: max_discrepancy(&outcome.result.trajectories, &baseline.result.trajectories),
            });
        }
    }
    Ok(BenchmarkReport {
        machine: MachineInfo::current(),
        n_trajectories: states.len(),
        n_nodes: base.n_nodes,
        repeat: options.repeat,
        baseline_time_s,
        entries,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scenario;

    fn small_config() -> PropagationConfig {
        let mut cfg = PropagationConfig::new(scenario::reference_force_model());
        cfg.n_nodes = 48;
        cfg
    }

    #[test]
    fn mode_names_round_trip() {
        for m in RunMode::ALL {
            assert_eq!(m.as_str().parse::<RunMode>().unwrap(), m);
        }
        assert_eq!("augmented-parallel".parse::<RunMode>().unwrap(), RunMode::AugmentedParallel);
        assert!("fast".parse::<RunMode>().is_err());
        let sel: ModeSelector = "augmented".parse().unwrap();
        assert_eq!(sel.resolve(1), RunMode::AugmentedSequential);
        assert_eq!(sel.resolve(4), RunMode::AugmentedParallel);
    }

    #[test]
    fn modes_configure_grouping() {
        let base = small_config();
        let c = configure_mode(&base, 10, &RunRequest::new(RunMode::Independent, 2)).unwrap();
        assert_eq!(c.grouping, GroupingSpec::Count(10));
        assert!(c.group_parallelism.is_parallel());
        let c = configure_mode(&base, 10, &RunRequest::new(RunMode::AugmentedSequential, 4)).unwrap();
        assert_eq!(c.grouping, GroupingSpec::Count(1));
        assert!(!c.inner_parallelism.is_parallel());
        let c = configure_mode(&base, 10, &RunRequest::new(RunMode::Grouped, 3)).unwrap();
        assert_eq!(c.grouping, GroupingSpec::Count(3));
        assert!(configure_mode(&base, 10, &RunRequest::new(RunMode::Grouped, 0)).is_err());
        let mut sized = base.clone();
        sized.grouping = GroupingSpec::Sizes(vec![7, 3]);
        let c = configure_mode(&sized, 10, &RunRequest::new(RunMode::Grouped, 2)).unwrap();
        assert_eq!(c.grouping, GroupingSpec::Sizes(vec![7, 3]));
    }

    #[test]
    fn grouped_with_one_trajectory_per_group_reproduces_independent() {
        let batch = scenario::synthetic_batch(5, 9);
        let cfg = small_config();
        let span = 0.2 * scenario::reference_span();
        let ind = run_batch(&batch, span, &cfg, &RunRequest::new(RunMode::Independent, 1)).unwrap();
        let grouped = run_batch(
            &batch,
            span,
            &cfg,
            &RunRequest {
                groups: Some(5),
                ..RunRequest::new(RunMode::Grouped, 1)
            },
        )
        .unwrap();
        assert_eq!(ind.result.trajectories, grouped.result.trajectories);
        assert_eq!(grouped.groups, 5);
    }

    #[test]
    fn all_modes_agree() {
        let batch = scenario::synthetic_batch(8, 1);
        let cfg = small_config();
        let span = 0.3 * scenario::reference_span();
        let runs: Vec<_> = RunMode::ALL
            .iter()
            .map(|&m| {
                run_batch(&batch, span, &cfg, &RunRequest { groups: Some(3), ..RunRequest::new(m, 2) })
                    .unwrap()
            })
            .collect();
        for r in &runs[1..] {
            let d = max_discrepancy(&r.result.trajectories, &runs[0].result.trajectories);
            assert!(d < 1e-12, "{}: {d:e}", r.mode);
        }
    }

    #[test]
    fn sequential_runs_are_deterministic() {
        let batch = scenario::synthetic_batch(4, 2);
        let cfg = small_config();
        let req = RunRequest::new(RunMode::AugmentedSequential, 1);
        let a = run_batch(&batch, 1.0e6, &cfg, &req).unwrap();
        let b = run_batch(&batch, 1.0e6, &cfg, &req).unwrap();
        assert_eq!(a.result, b.result);
    }

    #[test]
    fn zero_timeout_is_reported() {
        let batch = scenario::synthetic_batch(4, 2);
        let req = RunRequest {
            timeout: Some(Duration::ZERO),
            ..RunRequest::new(RunMode::AugmentedSequential, 1)
        };
        assert!(matches!(
            run_batch(&batch, 1.0e6, &small_config(), &req),
            Err(RunError::Timeout(_))
        ));
    }

    #[test]
    fn benchmark_baseline_has_unit_speedup() {
        let batch = scenario::synthetic_batch(4, 2);
        let opts = BenchmarkOptions {
            thread_counts: vec![1, 2],
            repeat: 2,
            ..Default::default()
        };
        let rep = run_benchmark(&batch, 1.0e6, &small_config(), &opts).unwrap();
        assert_eq!(rep.entries.len(), 4);
        let base = rep.entry(RunMode::Independent, 1).unwrap();
        assert_eq!(base.speedup, 1.0);
        assert_eq!(base.max_discrepancy, 0.0);
        assert!(rep.entry(RunMode::AugmentedParallel, 2).is_some());
        assert!(rep.entries.iter().all(|e| e.max_discrepancy < 1e-12 && e.wall_times_s.len() == 2));
    }

    #[test]
    fn median_of_odd_and_even() {
        assert_eq!(median(&[3.0, 1.0, 2.0]), 2.0);
        assert_eq!(median(&[4.0, 1.0, 2.0, 3.0]), 2.5);
        assert!(median(&[]).is_nan());
    }
}
