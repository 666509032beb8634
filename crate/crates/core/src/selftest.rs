//! Embedded verification suite run by the `selftest` command.

use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::cheb::{lobatto_nodes, picard_update, PCMatrices};
use crate::dynamics::{kepler_propagate, relative_state_error, OrbitalElements};
use crate::propagator::{propagate, GroupingSpec, PropagationConfig, StartMode};
use crate::runner::max_discrepancy;
use crate::scenario::{self, MU_SUN};

pub const MATRIX_SIZES: [usize; 5] = [3, 8, 16, 64, 200];
pub const EXACTNESS_NODES: usize = 16;
pub const MAX_EXACT_DEGREE: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyOutcome {
    pub name: &'static str,
    pub passed: bool,
    pub detail: String,
}

#[derive(Debug, Clone)]
pub struct SelftestOptions {
    /// Corrupts every operator before checking it (negative control).
    pub perturb_matrices: Option<f64>,
    pub batch_size: usize,
    pub n_nodes: usize,
    pub seed: u64,
}

impl Default for SelftestOptions {
    fn default() -> Self {
        Self {
            perturb_matrices: None,
            batch_size: 64,
            n_nodes: 200,
            seed: 7,
        }
    }
}

fn matrices(n: usize, opts: &SelftestOptions) -> PCMatrices {
    let mut m = PCMatrices::new(n).expect("valid node count");
    if let Some(delta) = opts.perturb_matrices {
        m.perturb_for_testing(delta);
    }
    m
}

/// `max |eval * xform - I|` with the unhalved evaluation matrix.
pub fn inversion_error(mats: &PCMatrices) -> f64 {
    let n = mats.n_nodes();
    let prod = mats.plain_eval().dot(mats.xform());
    let mut worst: f64 = 0.0;
    for ((i, j), v) in prod.indexed_iter() {
        worst = worst.max((v - if i == j { 1.0 } else { 0.0 }).abs());
    }
    debug_assert_eq!(prod.nrows(), n);
    worst
}

/// Relative error of one update applied to `tau^degree` against its antiderivative.
pub fn exactness_error(mats: &PCMatrices, degree: usize) -> f64 {
    let n = mats.n_nodes();
    let tau = lobatto_nodes(n);
    let d = degree as i32;
    let f = Array2::from_shape_fn((n, 1), |(j, _)| tau[j].powi(d));
    let y = picard_update(mats, f.view(), Array1::zeros(1).view()).expect("shapes match");
    let exact: Vec<f64> = tau
        .iter()
        .map(|t| (t.powi(d + 1) - (-1f64).powi(d + 1)) / (d + 1) as f64)
        .collect();
    let scale = exact.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    (0..n).map(|j| (y[[j, 0]] - exact[j]).abs()).fold(0.0, f64::max) / scale
}

fn check_matrices(opts: &SelftestOptions) -> PropertyOutcome {
    let errs: Vec<(usize, f64)> = MATRIX_SIZES
        .iter()
        .map(|&n| (n, inversion_error(&matrices(n, opts))))
        .collect();
    let worst = errs.iter().map(|e| e.1).fold(0.0, f64::max);
    PropertyOutcome {
        name: "matrix_inversion",
        passed: worst <= 1e-12,
        detail: format!("max |eval*xform - I| = {worst:.3e} over N in {MATRIX_SIZES:?}"),
    }
}

fn check_exactness(opts: &SelftestOptions) -> PropertyOutcome {
    let mats = matrices(EXACTNESS_NODES, opts);
    let worst = (0..=MAX_EXACT_DEGREE)
        .map(|d| exactness_error(&mats, d))
        .fold(0.0, f64::max);
    PropertyOutcome {
        name: "polynomial_exactness",
        passed: worst <= 1e-12,
        detail: format!("degrees 0..={MAX_EXACT_DEGREE} at N = {EXACTNESS_NODES}: max relative error {worst:.3e}"),
    }
}

fn check_kepler(opts: &SelftestOptions) -> PropertyOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut worst: f64 = 0.0;
    for _ in 0..200 {
        let el = OrbitalElements {
            a: rng.random_range(0.3..3.0) * scenario::AU_KM,
            e: rng.random_range(0.0..0.9),
            i: rng.random_range(0.0..std::f64::consts::PI),
            raan: rng.random_range(0.0..std::f64::consts::TAU),
            argp: rng.random_range(0.0..std::f64::consts::TAU),
            mean_anomaly: rng.random_range(0.0..std::f64::consts::TAU),
            epoch: 0.0,
        };
        let s = el.to_state(MU_SUN).expect("elliptic");
        let dt = rng.random_range(-1.5..1.5) * el.period(MU_SUN);
        let there = kepler_propagate(&s, MU_SUN, dt).expect("elliptic");
        let back = kepler_propagate(&there, MU_SUN, -dt).expect("elliptic");
        worst = worst.max(relative_state_error(&back, &s, 1e-30));
    }
    PropertyOutcome {
        name: "kepler_round_trip",
        passed: worst <= 1e-11,
        detail: format!("200 random forward/backward arcs: max relative error {worst:.3e}"),
    }
}

fn batch_config(opts: &SelftestOptions) -> PropagationConfig {
    let mut cfg = PropagationConfig::new(scenario::reference_force_model());
    cfg.n_nodes = opts.n_nodes;
    cfg
}

fn check_grouping(opts: &SelftestOptions) -> PropertyOutcome {
    let batch = scenario::synthetic_batch(opts.batch_size, opts.seed);
    let span = scenario::reference_span();
    let mut runs = Vec::new();
    for p in [1, 4, opts.batch_size] {
        let mut cfg = batch_config(opts);
        cfg.grouping = GroupingSpec::Count(p);
        match propagate(&batch, span, &cfg) {
            Ok(r) => runs.push(r),
            Err(e) => {
                return PropertyOutcome {
                    name: "grouping_invariance",
                    passed: false,
                    detail: format!("{p} groups: {e}"),
                }
            }
        }
    }
    let worst = runs[1..]
        .iter()
        .map(|r| max_discrepancy(&r.trajectories, &runs[0].trajectories))
        .fold(0.0, f64::max);
    PropertyOutcome {
        name: "grouping_invariance",
        passed: worst <= 1e-12,
        detail: format!(
            "{} trajectories in 1, 4 and {} groups: max relative discrepancy {worst:.3e}",
            opts.batch_size, opts.batch_size
        ),
    }
}

fn check_warm_start(opts: &SelftestOptions) -> PropertyOutcome {
    let batch = scenario::synthetic_batch(opts.batch_size, opts.seed);
    let span = scenario::reference_span();
    let mut iters = Vec::new();
    for mode in [StartMode::Warm, StartMode::Cold] {
        let mut cfg = batch_config(opts);
        cfg.start_mode = mode;
        match propagate(&batch, span, &cfg) {
            Ok(r) => iters.push(r.max_iterations()),
            Err(e) => {
                return PropertyOutcome {
                    name: "warm_start_benefit",
                    passed: false,
                    detail: format!("{mode:?} start: {e}"),
                }
            }
        }
    }
    PropertyOutcome {
        name: "warm_start_benefit",
        passed: iters[0] < iters[1],
        detail: format!("iterations: warm {}, cold {}", iters[0], iters[1]),
    }
}

pub fn run_selftest(opts: &SelftestOptions) -> Vec<PropertyOutcome> {
    vec![
        check_matrices(opts),
        check_exactness(opts),
        check_kepler(opts),
        check_grouping(opts),
        check_warm_start(opts),
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    fn quick() -> SelftestOptions {
        SelftestOptions {
            batch_size: 6,
            n_nodes: 60,
            ..Default::default()
        }
    }

    #[test]
    fn clean_build_passes() {
        for p in run_selftest(&quick()) {
            assert!(p.passed, "{}: {}", p.name, p.detail);
        }
    }

    #[test]
    fn perturbed_matrices_fail_exactness() {
        let opts = SelftestOptions {
            perturb_matrices: Some(1e-6),
            ..quick()
        };
        let exact = check_exactness(&opts);
        assert!(!exact.passed, "{}", exact.detail);
        assert!(!check_matrices(&opts).passed);
    }
}
