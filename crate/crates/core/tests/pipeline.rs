use picard_swarm::dynamics::{osculating_period, BodySpec, ForceModelConfig};
use picard_swarm::oracle::{oracle_discrepancy, OracleConfig};
use picard_swarm::propagator::{
    propagate, GroupingSpec, PropagationConfig, PropagationError, SegmentPolicy, StartMode,
};
use picard_swarm::runner::max_discrepancy;
use picard_swarm::scenario::{self, MU_SUN};
use picard_swarm::Parallelism;

fn worst_oracle(res: &picard_swarm::propagator::PropagationResult, fm: &ForceModelConfig) -> f64 {
    res.trajectories
        .iter()
        .map(|t| oracle_discrepancy(&t.to_states(), fm, &OracleConfig::default()).unwrap().max())
        .fold(0.0, f64::max)
}

#[test]
fn per_orbit_segments_track_the_oracle() {
    let batch = scenario::synthetic_batch(3, 77);
    let fm = scenario::reference_force_model();
    let period = osculating_period(&batch[0], MU_SUN).unwrap();
    let mut cfg = PropagationConfig::new(fm.clone());
    cfg.segment_policy = SegmentPolicy::PerOrbit;
    let res = propagate(&batch, 2.5 * period, &cfg).unwrap();
    assert_eq!(res.completed_segments, 3);
    assert_eq!(res.reports.len(), 3);
    assert!(res.reports.iter().all(|r| r.report.converged));
    let d = worst_oracle(&res, &fm);
    assert!(d < 1e-9, "{d:e}");
}

#[test]
fn backward_arc_tracks_the_oracle() {
    let batch = scenario::synthetic_batch(3, 5);
    let fm = scenario::reference_force_model();
    let cfg = PropagationConfig::new(fm.clone());
    let res = propagate(&batch, -0.6 * scenario::reference_span(), &cfg).unwrap();
    let t = &res.trajectories[0].times;
    assert!(t.windows(2).all(|w| w[1] < w[0]));
    let d = worst_oracle(&res, &fm);
    assert!(d < 1e-9, "{d:e}");
}

#[test]
fn segment_chaining_reuses_terminal_states_exactly() {
    let batch = scenario::synthetic_batch(4, 8);
    let span = scenario::reference_span();
    let mut cfg = PropagationConfig::new(scenario::reference_force_model());
    cfg.n_nodes = 120;
    let t0 = batch[0].epoch;
    let mid = t0 + 0.4 * span;
    cfg.segment_policy = SegmentPolicy::Explicit(vec![t0, mid, t0 + span]);
    let joined = propagate(&batch, span, &cfg).unwrap();

    cfg.segment_policy = SegmentPolicy::Single;
    let first = propagate(&batch, mid - t0, &cfg).unwrap();
    let second = propagate(&first.final_states(), t0 + span - mid, &cfg).unwrap();
    for k in 0..batch.len() {
        let j = &joined.trajectories[k];
        assert_eq!(j.times.len(), 2 * 120 - 1);
        assert_eq!(j.times[119], mid);
        assert_eq!(j.state(119), first.trajectories[k].state(119));
        assert_eq!(j.state(j.times.len() - 1), second.trajectories[k].state(119));
    }
}

#[test]
fn warm_start_never_needs_more_iterations_than_cold() {
    let batch = scenario::synthetic_batch(16, 21);
    let span = scenario::reference_span();
    let mut cfg = PropagationConfig::new(scenario::reference_force_model());
    cfg.grouping = GroupingSpec::Count(4);
    let warm = propagate(&batch, span, &cfg).unwrap();
    cfg.start_mode = StartMode::Cold;
    let cold = propagate(&batch, span, &cfg).unwrap();
    for (w, c) in warm.reports.iter().zip(&cold.reports) {
        assert_eq!(w.group, c.group);
        assert!(w.report.iterations <= c.report.iterations, "group {}: {} vs {}", w.group, w.report.iterations, c.report.iterations);
    }
    assert!(max_discrepancy(&warm.trajectories, &cold.trajectories) < 1e-11);
}

#[test]
fn data_parallel_kernels_match_sequential() {
    let batch = scenario::synthetic_batch(40, 3);
    let span = 0.5 * scenario::reference_span();
    let mut cfg = PropagationConfig::new(scenario::reference_force_model());
    let seq = propagate(&batch, span, &cfg).unwrap();
    cfg.inner_parallelism = Parallelism::DataParallel;
    let par = propagate(&batch, span, &cfg).unwrap();
    assert!(max_discrepancy(&seq.trajectories, &par.trajectories) <= 1e-12);
    assert_eq!(seq.max_iterations(), par.max_iterations());
}

fn tabulated_planets(t0: f64, t1: f64) -> Vec<BodySpec> {
    let segments = ((t1 - t0) / 8.64e5).ceil() as usize;
    scenario::inner_planets()
        .iter()
        .map(|b| b.tabulate(MU_SUN, t0, t1, segments, 14).unwrap())
        .collect()
}

#[test]
fn tabulated_ephemeris_reproduces_analytic_run() {
    let batch = scenario::synthetic_batch(4, 13);
    let span = scenario::reference_span();
    let t0 = batch[0].epoch;
    let analytic = propagate(&batch, span, &PropagationConfig::new(scenario::reference_force_model())).unwrap();
    let table_fm = ForceModelConfig::n_body(MU_SUN, tabulated_planets(t0, t0 + span));
    let tabulated = propagate(&batch, span, &PropagationConfig::new(table_fm)).unwrap();
    let d = max_discrepancy(&analytic.trajectories, &tabulated.trajectories);
    assert!(d < 1e-10, "{d:e}");
}

#[test]
fn missing_ephemeris_coverage_is_reported() {
    let batch = scenario::synthetic_batch(2, 13);
    let span = scenario::reference_span();
    let t0 = batch[0].epoch;
    let fm = ForceModelConfig::n_body(MU_SUN, tabulated_planets(t0, t0 + 0.5 * span));
    match propagate(&batch, span, &PropagationConfig::new(fm)) {
        Err(PropagationError::Ephemeris { segment, .. }) => assert_eq!(segment, 0),
        other => panic!("expected a coverage error, got {other:?}"),
    }
}
