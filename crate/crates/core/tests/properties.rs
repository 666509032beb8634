use ndarray::{Array1, Array2};
use proptest::prelude::*;
use std::f64::consts::TAU;

use picard_swarm::augmentation::{
    assemble_block, block_iteration_error, column_index, column_owner, reduce_max_tree, split_groups,
    tree_levels, SampledTrajectory, TrajectoryBlock,
};
use picard_swarm::cheb::{lobatto_nodes, picard_update, ChebyshevGrid, ErrorMode, PCMatrices};
use picard_swarm::dynamics::{kepler_propagate, relative_state_error, OrbitalElements, StateVector};
use picard_swarm::io::{read_batch_csv, write_batch_csv};
use picard_swarm::Parallelism;

const MU: f64 = 1.32712440018e11;
const AU: f64 = 1.495978707e8;

fn elements() -> impl Strategy<Value = OrbitalElements> {
    (0.3f64..3.0, 0.0f64..0.9, 0.0f64..3.1, 0.0f64..TAU, 0.0f64..TAU, 0.0f64..TAU).prop_map(
        |(a, e, i, raan, argp, m)| OrbitalElements {
            a: a * AU,
            e,
            i,
            raan,
            argp,
            mean_anomaly: m,
            epoch: 0.0,
        },
    )
}

fn chebyshev(k: usize, x: f64) -> f64 {
    (k as f64 * x.clamp(-1.0, 1.0).acos()).cos()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn nodes_are_symmetric_sorted_and_pinned(n in 3usize..400) {
        let tau = lobatto_nodes(n);
        prop_assert_eq!(tau[0], -1.0);
        prop_assert_eq!(tau[n - 1], 1.0);
        for j in 0..n {
            prop_assert_eq!(tau[j], -tau[n - 1 - j]);
            let expected = -(j as f64 * std::f64::consts::PI / (n - 1) as f64).cos();
            prop_assert!((tau[j] - expected).abs() < 1e-15);
        }
        prop_assert!(tau.windows(2).all(|w| w[1] > w[0]));
    }

    #[test]
    fn grid_maps_ends_exactly(n in 3usize..64, t0 in -1e9f64..1e9, span in prop_oneof![-1e8f64..-1e-3, 1e-3f64..1e8]) {
        let g = ChebyshevGrid::new(n, t0, t0 + span).unwrap();
        prop_assert_eq!(g.times()[0], t0);
        prop_assert_eq!(g.times()[n - 1], t0 + span);
        prop_assert_eq!(g.is_backward(), span < 0.0);
        for j in 1..n - 1 {
            let t = g.omega2() * g.tau()[j] + g.omega1();
            prop_assert!((g.times()[j] - t).abs() <= 1e-15 * t.abs().max(span.abs()));
        }
    }

    #[test]
    fn eval_matrix_matches_trigonometric_chebyshev(n in 3usize..60) {
        let m = PCMatrices::new(n).unwrap();
        let tau = lobatto_nodes(n);
        let plain = m.plain_eval();
        for j in 0..n {
            for k in 0..n {
                prop_assert!((plain[[j, k]] - chebyshev(k, tau[j])).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn transform_inverts_evaluation(n in 3usize..=300) {
        let m = PCMatrices::new(n).unwrap();
        let prod = m.plain_eval().dot(m.xform());
        for ((i, j), v) in prod.indexed_iter() {
            let identity = if i == j { 1.0 } else { 0.0 };
            prop_assert!((v - identity).abs() <= 1e-12, "entry ({}, {}) = {}", i, j, v);
        }
    }

    #[test]
    fn update_integrates_random_polynomials(
        n in 12usize..40,
        coeffs in prop::collection::vec(-10.0f64..10.0, 1..10),
        y0 in -100.0f64..100.0,
    ) {
        let m = PCMatrices::new(n).unwrap();
        let tau = lobatto_nodes(n);
        let f = Array2::from_shape_fn((n, 1), |(j, _)| {
            coeffs.iter().enumerate().map(|(k, c)| c * tau[j].powi(k as i32)).sum::<f64>()
        });
        let anti = |t: f64| coeffs.iter().enumerate().map(|(k, c)| c * t.powi(k as i32 + 1) / (k + 1) as f64).sum::<f64>();
        let y = picard_update(&m, f.view(), Array1::from(vec![y0]).view()).unwrap();
        let scale = coeffs.iter().map(|c| c.abs()).sum::<f64>() * 2.0 + y0.abs();
        for j in 0..n {
            let exact = y0 + anti(tau[j]) - anti(-1.0);
            prop_assert!((y[[j, 0]] - exact).abs() <= 1e-12 * scale.max(1.0));
        }
        prop_assert_eq!(y[[0, 0]], y0);
    }

    #[test]
    fn update_is_affine_in_the_integrand(
        n in 3usize..50,
        a in -5.0f64..5.0,
        seed in 0u64..1000,
    ) {
        let m = PCMatrices::new(n).unwrap();
        let f1 = Array2::from_shape_fn((n, 2), |(j, c)| ((j * 3 + c + seed as usize) as f64).sin());
        let f2 = Array2::from_shape_fn((n, 2), |(j, c)| ((j + 5 * c) as f64 * 0.37).cos());
        let zero = Array1::zeros(2);
        let y0 = Array1::from(vec![1.5, -2.0]);
        let combined = &f1 * a + &f2;
        let lhs = picard_update(&m, combined.view(), y0.view()).unwrap();
        let rhs = picard_update(&m, f1.view(), zero.view()).unwrap() * a
            + picard_update(&m, f2.view(), y0.view()).unwrap();
        for (l, r) in lhs.iter().zip(rhs.iter()) {
            prop_assert!((l - r).abs() < 1e-12 * (1.0 + a.abs()) * n as f64);
        }
    }

    #[test]
    fn kepler_composes(el in elements(), f1 in -1.0f64..1.0, f2 in -1.0f64..1.0) {
        let s = el.to_state(MU).unwrap();
        let p = el.period(MU);
        let two_step = kepler_propagate(&kepler_propagate(&s, MU, f1 * p).unwrap(), MU, f2 * p).unwrap();
        let one_step = kepler_propagate(&s, MU, (f1 + f2) * p).unwrap();
        prop_assert!(relative_state_error(&two_step, &one_step, 1e-30) < 1e-11);
    }

    #[test]
    fn kepler_conserves_energy(el in elements(), f in -2.0f64..2.0) {
        let s = el.to_state(MU).unwrap();
        let t = kepler_propagate(&s, MU, f * el.period(MU)).unwrap();
        let e0 = s.specific_energy(MU);
        prop_assert!(((t.specific_energy(MU) - e0) / e0).abs() < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn split_is_balanced_and_contiguous(total in 1usize..20_000, p in 1usize..64) {
        prop_assume!(p <= total);
        let plan = split_groups(total, p).unwrap();
        let sizes = plan.group_sizes();
        prop_assert_eq!(sizes.len(), p);
        prop_assert_eq!(sizes.iter().sum::<usize>(), total);
        prop_assert!(sizes.windows(2).all(|w| w[0] >= w[1] && w[0] - w[1] <= 1));
        let mut next = 0;
        for r in plan.ranges() {
            prop_assert_eq!(r.start, next);
            next = r.end;
        }
    }

    #[test]
    fn tree_reduction_levels_and_value(values in prop::collection::vec(-1e6f64..1e6, 1..5000)) {
        let (max, levels) = reduce_max_tree(&values, Parallelism::Sequential).unwrap();
        prop_assert_eq!(max, values.iter().cloned().fold(f64::NEG_INFINITY, f64::max));
        let n = values.len();
        let expected_levels = (usize::BITS - (n - 1).leading_zeros()) as usize + 1;
        prop_assert_eq!(levels, if n == 1 { 1 } else { expected_levels });
        prop_assert_eq!(tree_levels(n), levels);
        let (par_max, _) = reduce_max_tree(&values, Parallelism::DataParallel).unwrap();
        prop_assert_eq!(par_max, max);
    }

    #[test]
    fn column_layout_is_a_bijection(m in 1usize..500, c in 0usize..6, slot in 0usize..500) {
        prop_assume!(slot < m);
        let col = column_index(c, slot, m);
        prop_assert!(col < 6 * m);
        prop_assert_eq!(column_owner(col, m), (c, slot));
    }

    #[test]
    fn block_error_matches_brute_force(
        m in 1usize..12,
        n in 3usize..10,
        seed in any::<u32>(),
        relative in any::<bool>(),
        parallel in any::<bool>(),
    ) {
        let val = |j: usize, col: usize, k: u32| (((j * 31 + col * 7) as u32 ^ seed ^ k) as f64 * 1e-3).sin() * 1e4;
        let cur = Array2::from_shape_fn((n, 6 * m), |(j, col)| val(j, col, 0));
        let prev = Array2::from_shape_fn((n, 6 * m), |(j, col)| val(j, col, 1));
        let row = Array1::zeros(6 * m);
        let cur_b = TrajectoryBlock::from_parts(m, cur.clone(), row.clone()).unwrap();
        let prev_b = TrajectoryBlock::from_parts(m, prev.clone(), row).unwrap();
        let mode = if relative { ErrorMode::Relative } else { ErrorMode::Absolute };
        let par = if parallel { Parallelism::DataParallel } else { Parallelism::Sequential };
        let summary = block_iteration_error(&cur_b, &prev_b, mode, par).unwrap();
        let mut group = 0.0f64;
        for slot in 0..m {
            let mut worst = 0.0f64;
            for j in 0..n {
                let a: Vec<f64> = (0..6).map(|c| cur[[j, c * m + slot]]).collect();
                let b: Vec<f64> = (0..6).map(|c| prev[[j, c * m + slot]]).collect();
                let s_cur = StateVector::from_slice(0.0, &a);
                let s_prev = StateVector::from_slice(0.0, &b);
                let e = match mode {
                    // Normalised by the newer iterate.
                    ErrorMode::Relative => relative_state_error(&s_prev, &s_cur, 1e-30),
                    ErrorMode::Absolute => {
                        let dr = (0..3).map(|c| (a[c] - b[c]).powi(2)).sum::<f64>().sqrt();
                        let dv = (3..6).map(|c| (a[c] - b[c]).powi(2)).sum::<f64>().sqrt();
                        dr.max(dv)
                    }
                };
                worst = worst.max(e);
            }
            prop_assert!((summary.per_state_errors[slot] - worst).abs() <= 1e-15 * worst.max(1e-300));
            group = group.max(worst);
        }
        prop_assert!((summary.group_max - group).abs() <= 1e-15 * group.max(1e-300));
    }

    #[test]
    fn batch_csv_round_trip(states in prop::collection::vec(
        (-1e10f64..1e10, prop::array::uniform6(-1e9f64..1e9)), 1..30)
    ) {
        let states: Vec<StateVector> = states.into_iter().map(|(t, a)| StateVector::from_slice(t, &a)).collect();
        let mut buf = Vec::new();
        write_batch_csv(&states, &mut buf).unwrap();
        prop_assert_eq!(read_batch_csv(buf.as_slice()).unwrap(), states);
    }

    #[test]
    fn assembly_rejects_misaligned_guesses(n in 3usize..12, m in 1usize..6, bad in 0usize..6) {
        prop_assume!(bad < m);
        let grid = ChebyshevGrid::new(n, 0.0, 10.0).unwrap();
        let mut guesses: Vec<SampledTrajectory> = (0..m)
            .map(|k| SampledTrajectory {
                times: grid.times().to_vec(),
                states: Array2::from_elem((n, 6), k as f64 + 1.0),
            })
            .collect();
        let initial: Vec<StateVector> = guesses.iter().map(|g| g.state(0)).collect();
        guesses[bad].states[[0, 2]] += 1.0;
        prop_assert!(assemble_block(&initial, &grid, &guesses).is_err());
    }
}
