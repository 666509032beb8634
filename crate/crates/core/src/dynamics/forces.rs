use ndarray::{Array2, ArrayView1, ArrayView2, ArrayViewMut1, ArrayViewMut2, Axis};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::ephemeris::{
    build_ephemeris_cache, BodySpec, EphemerisError, EphemerisTable, DEFAULT_PROXIMITY_FLOOR_KM,
};
use super::state::{norm, StateVector};
use crate::augmentation::TrajectoryBlock;
use crate::cheb::{ChebyshevGrid, ForceEvaluator};
use crate::exec::Parallelism;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DynamicsError {
    #[error("singular state at node {node}, trajectory {trajectory}: zero heliocentric distance")]
    Singularity { node: usize, trajectory: usize },
    #[error("close approach to {body} at node {node}, trajectory {trajectory}: {distance:e} km")]
    CloseApproach {
        body: String,
        node: usize,
        trajectory: usize,
        distance: f64,
    },
    #[error("node index {node} out of range for a {n_nodes}-node table")]
    NodeIndex { node: usize, n_nodes: usize },
    #[error("invalid force model: {0}")]
    InvalidModel(String),
    #[error(transparent)]
    Ephemeris(#[from] EphemerisError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ForceModelKind {
    TwoBody,
    NBody,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ForceModelConfig {
    pub kind: ForceModelKind,
    pub central_mu: f64,
    pub bodies: Vec<BodySpec>,
    pub proximity_floor: f64,
}

impl ForceModelConfig {
    pub fn two_body(central_mu: f64) -> Self {
        Self {
            kind: ForceModelKind::TwoBody,
            central_mu,
            bodies: Vec::new(),
            proximity_floor: DEFAULT_PROXIMITY_FLOOR_KM,
        }
    }

    pub fn n_body(central_mu: f64, bodies: Vec<BodySpec>) -> Self {
        Self {
            kind: ForceModelKind::NBody,
            central_mu,
            bodies,
            proximity_floor: DEFAULT_PROXIMITY_FLOOR_KM,
        }
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        if !(self.central_mu > 0.0 && self.central_mu.is_finite()) {
            return Err(DynamicsError::InvalidModel(
                "central gravitational parameter must be positive".into(),
            ));
        }
        match self.kind {
            ForceModelKind::NBody if self.bodies.is_empty() => Err(DynamicsError::InvalidModel(
                "an n-body model needs at least one perturbing body".into(),
            )),
            ForceModelKind::TwoBody if !self.bodies.is_empty() => Err(DynamicsError::InvalidModel(
                "a two-body model takes no perturbing bodies".into(),
            )),
            _ => {
                for b in &self.bodies {
                    b.validate()?;
                }
                Ok(())
            }
        }
    }

    /// Bodies that actually perturb the motion under this model.
    pub fn active_bodies(&self) -> &[BodySpec] {
        match self.kind {
            ForceModelKind::TwoBody => &[],
            ForceModelKind::NBody => &self.bodies,
        }
    }

    pub fn ephemeris_table(&self, grid: &ChebyshevGrid) -> Result<EphemerisTable, EphemerisError> {
        Ok(build_ephemeris_cache(self.active_bodies(), grid, self.central_mu)?
            .with_proximity_floor(self.proximity_floor))
    }

    /// Acceleration at an arbitrary epoch, querying the ephemeris providers directly.
    pub fn acceleration_at(&self, t: f64, r: &[f64; 3]) -> Result<[f64; 3], DynamicsError> {
        let r2 = r[0] * r[0] + r[1] * r[1] + r[2] * r[2];
        if r2 == 0.0 {
            return Err(DynamicsError::Singularity { node: 0, trajectory: 0 });
        }
        let mut a = central_term(self.central_mu, r[0], r[1], r[2]);
        for body in self.active_bodies() {
            let p = body.position(t, self.central_mu)?;
            let d = norm(&p);
            let k = body.mu / (d * d * d);
            let ind = [k * p[0], k * p[1], k * p[2]];
            let (t3, dist2) = body_term(body.mu, &p, &ind, r[0], r[1], r[2]);
            if dist2.sqrt() < self.proximity_floor {
                return Err(DynamicsError::CloseApproach {
                    body: body.name.clone(),
                    node: 0,
                    trajectory: 0,
                    distance: dist2.sqrt(),
                });
            }
            a[0] += t3[0];
            a[1] += t3[1];
            a[2] += t3[2];
        }
        Ok(a)
    }
}

#[inline(always)]
fn central_term(mu: f64, x: f64, y: f64, z: f64) -> [f64; 3] {
    let r2 = x * x + y * y + z * z;
    let r = r2.sqrt();
    let k = -mu / (r2 * r);
    [k * x, k * y, k * z]
}

/// Direct minus indirect pull of one body; also returns the squared distance.
#[inline(always)]
fn body_term(mu: f64, p: &[f64; 3], ind: &[f64; 3], x: f64, y: f64, z: f64) -> ([f64; 3], f64) {
    let dx = p[0] - x;
    let dy = p[1] - y;
    let dz = p[2] - z;
    let d2 = dx * dx + dy * dy + dz * dz;
    let d = d2.sqrt();
    let k = mu / (d2 * d);
    ([k * dx - ind[0], k * dy - ind[1], k * dz - ind[2]], d2)
}

pub fn eval_two_body(state: &StateVector, mu: f64) -> Result<[f64; 3], DynamicsError> {
    let [x, y, z] = state.r;
    if x * x + y * y + z * z == 0.0 {
        return Err(DynamicsError::Singularity { node: 0, trajectory: 0 });
    }
    Ok(central_term(mu, x, y, z))
}

fn check_node(node: usize, table: &EphemerisTable) -> Result<(), DynamicsError> {
    if node >= table.n_nodes() {
        return Err(DynamicsError::NodeIndex {
            node,
            n_nodes: table.n_nodes(),
        });
    }
    Ok(())
}

/// Sum of the perturbing-body terms only, in table order.
pub fn perturbation_at_node(
    state: &StateVector,
    node: usize,
    table: &EphemerisTable,
) -> Result<[f64; 3], DynamicsError> {
    check_node(node, table)?;
    let [x, y, z] = state.r;
    let mut a = [0.0; 3];
    for b in 0..table.n_bodies() {
        let (t, d2) = body_term(
            table.body_mus[b],
            &table.positions[b][node],
            &table.indirect[b][node],
            x,
            y,
            z,
        );
        if d2.sqrt() < table.proximity_floor {
            return Err(DynamicsError::CloseApproach {
                body: table.body_names[b].clone(),
                node,
                trajectory: 0,
                distance: d2.sqrt(),
            });
        }
        a[0] += t[0];
        a[1] += t[1];
        a[2] += t[2];
    }
    Ok(a)
}

/// Heliocentric restricted N-body acceleration with bodies read from the table row `node`.
pub fn eval_nbody(
    state: &StateVector,
    node: usize,
    table: &EphemerisTable,
) -> Result<[f64; 3], DynamicsError> {
    check_node(node, table)?;
    let [x, y, z] = state.r;
    if x * x + y * y + z * z == 0.0 {
        return Err(DynamicsError::Singularity { node, trajectory: 0 });
    }
    let mut a = central_term(table.central_mu, x, y, z);
    for b in 0..table.n_bodies() {
        let (t, d2) = body_term(
            table.body_mus[b],
            &table.positions[b][node],
            &table.indirect[b][node],
            x,
            y,
            z,
        );
        if d2.sqrt() < table.proximity_floor {
            return Err(DynamicsError::CloseApproach {
                body: table.body_names[b].clone(),
                node,
                trajectory: 0,
                distance: d2.sqrt(),
            });
        }
        a[0] += t[0];
        a[1] += t[1];
        a[2] += t[2];
    }
    Ok(a)
}

/// Block dynamics over a component-major state block.
///
/// Every (node, trajectory) pair is evaluated independently with the same
/// arithmetic as [`eval_nbody`], so row-parallel execution changes nothing.
#[derive(Debug, Clone, Copy)]
pub struct BlockDynamics<'a> {
    pub table: &'a EphemerisTable,
    pub omega2: f64,
    pub group_size: usize,
    pub parallelism: Parallelism,
}

impl BlockDynamics<'_> {
    fn eval_row(
        &self,
        node: usize,
        state: ArrayView1<f64>,
        mut out: ArrayViewMut1<f64>,
    ) -> Result<(), DynamicsError> {
        let m = self.group_size;
        let w = self.omega2;
        let table = self.table;
        let s = state.as_slice().expect("block rows are contiguous");
        let o = out.as_slice_mut().expect("block rows are contiguous");
        let (xs, rest) = s.split_at(m);
        let (ys, rest) = rest.split_at(m);
        let (zs, vs) = rest.split_at(m);
        let (o_pos, o_vel) = o.split_at_mut(3 * m);

        for (dst, src) in o_pos.iter_mut().zip(vs) {
            *dst = w * src;
        }

        let (ax, rest) = o_vel.split_at_mut(m);
        let (ay, az) = rest.split_at_mut(m);
        let mut min_r2 = f64::INFINITY;
        for i in 0..m {
            let (x, y, z) = (xs[i], ys[i], zs[i]);
            min_r2 = min_r2.min(x * x + y * y + z * z);
            let a = central_term(table.central_mu, x, y, z);
            ax[i] = a[0];
            ay[i] = a[1];
            az[i] = a[2];
        }
        if min_r2 == 0.0 {
            let trajectory = (0..m)
                .find(|&i| xs[i] * xs[i] + ys[i] * ys[i] + zs[i] * zs[i] == 0.0)
                .unwrap_or(0);
            return Err(DynamicsError::Singularity { node, trajectory });
        }
        for b in 0..table.n_bodies() {
            let mu = table.body_mus[b];
            let p = &table.positions[b][node];
            let ind = &table.indirect[b][node];
            let mut min_d2 = f64::INFINITY;
            for i in 0..m {
                let (t, d2) = body_term(mu, p, ind, xs[i], ys[i], zs[i]);
                min_d2 = min_d2.min(d2);
                ax[i] += t[0];
                ay[i] += t[1];
                az[i] += t[2];
            }
            if min_d2.sqrt() < table.proximity_floor {
                let (trajectory, d2) = (0..m)
                    .map(|i| {
                        let dx = p[0] - xs[i];
                        let dy = p[1] - ys[i];
                        let dz = p[2] - zs[i];
                        (i, dx * dx + dy * dy + dz * dz)
                    })
                    .find(|&(_, d2)| d2.sqrt() < table.proximity_floor)
                    .unwrap_or((0, min_d2));
                return Err(DynamicsError::CloseApproach {
                    body: table.body_names[b].clone(),
                    node,
                    trajectory,
                    distance: d2.sqrt(),
                });
            }
        }
        for v in o_vel.iter_mut() {
            *v *= w;
        }
        Ok(())
    }
}

impl ForceEvaluator for BlockDynamics<'_> {
    type Error = DynamicsError;

    fn evaluate(&self, states: ArrayView2<f64>, mut out: ArrayViewMut2<f64>) -> Result<(), DynamicsError> {
        let n = states.nrows();
        if n != self.table.n_nodes() || states.ncols() != 6 * self.group_size {
            return Err(DynamicsError::InvalidModel(format!(
                "block {:?} does not match {} nodes x {} trajectories",
                states.dim(),
                self.table.n_nodes(),
                self.group_size
            )));
        }
        if self.parallelism.is_parallel() {
            let rows: Vec<_> = states
                .axis_iter(Axis(0))
                .zip(out.axis_iter_mut(Axis(0)))
                .collect();
            let failures: Vec<DynamicsError> = rows
                .into_par_iter()
                .enumerate()
                .filter_map(|(j, (s, o))| self.eval_row(j, s, o).err())
                .collect();
            // Lowest node first, as in the sequential scan.
            match failures.into_iter().next() {
                Some(e) => Err(e),
                None => Ok(()),
            }
        } else {
            for (j, (s, o)) in states.axis_iter(Axis(0)).zip(out.axis_iter_mut(Axis(0))).enumerate() {
                self.eval_row(j, s, o)?;
            }
            Ok(())
        }
    }
}

/// `omega2`-scaled first-order derivative `(v, a)` of a whole block.
pub fn eval_force_block(
    block: &TrajectoryBlock,
    grid: &ChebyshevGrid,
    table: &EphemerisTable,
    config: &ForceModelConfig,
    parallelism: Parallelism,
) -> Result<Array2<f64>, DynamicsError> {
    config.validate()?;
    if table.node_times.as_slice() != grid.times() {
        return Err(DynamicsError::InvalidModel(
            "ephemeris table is not aligned with the grid".into(),
        ));
    }
    if table.n_bodies() != config.active_bodies().len() {
        return Err(DynamicsError::InvalidModel(
            "ephemeris table was built for a different body list".into(),
        ));
    }
    let dynamics = BlockDynamics {
        table,
        omega2: grid.omega2(),
        group_size: block.group_size(),
        parallelism,
    };
    let mut out = Array2::zeros(block.data().dim());
    dynamics.evaluate(block.data().view(), out.view_mut())?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::augmentation::TrajectoryBlock;
    use crate::dynamics::ephemeris::EphemerisSource;
    use crate::dynamics::kepler::OrbitalElements;
    use ndarray::Array1;

    const MU_SUN: f64 = 1.32712440018e11;
    const AU: f64 = 1.495978707e8;

    fn body(name: &str, mu: f64, a: f64, m0: f64) -> BodySpec {
        BodySpec {
            name: name.into(),
            mu,
            ephemeris: EphemerisSource::Elements(OrbitalElements {
                a,
                e: 0.01,
                i: 0.05,
                raan: 0.3,
                argp: 0.1,
                mean_anomaly: m0,
                epoch: 0.0,
            }),
        }
    }

    /// Direct and indirect terms summed in a separate scalar routine.
    fn reference_nbody(r: [f64; 3], mu_c: f64, bodies: &[(f64, [f64; 3])]) -> [f64; 3] {
        let rn = (r[0] * r[0] + r[1] * r[1] + r[2] * r[2]).sqrt();
        let mut a = [0.0; 3];
        for k in 0..3 {
            a[k] = -mu_c * r[k] / rn.powi(3);
        }
        for &(mu, p) in bodies {
            let d = [p[0] - r[0], p[1] - r[1], p[2] - r[2]];
            let dn = (d[0] * d[0] + d[1] * d[1] + d[2] * d[2]).sqrt();
            let pn = (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt();
            for k in 0..3 {
                a[k] += mu * d[k] / dn.powi(3);
                a[k] -= mu * p[k] / pn.powi(3);
            }
        }
        a
    }

    #[test]
    fn two_body_closed_forms() {
        let a = eval_two_body(&StateVector::new(0.0, [1.0, 0.0, 0.0], [0.0; 3]), 1.0).unwrap();
        assert_eq!(a, [-1.0, 0.0, 0.0]);
        let a = eval_two_body(&StateVector::new(0.0, [0.0, 2.0, 0.0], [0.0; 3]), 4.0).unwrap();
        assert_eq!(a, [0.0, -1.0, 0.0]);
        let a = eval_two_body(&StateVector::new(0.0, [6378.137, 0.0, 0.0], [0.0; 3]), 398600.4418).unwrap();
        let expected = 398600.4418 / 6378.137f64.powi(2);
        assert!((norm(&a) - expected).abs() < 1e-15);
        assert!((norm(&a) - 9.798e-3).abs() < 5e-7);
        assert!(eval_two_body(&StateVector::new(0.0, [0.0; 3], [0.0; 3]), 1.0).is_err());
    }

    #[test]
    fn empty_body_list_reduces_to_two_body() {
        let grid = ChebyshevGrid::new(4, 0.0, 1000.0).unwrap();
        let table = build_ephemeris_cache(&[], &grid, MU_SUN).unwrap();
        let s = StateVector::new(0.0, [1.1e8, -2.0e7, 3.0e6], [1.0, 30.0, 0.1]);
        assert_eq!(eval_nbody(&s, 2, &table).unwrap(), eval_two_body(&s, MU_SUN).unwrap());
        assert!(eval_nbody(&s, 4, &table).is_err());
    }

    #[test]
    fn vanishing_perturber_is_continuous() {
        let grid = ChebyshevGrid::new(4, 0.0, 1000.0).unwrap();
        let table = build_ephemeris_cache(&[body("tiny", 1e-300, 0.72 * AU, 0.0)], &grid, MU_SUN).unwrap();
        let s = StateVector::new(0.0, [1.1e8, -2.0e7, 3.0e6], [0.0; 3]);
        let a = eval_nbody(&s, 1, &table).unwrap();
        let b = eval_two_body(&s, MU_SUN).unwrap();
        for k in 0..3 {
            assert!((a[k] - b[k]).abs() <= f64::EPSILON * b[k].abs());
        }
    }

    #[test]
    fn nearby_perturber_matches_scalar_reference() {
        let grid = ChebyshevGrid::new(5, 0.0, 86400.0).unwrap();
        let venus = body("venus", 324858.592, 0.723 * AU, 1.0);
        let table = build_ephemeris_cache(std::slice::from_ref(&venus), &grid, MU_SUN).unwrap();
        let p = table.positions[0][3];
        let offset = 0.01 * AU / 3f64.sqrt();
        let s = StateVector::new(grid.times()[3], [p[0] + offset, p[1] - offset, p[2] + offset], [0.0; 3]);
        let a = eval_nbody(&s, 3, &table).unwrap();
        let r = reference_nbody(s.r, MU_SUN, &[(venus.mu, p)]);
        for k in 0..3 {
            assert!((a[k] - r[k]).abs() <= 1e-14 * norm(&r), "{k}: {} vs {}", a[k], r[k]);
        }
    }

    #[test]
    fn perturbations_superpose() {
        let grid = ChebyshevGrid::new(6, 0.0, 5e6).unwrap();
        let bodies = vec![
            body("venus", 324858.592, 0.723 * AU, 1.0),
            body("earth", 403503.2355, AU, 2.5),
            body("mars", 42828.37, 1.52 * AU, -1.0),
        ];
        let all = build_ephemeris_cache(&bodies, &grid, MU_SUN).unwrap();
        let s = StateVector::new(0.0, [0.8 * AU, 0.3 * AU, 0.01 * AU], [0.0; 3]);
        for node in 0..6 {
            let total = perturbation_at_node(&s, node, &all).unwrap();
            let mut sum = [0.0; 3];
            for b in &bodies {
                let single = build_ephemeris_cache(std::slice::from_ref(b), &grid, MU_SUN).unwrap();
                let t = perturbation_at_node(&s, node, &single).unwrap();
                for k in 0..3 {
                    sum[k] += t[k];
                }
            }
            for k in 0..3 {
                assert!((total[k] - sum[k]).abs() <= 1e-15 * norm(&total));
            }
        }
    }

    #[test]
    fn proximity_floor_names_body() {
        let grid = ChebyshevGrid::new(3, 0.0, 10.0).unwrap();
        let table = build_ephemeris_cache(&[body("venus", 324858.592, 0.723 * AU, 1.0)], &grid, MU_SUN).unwrap();
        let p = table.positions[0][1];
        let s = StateVector::new(5.0, [p[0] + 0.5, p[1], p[2]], [0.0; 3]);
        match eval_nbody(&s, 1, &table) {
            Err(DynamicsError::CloseApproach { body, node: 1, .. }) => assert_eq!(body, "venus"),
            other => panic!("{other:?}"),
        }
    }

    fn circular_block(n: usize, m: usize) -> (ChebyshevGrid, TrajectoryBlock) {
        let mu = MU_SUN;
        let radius = AU;
        let speed = (mu / radius).sqrt();
        let period = std::f64::consts::TAU * radius / speed;
        let grid = ChebyshevGrid::new(n, 0.0, 0.4 * period).unwrap();
        let mut data = Array2::zeros((n, 6 * m));
        for (j, &t) in grid.times().iter().enumerate() {
            let th = std::f64::consts::TAU * t / period;
            let sv = [radius * th.cos(), radius * th.sin(), 0.0, -speed * th.sin(), speed * th.cos(), 0.0];
            for c in 0..6 {
                for i in 0..m {
                    data[[j, c * m + i]] = sv[c];
                }
            }
        }
        let initial = data.row(0).to_owned();
        (grid, TrajectoryBlock::from_parts(m, data, initial).unwrap())
    }

    #[test]
    fn circular_samples_have_inverse_square_magnitude() {
        let (grid, block) = circular_block(12, 1);
        let cfg = ForceModelConfig::two_body(MU_SUN);
        let table = cfg.ephemeris_table(&grid).unwrap();
        let f = eval_force_block(&block, &grid, &table, &cfg, Parallelism::Sequential).unwrap();
        let w = grid.omega2();
        for j in 0..12 {
            let r = [block.data()[[j, 0]], block.data()[[j, 1]], block.data()[[j, 2]]];
            let a = [f[[j, 3]] / w, f[[j, 4]] / w, f[[j, 5]] / w];
            let check = norm(&a) * norm(&r).powi(2);
            assert!((check - MU_SUN).abs() <= 1e-13 * MU_SUN);
            assert_eq!(f[[j, 0]], w * block.data()[[j, 3]]);
        }
    }

    #[test]
    fn replicated_trajectories_give_identical_columns() {
        let (grid, block) = circular_block(9, 4);
        let cfg = ForceModelConfig::n_body(MU_SUN, vec![body("venus", 324858.592, 0.723 * AU, 1.0)]);
        let table = cfg.ephemeris_table(&grid).unwrap();
        let f = eval_force_block(&block, &grid, &table, &cfg, Parallelism::Sequential).unwrap();
        for j in 0..9 {
            for c in 0..6 {
                for i in 1..4 {
                    assert_eq!(f[[j, c * 4 + i]], f[[j, c * 4]]);
                }
            }
        }
    }

    #[test]
    fn block_matches_looped_single_state_evaluation() {
        let m = 13509;
        let n = 3;
        let grid = ChebyshevGrid::new(n, 7e8, 7e8 + 2e7).unwrap();
        let cfg = ForceModelConfig::n_body(
            MU_SUN,
            vec![body("venus", 324858.592, 0.723 * AU, 1.0), body("earth", 403503.2355, AU, 2.0)],
        );
        let table = cfg.ephemeris_table(&grid).unwrap();
        let mut data = Array2::zeros((n, 6 * m));
        for j in 0..n {
            for i in 0..m {
                let phase = i as f64 * 0.001 + j as f64;
                let rv = [
                    0.8 * AU * phase.cos(),
                    0.8 * AU * phase.sin(),
                    1e6 * (3.0 * phase).sin(),
                    -33.0 * phase.sin(),
                    33.0 * phase.cos(),
                    0.1,
                ];
                for c in 0..6 {
                    data[[j, c * m + i]] = rv[c];
                }
            }
        }
        let initial: Array1<f64> = data.row(0).to_owned();
        let block = TrajectoryBlock::from_parts(m, data, initial).unwrap();
        let seq = eval_force_block(&block, &grid, &table, &cfg, Parallelism::Sequential).unwrap();
        let par = eval_force_block(&block, &grid, &table, &cfg, Parallelism::DataParallel).unwrap();
        assert_eq!(seq, par);
        let w = grid.omega2();
        for j in [1usize] {
            for i in 0..m {
                let d = block.data();
                let s = StateVector::new(
                    grid.times()[j],
                    [d[[j, i]], d[[j, m + i]], d[[j, 2 * m + i]]],
                    [d[[j, 3 * m + i]], d[[j, 4 * m + i]], d[[j, 5 * m + i]]],
                );
                let a = eval_nbody(&s, j, &table).unwrap();
                for k in 0..3 {
                    assert_eq!(seq[[j, (3 + k) * m + i]], a[k] * w);
                    assert_eq!(seq[[j, k * m + i]], s.v[k] * w);
                }
            }
        }
    }

    #[test]
    fn block_singularity_reports_coordinates() {
        let (grid, block) = circular_block(5, 3);
        let mut data = block.data().clone();
        for c in 0..3 {
            data[[2, c * 3 + 1]] = 0.0;
        }
        let block = TrajectoryBlock::from_parts(3, data, block.initial_row().clone()).unwrap();
        let cfg = ForceModelConfig::two_body(MU_SUN);
        let table = cfg.ephemeris_table(&grid).unwrap();
        let err = eval_force_block(&block, &grid, &table, &cfg, Parallelism::Sequential).unwrap_err();
        assert_eq!(err, DynamicsError::Singularity { node: 2, trajectory: 1 });
    }

    #[test]
    fn model_validation() {
        assert!(ForceModelConfig::n_body(MU_SUN, vec![]).validate().is_err());
        assert!(ForceModelConfig::two_body(-1.0).validate().is_err());
        assert!(ForceModelConfig::two_body(MU_SUN).validate().is_ok());
    }

    #[test]
    fn continuous_and_tabled_accelerations_agree_at_nodes() {
        let grid = ChebyshevGrid::new(7, 0.0, 3e6).unwrap();
        let cfg = ForceModelConfig::n_body(MU_SUN, vec![body("venus", 324858.592, 0.723 * AU, 1.0)]);
        let table = cfg.ephemeris_table(&grid).unwrap();
        let s = StateVector::new(0.0, [0.9 * AU, 0.1 * AU, 0.0], [0.0; 3]);
        for j in 0..7 {
            let a = eval_nbody(&s, j, &table).unwrap();
            let b = cfg.acceleration_at(grid.times()[j], &s.r).unwrap();
            assert_eq!(a, b);
        }
    }
}
