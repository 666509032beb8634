use ndarray::{s, Array1, Array2, ArrayView1, ArrayView2, ArrayViewMut2, Axis, Zip};
use rayon::prelude::*;

use super::grid::lobatto_nodes;
use super::ChebError;
use crate::exec::Parallelism;

/// Column chunk width used when a matrix product is split across workers.
const PAR_COLUMN_CHUNK: usize = 96;

/// `T_k(tau_j)` for all nodes and degrees, by the three-term recurrence.
pub fn chebyshev_table(tau: &[f64], degrees: usize) -> Array2<f64> {
    let mut t = Array2::zeros((tau.len(), degrees));
    for (j, &x) in tau.iter().enumerate() {
        if degrees > 0 {
            t[[j, 0]] = 1.0;
        }
        if degrees > 1 {
            t[[j, 1]] = x;
        }
        for k in 2..degrees {
            t[[j, k]] = 2.0 * x * t[[j, k - 1]] - t[[j, k - 2]];
        }
    }
    t
}

/// The constant operators of the Picard-Chebyshev update for `n_nodes` nodes.
///
/// With `B` built from the scaled force matrix `F`, the update reads
/// `B[0] = s_row . (a_op F)[1..] + 2 y0`, `B[k] = (a_op F)[k]` and `Y = eval B`.
/// `combined` folds all three steps into `Y = combined F + 1 y0`.
#[derive(Debug, Clone)]
pub struct PCMatrices {
    n_nodes: usize,
    eval: Array2<f64>,
    xform: Array2<f64>,
    integ: Array2<f64>,
    a_op: Array2<f64>,
    s_row: Array1<f64>,
    combined: Array2<f64>,
}

impl PCMatrices {
    pub fn new(n_nodes: usize) -> Result<Self, ChebError> {
        if n_nodes < 3 {
            return Err(ChebError::InvalidSize(n_nodes));
        }
        let n = n_nodes;
        let m = n - 1;
        let tau = lobatto_nodes(n);
        let plain = chebyshev_table(&tau, n);

        let mut eval = plain.clone();
        eval.column_mut(0).mapv_inplace(|v| v * 0.5);

        // Discrete Chebyshev transform on the Lobatto nodes.
        let mut xform = Array2::zeros((n, n));
        for k in 0..n {
            let nu = if k == 0 || k == m { 2.0 } else { 1.0 };
            let scale = 2.0 / (m as f64 * nu);
            for j in 0..n {
                let w = if j == 0 || j == m { 0.5 } else { 1.0 };
                xform[[k, j]] = scale * w * plain[[j, k]];
            }
        }

        // Antiderivative in coefficient space; row 0 is fixed by the initial condition.
        let mut integ = Array2::zeros((n, n));
        integ[[1, 0]] = 1.0;
        if n > 2 {
            integ[[1, 2]] = -0.5;
        }
        for k in 2..n {
            let inv = 1.0 / (2.0 * k as f64);
            integ[[k, k - 1]] = inv;
            if k + 1 < n {
                integ[[k, k + 1]] = -inv;
            }
        }

        let a_op = integ.dot(&xform);
        let s_row: Array1<f64> = (1..n)
            .map(|k| if k % 2 == 0 { -2.0 } else { 2.0 })
            .collect();

        // combined[j][i] = sum_{k>=1} (eval[j][k] + s_k / 2) a_op[k][i]
        let mut folded = eval.slice(s![.., 1..]).to_owned();
        for (k, &sk) in s_row.iter().enumerate() {
            folded.column_mut(k).mapv_inplace(|v| v + 0.5 * sk);
        }
        let combined = folded.dot(&a_op.slice(s![1.., ..]));

        Ok(Self {
            n_nodes,
            eval,
            xform,
            integ,
            a_op,
            s_row,
            combined,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    /// Node evaluation matrix with the half-weighted constant column.
    pub fn eval(&self) -> &Array2<f64> {
        &self.eval
    }

    /// Sample-to-coefficient transform.
    pub fn xform(&self) -> &Array2<f64> {
        &self.xform
    }

    pub fn integ(&self) -> &Array2<f64> {
        &self.integ
    }

    pub fn a_op(&self) -> &Array2<f64> {
        &self.a_op
    }

    /// Initial-condition row, indexed by degree `1..n`.
    pub fn s_row(&self) -> &Array1<f64> {
        &self.s_row
    }

    pub fn combined(&self) -> &Array2<f64> {
        &self.combined
    }

    /// Evaluation matrix without the half weight on the constant column.
    pub fn plain_eval(&self) -> Array2<f64> {
        let mut p = self.eval.clone();
        p.column_mut(0).mapv_inplace(|v| v * 2.0);
        p
    }

    /// Test hook: corrupts the fused operator so exactness checks must fail.
    #[doc(hidden)]
    pub fn perturb_for_testing(&mut self, delta: f64) {
        let j = self.n_nodes / 2;
        self.combined[[j, 1]] += delta;
        self.xform[[1, j]] += delta;
    }
}

fn check_shapes(
    mats: &PCMatrices,
    force: &ArrayView2<f64>,
    initial_row: &ArrayView1<f64>,
    out_dim: (usize, usize),
) -> Result<(), ChebError> {
    let n = mats.n_nodes;
    if force.nrows() != n {
        return Err(ChebError::Shape(format!(
            "force block has {} rows, expected {n}",
            force.nrows()
        )));
    }
    if initial_row.len() != force.ncols() {
        return Err(ChebError::Shape(format!(
            "initial row has {} columns, force block has {}",
            initial_row.len(),
            force.ncols()
        )));
    }
    if out_dim != force.dim() {
        return Err(ChebError::Shape(format!(
            "output block is {:?}, force block is {:?}",
            out_dim,
            force.dim()
        )));
    }
    Ok(())
}

/// One Picard update through the fused operator.
pub fn picard_update(
    mats: &PCMatrices,
    force: ArrayView2<f64>,
    initial_row: ArrayView1<f64>,
) -> Result<Array2<f64>, ChebError> {
    let mut out = Array2::zeros(force.dim());
    picard_update_into(mats, force, initial_row, out.view_mut(), Parallelism::Sequential)?;
    Ok(out)
}

/// [`picard_update`] writing into a preallocated block.
///
/// In data-parallel mode the product is split by column chunks; every output
/// column is still produced by the same row-by-column product.
pub fn picard_update_into(
    mats: &PCMatrices,
    force: ArrayView2<f64>,
    initial_row: ArrayView1<f64>,
    mut out: ArrayViewMut2<f64>,
    par: Parallelism,
) -> Result<(), ChebError> {
    check_shapes(mats, &force, &initial_row, out.dim())?;
    let q = &mats.combined;
    let width = force.ncols();
    if par.is_parallel() && width > PAR_COLUMN_CHUNK {
        let pieces: Vec<_> = force
            .axis_chunks_iter(Axis(1), PAR_COLUMN_CHUNK)
            .zip(out.axis_chunks_iter_mut(Axis(1), PAR_COLUMN_CHUNK))
            .zip(initial_row.axis_chunks_iter(Axis(0), PAR_COLUMN_CHUNK))
            .collect();
        pieces.into_par_iter().for_each(|((f, mut o), y0)| {
            ndarray::linalg::general_mat_mul(1.0, q, &f, 0.0, &mut o);
            add_initial_row(o, y0);
        });
    } else {
        ndarray::linalg::general_mat_mul(1.0, q, &force, 0.0, &mut out);
        add_initial_row(out, initial_row);
    }
    Ok(())
}

fn add_initial_row(mut out: ArrayViewMut2<f64>, y0: ArrayView1<f64>) {
    for mut row in out.rows_mut() {
        Zip::from(&mut row).and(&y0).for_each(|v, &y| *v += y);
    }
}

/// The literal three-step update: `A F`, the constant-term row, then `eval B`.
pub fn picard_update_staged(
    mats: &PCMatrices,
    force: ArrayView2<f64>,
    initial_row: ArrayView1<f64>,
) -> Result<Array2<f64>, ChebError> {
    check_shapes(mats, &force, &initial_row, force.dim())?;
    let af = mats.a_op.dot(&force);
    let mut b = af.clone();
    let lead = mats.s_row.dot(&af.slice(s![1.., ..]));
    Zip::from(b.row_mut(0))
        .and(&lead)
        .and(&initial_row)
        .for_each(|b0, &l, &y| *b0 = l + 2.0 * y);
    Ok(mats.eval.dot(&b))
}
