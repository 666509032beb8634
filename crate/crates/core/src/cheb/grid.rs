use std::f64::consts::PI;

use super::ChebError;

/// Chebyshev-Gauss-Lobatto sampling of one integration segment.
///
/// `tau` holds the dimensionless nodes in `[-1, 1]`, `times` the mapped epochs
/// `omega2 * tau + omega1`. A backward segment has a negative `omega2`.
#[derive(Debug, Clone, PartialEq)]
pub struct ChebyshevGrid {
    n_nodes: usize,
    tau: Vec<f64>,
    times: Vec<f64>,
    omega1: f64,
    omega2: f64,
}

/// Nodes `-cos(j pi / (n - 1))`, built so that `tau[j] == -tau[n - 1 - j]` holds bit-exactly.
pub fn lobatto_nodes(n_nodes: usize) -> Vec<f64> {
    let m = n_nodes - 1;
    let mut tau = vec![0.0; n_nodes];
    for j in 0..=m / 2 {
        // -cos(j pi / m) == sin(pi (2j - m) / (2m)); the sine form is accurate near the ends.
        let v = (PI * (2.0 * j as f64 - m as f64) / (2.0 * m as f64)).sin();
        tau[j] = v;
        tau[m - j] = -v;
    }
    if m.is_multiple_of(2) {
        tau[m / 2] = 0.0;
    }
    tau[0] = -1.0;
    tau[m] = 1.0;
    tau
}

impl ChebyshevGrid {
    pub fn new(n_nodes: usize, t_start: f64, t_end: f64) -> Result<Self, ChebError> {
        if n_nodes < 3 {
            return Err(ChebError::InvalidSize(n_nodes));
        }
        if !(t_start.is_finite() && t_end.is_finite()) || t_start == t_end {
            return Err(ChebError::InvalidSpan { t_start, t_end });
        }
        let omega1 = (t_end + t_start) / 2.0;
        let omega2 = (t_end - t_start) / 2.0;
        let tau = lobatto_nodes(n_nodes);
        let mut times: Vec<f64> = tau.iter().map(|&t| omega2 * t + omega1).collect();
        // Endpoints pinned so consecutive segments share their boundary epoch exactly.
        times[0] = t_start;
        times[n_nodes - 1] = t_end;
        Ok(Self {
            n_nodes,
            tau,
            times,
            omega1,
            omega2,
        })
    }

    pub fn n_nodes(&self) -> usize {
        self.n_nodes
    }

    pub fn tau(&self) -> &[f64] {
        &self.tau
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn omega1(&self) -> f64 {
        self.omega1
    }

    pub fn omega2(&self) -> f64 {
        self.omega2
    }

    pub fn t_start(&self) -> f64 {
        self.times[0]
    }

    pub fn t_end(&self) -> f64 {
        self.times[self.n_nodes - 1]
    }

    pub fn is_backward(&self) -> bool {
        self.omega2 < 0.0
    }
}
