use serde::{Deserialize, Serialize};

use super::kepler::{kepler_propagate, KeplerError, OrbitalElements};
use super::state::norm;
use crate::cheb::ChebyshevGrid;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EphemerisError {
    #[error("body {body}: epoch {epoch} s is outside the tabulated coverage")]
    Coverage { body: String, epoch: f64 },
    #[error("body {body}: {source}")]
    Kepler {
        body: String,
        #[source]
        source: KeplerError,
    },
    #[error("body {body}: {reason}")]
    InvalidBody { body: String, reason: String },
}

/// One Chebyshev fit of a body's position over `[t_start, t_end]`.
///
/// The position is `sum_k c_k T_k(s)` with `s` the epoch mapped onto `[-1, 1]`;
/// the constant coefficient carries full weight.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChebyshevSegment {
    pub t_start: f64,
    pub t_end: f64,
    pub coeffs_x: Vec<f64>,
    pub coeffs_y: Vec<f64>,
    pub coeffs_z: Vec<f64>,
}

fn clenshaw(coeffs: &[f64], s: f64) -> f64 {
    let mut b1 = 0.0;
    let mut b2 = 0.0;
    for &c in coeffs.iter().skip(1).rev() {
        let b0 = 2.0 * s * b1 - b2 + c;
        b2 = b1;
        b1 = b0;
    }
    coeffs.first().copied().unwrap_or(0.0) + s * b1 - b2
}

impl ChebyshevSegment {
    pub fn covers(&self, t: f64) -> bool {
        let (lo, hi) = if self.t_start <= self.t_end {
            (self.t_start, self.t_end)
        } else {
            (self.t_end, self.t_start)
        };
        t >= lo && t <= hi
    }

    pub fn position(&self, t: f64) -> [f64; 3] {
        let s = (2.0 * t - (self.t_start + self.t_end)) / (self.t_end - self.t_start);
        [
            clenshaw(&self.coeffs_x, s),
            clenshaw(&self.coeffs_y, s),
            clenshaw(&self.coeffs_z, s),
        ]
    }

    /// Interpolates `f` at the `degree + 1` Chebyshev-Gauss points of the span.
    pub fn fit<F: FnMut(f64) -> [f64; 3]>(mut f: F, t_start: f64, t_end: f64, degree: usize) -> Self {
        let n = degree + 1;
        let mid = 0.5 * (t_start + t_end);
        let half = 0.5 * (t_end - t_start);
        let samples: Vec<(f64, [f64; 3])> = (0..n)
            .map(|j| {
                let theta = std::f64::consts::PI * (j as f64 + 0.5) / n as f64;
                let s = theta.cos();
                (theta, f(mid + half * s))
            })
            .collect();
        let mut coeffs = [vec![0.0; n], vec![0.0; n], vec![0.0; n]];
        for k in 0..n {
            for (theta, p) in &samples {
                let tk = (k as f64 * theta).cos();
                for (axis, c) in coeffs.iter_mut().enumerate() {
                    c[k] += p[axis] * tk;
                }
            }
            let scale = if k == 0 { 1.0 / n as f64 } else { 2.0 / n as f64 };
            for c in coeffs.iter_mut() {
                c[k] *= scale;
            }
        }
        let [coeffs_x, coeffs_y, coeffs_z] = coeffs;
        Self {
            t_start,
            t_end,
            coeffs_x,
            coeffs_y,
            coeffs_z,
        }
    }
}

/// Where a perturbing body's heliocentric position comes from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EphemerisSource {
    /// Conic about the central body with parameter `central_mu + mu`.
    Elements(OrbitalElements),
    Chebyshev(Vec<ChebyshevSegment>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BodySpec {
    pub name: String,
    pub mu: f64,
    #[serde(flatten)]
    pub ephemeris: EphemerisSource,
}

impl BodySpec {
    pub fn validate(&self) -> Result<(), EphemerisError> {
        let invalid = |reason: &str| EphemerisError::InvalidBody {
            body: self.name.clone(),
            reason: reason.to_string(),
        };
        if !(self.mu > 0.0 && self.mu.is_finite()) {
            return Err(invalid("gravitational parameter must be positive"));
        }
        match &self.ephemeris {
            EphemerisSource::Elements(el) => {
                #[allow(clippy::neg_cmp_op_on_partial_ord)]
                let bad = !(el.e >= 0.0 && el.e < 1.0) || !(el.a > 0.0);
                if bad {
                    return Err(invalid("elements must describe a bound conic"));
                }
            }
            EphemerisSource::Chebyshev(segs) => {
                if segs.is_empty() {
                    return Err(invalid("empty Chebyshev segment list"));
                }
                if segs.iter().any(|s| {
                    s.t_start == s.t_end
                        || s.coeffs_x.is_empty()
                        || s.coeffs_y.is_empty()
                        || s.coeffs_z.is_empty()
                }) {
                    return Err(invalid("degenerate Chebyshev segment"));
                }
            }
        }
        Ok(())
    }

    /// Heliocentric position (km) at epoch `t`.
    pub fn position(&self, t: f64, central_mu: f64) -> Result<[f64; 3], EphemerisError> {
        match &self.ephemeris {
            EphemerisSource::Elements(el) => {
                let mu = central_mu + self.mu;
                let at_epoch = el.to_state(mu).map_err(|source| EphemerisError::Kepler {
                    body: self.name.clone(),
                    source,
                })?;
                let s = kepler_propagate(&at_epoch, mu, t - el.epoch).map_err(|source| {
                    EphemerisError::Kepler {
                        body: self.name.clone(),
                        source,
                    }
                })?;
                Ok(s.r)
            }
            EphemerisSource::Chebyshev(segs) => segs
                .iter()
                .find(|s| s.covers(t))
                .map(|s| s.position(t))
                .ok_or_else(|| EphemerisError::Coverage {
                    body: self.name.clone(),
                    epoch: t,
                }),
        }
    }

    /// Tabulates this body over `[t_start, t_end]` with `segments` fits of `degree`.
    pub fn tabulate(
        &self,
        central_mu: f64,
        t_start: f64,
        t_end: f64,
        segments: usize,
        degree: usize,
    ) -> Result<BodySpec, EphemerisError> {
        let width = (t_end - t_start) / segments as f64;
        let mut out = Vec::with_capacity(segments);
        for s in 0..segments {
            let a = t_start + width * s as f64;
            let b = if s + 1 == segments { t_end } else { a + width };
            let mut failure = None;
            let seg = ChebyshevSegment::fit(
                |t| match self.position(t, central_mu) {
                    Ok(p) => p,
                    Err(e) => {
                        failure.get_or_insert(e);
                        [f64::NAN; 3]
                    }
                },
                a,
                b,
                degree,
            );
            if let Some(e) = failure {
                return Err(e);
            }
            out.push(seg);
        }
        Ok(BodySpec {
            name: self.name.clone(),
            mu: self.mu,
            ephemeris: EphemerisSource::Chebyshev(out),
        })
    }
}

/// Perturbing-body positions frozen at the nodes of one segment.
///
/// `indirect[b][j]` stores `mu_b r_b / |r_b|^3`, the frame term, so the
/// per-iteration dynamics never touch the ephemeris providers.
#[derive(Debug, Clone, PartialEq)]
pub struct EphemerisTable {
    pub node_times: Vec<f64>,
    pub central_mu: f64,
    pub body_names: Vec<String>,
    pub body_mus: Vec<f64>,
    pub positions: Vec<Vec<[f64; 3]>>,
    pub indirect: Vec<Vec<[f64; 3]>>,
    pub proximity_floor: f64,
}

pub const DEFAULT_PROXIMITY_FLOOR_KM: f64 = 1.0;

impl EphemerisTable {
    pub fn n_bodies(&self) -> usize {
        self.body_mus.len()
    }

    pub fn n_nodes(&self) -> usize {
        self.node_times.len()
    }

    pub fn with_proximity_floor(mut self, floor: f64) -> Self {
        self.proximity_floor = floor;
        self
    }
}

pub fn build_ephemeris_cache(
    bodies: &[BodySpec],
    grid: &ChebyshevGrid,
    central_mu: f64,
) -> Result<EphemerisTable, EphemerisError> {
    let times = grid.times().to_vec();
    let mut positions = Vec::with_capacity(bodies.len());
    let mut indirect = Vec::with_capacity(bodies.len());
    for body in bodies {
        body.validate()?;
        let pos: Vec<[f64; 3]> = times
            .iter()
            .map(|&t| body.position(t, central_mu))
            .collect::<Result<_, _>>()?;
        let ind = pos
            .iter()
            .map(|p| {
                let d = norm(p);
                let k = body.mu / (d * d * d);
                [k * p[0], k * p[1], k * p[2]]
            })
            .collect();
        positions.push(pos);
        indirect.push(ind);
    }
    Ok(EphemerisTable {
        node_times: times,
        central_mu,
        body_names: bodies.iter().map(|b| b.name.clone()).collect(),
        body_mus: bodies.iter().map(|b| b.mu).collect(),
        positions,
        indirect,
        proximity_floor: DEFAULT_PROXIMITY_FLOOR_KM,
    })
}
