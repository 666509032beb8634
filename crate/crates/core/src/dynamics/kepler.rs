use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use super::state::{cross, dot, norm, StateVector};

const KEPLER_TOL: f64 = 1e-14;
const KEPLER_MAX_ITER: usize = 50;
const ECCENTRICITY_LIMIT: f64 = 1.0 - 1e-8;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum KeplerError {
    #[error("state is not elliptic (energy {energy:e} km2/s2, eccentricity {eccentricity})")]
    NonElliptic { energy: f64, eccentricity: f64 },
    #[error("Kepler equation did not converge after {0} Newton iterations")]
    NoConvergence(usize),
}

/// Classical elements; angles in radians, `a` in km, `epoch` in seconds past J2000.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrbitalElements {
    pub a: f64,
    pub e: f64,
    pub i: f64,
    pub raan: f64,
    pub argp: f64,
    #[serde(rename = "M0")]
    pub mean_anomaly: f64,
    pub epoch: f64,
}

impl OrbitalElements {
    pub fn to_state(&self, mu: f64) -> Result<StateVector, KeplerError> {
        if !(0.0..ECCENTRICITY_LIMIT).contains(&self.e) || self.a <= 0.0 {
            return Err(KeplerError::NonElliptic {
                energy: -mu / (2.0 * self.a),
                eccentricity: self.e,
            });
        }
        let e = self.e;
        let big_e = solve_kepler(self.mean_anomaly, e)?;
        let (sin_e, cos_e) = big_e.sin_cos();
        let b = self.a * (1.0 - e * e).sqrt();
        let r_mag = self.a * (1.0 - e * cos_e);
        let n = (mu / self.a.powi(3)).sqrt();
        let edot = n * self.a / r_mag;
        let p = [self.a * (cos_e - e), b * sin_e];
        let q = [-self.a * sin_e * edot, b * cos_e * edot];

        let (so, co) = self.raan.sin_cos();
        let (sw, cw) = self.argp.sin_cos();
        let (si, ci) = self.i.sin_cos();
        let px = [co * cw - so * sw * ci, so * cw + co * sw * ci, sw * si];
        let qx = [-co * sw - so * cw * ci, -so * sw + co * cw * ci, cw * si];
        let r = [
            p[0] * px[0] + p[1] * qx[0],
            p[0] * px[1] + p[1] * qx[1],
            p[0] * px[2] + p[1] * qx[2],
        ];
        let v = [
            q[0] * px[0] + q[1] * qx[0],
            q[0] * px[1] + q[1] * qx[1],
            q[0] * px[2] + q[1] * qx[2],
        ];
        Ok(StateVector::new(self.epoch, r, v))
    }

    pub fn period(&self, mu: f64) -> f64 {
        TAU * (self.a.powi(3) / mu).sqrt()
    }
}

/// Eccentric anomaly for mean anomaly `m` by Newton iteration.
pub fn solve_kepler(m: f64, e: f64) -> Result<f64, KeplerError> {
    let m = wrap_pi(m);
    let mut big_e = if e < 0.8 { m } else { PI.copysign(m) };
    for _ in 0..KEPLER_MAX_ITER {
        let f = big_e - e * big_e.sin() - m;
        let step = f / (1.0 - e * big_e.cos());
        big_e -= step;
        if step.abs() <= KEPLER_TOL {
            return Ok(big_e);
        }
    }
    Err(KeplerError::NoConvergence(KEPLER_MAX_ITER))
}

fn wrap_pi(x: f64) -> f64 {
    x - TAU * (x / TAU).round()
}

/// Semi-major axis, eccentricity and mean motion of an elliptic state.
fn conic(state: &StateVector, mu: f64) -> Result<(f64, f64, f64), KeplerError> {
    let r = norm(&state.r);
    let energy = state.specific_energy(mu);
    let h = cross(&state.r, &state.v);
    let ecc = (1.0 + 2.0 * energy * dot(&h, &h) / (mu * mu)).max(0.0).sqrt();
    // Negated form also rejects NaN.
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    let rejected = !(energy < 0.0) || !(ecc < ECCENTRICITY_LIMIT) || !(r > 0.0);
    if rejected {
        return Err(KeplerError::NonElliptic {
            energy,
            eccentricity: ecc,
        });
    }
    let a = -mu / (2.0 * energy);
    Ok((a, ecc, (mu / (a * a * a)).sqrt()))
}

/// Osculating period of `state` about a body of parameter `mu`.
pub fn osculating_period(state: &StateVector, mu: f64) -> Result<f64, KeplerError> {
    let (_, _, n) = conic(state, mu)?;
    Ok(TAU / n)
}

/// Two-body conic propagation by `dt` seconds using the eccentric-anomaly
/// form of Kepler's equation and the f and g functions.
pub fn kepler_propagate(state: &StateVector, mu: f64, dt: f64) -> Result<StateVector, KeplerError> {
    let (a, _, n) = conic(state, mu)?;
    let r0 = norm(&state.r);
    let sqrt_a = a.sqrt();
    let sigma0 = dot(&state.r, &state.v) / mu.sqrt();
    let c1 = sigma0 / sqrt_a;
    let c2 = 1.0 - r0 / a;

    let mean = n * dt;
    let target = wrap_pi(mean);

    // Start from the classical solution: e sin E0 = c1, e cos E0 = c2.
    let e0 = c1.atan2(c2);
    let m0 = e0 - c1;
    let mut de = solve_kepler(m0 + target, c1.hypot(c2))? - e0;
    de -= TAU * ((de - target) / TAU).round();

    // Polish on n dt = dE + c1 (1 - cos dE) - c2 sin dE, which avoids E0 cancellation.
    let mut converged = false;
    for _ in 0..KEPLER_MAX_ITER {
        let (s, c) = de.sin_cos();
        let f = de + c1 * (1.0 - c) - c2 * s - target;
        let fp = 1.0 + c1 * s - c2 * c;
        let step = f / fp;
        de -= step;
        if step.abs() <= KEPLER_TOL {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(KeplerError::NoConvergence(KEPLER_MAX_ITER));
    }

    let (s, c) = de.sin_cos();
    let one_minus_c = 2.0 * (0.5 * de).sin().powi(2);
    let r = a + (r0 - a) * c + sigma0 * sqrt_a * s;
    let f = 1.0 - a / r0 * one_minus_c;
    let g = (c1 * one_minus_c + r0 / a * s) / n;
    let fdot = -(mu * a).sqrt() / (r * r0) * s;
    let gdot = 1.0 - a / r * one_minus_c;

    let mut out = StateVector::new(state.epoch + dt, [0.0; 3], [0.0; 3]);
    for k in 0..3 {
        out.r[k] = f * state.r[k] + g * state.v[k];
        out.v[k] = fdot * state.r[k] + gdot * state.v[k];
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rel(a: &StateVector, b: &StateVector) -> f64 {
        super::super::state::relative_state_error(a, b, 1e-30)
    }

    #[test]
    fn circular_half_and_full_period() {
        let s = StateVector::new(0.0, [1.0, 0.0, 0.0], [0.0, 1.0, 0.0]);
        let half = kepler_propagate(&s, 1.0, PI).unwrap();
        for k in 0..3 {
            assert!((half.r[k] - [-1.0, 0.0, 0.0][k]).abs() < 1e-12);
            assert!((half.v[k] - [0.0, -1.0, 0.0][k]).abs() < 1e-12);
        }
        let full = kepler_propagate(&s, 1.0, TAU).unwrap();
        for k in 0..3 {
            assert!((full.r[k] - s.r[k]).abs() < 1e-12);
            assert!((full.v[k] - s.v[k]).abs() < 1e-12);
        }
        assert_eq!(full.epoch, TAU);
    }

    #[test]
    fn period_recurrence_on_eccentric_orbits() {
        let mu = 1.32712440018e11;
        for (e, m0) in [(0.0, 0.3), (0.2, 1.0), (0.6, -2.0), (0.95, 3.0)] {
            let el = OrbitalElements {
                a: 1.1e8,
                e,
                i: 0.3,
                raan: 1.2,
                argp: -0.4,
                mean_anomaly: m0,
                epoch: 0.0,
            };
            let s = el.to_state(mu).unwrap();
            let p = osculating_period(&s, mu).unwrap();
            let back = kepler_propagate(&s, mu, p).unwrap();
            assert!(rel(&back, &s) < 1e-11, "e={e}: {:e}", rel(&back, &s));
            let twice = kepler_propagate(&s, mu, -2.0 * p).unwrap();
            assert!(rel(&twice, &s) < 1e-11);
        }
    }

    #[test]
    fn composition_of_steps() {
        let mu = 1.0;
        let s = StateVector::new(0.0, [0.5, 0.0, 0.0], [0.0, 1.7320508075688772, 0.0]);
        let direct = kepler_propagate(&s, mu, 2.3).unwrap();
        let mid = kepler_propagate(&s, mu, 1.1).unwrap();
        let chained = kepler_propagate(&mid, mu, 1.2).unwrap();
        assert!(rel(&direct, &chained) < 1e-13);
        let back = kepler_propagate(&direct, mu, -2.3).unwrap();
        assert!(rel(&back, &s) < 1e-13);
    }

    #[test]
    fn elements_round_trip_energy() {
        let mu = 398600.4418;
        let el = OrbitalElements {
            a: 7000.0,
            e: 0.1,
            i: 0.9,
            raan: 0.1,
            argp: 0.2,
            mean_anomaly: 0.0,
            epoch: 0.0,
        };
        let s = el.to_state(mu).unwrap();
        // At perigee.
        assert!((norm(&s.r) - 6300.0).abs() < 1e-9);
        assert!((s.specific_energy(mu) + mu / 14000.0).abs() < 1e-12);
    }

    #[test]
    fn hyperbolic_rejected() {
        let s = StateVector::new(0.0, [1.0, 0.0, 0.0], [0.0, 2.0, 0.0]);
        assert!(matches!(kepler_propagate(&s, 1.0, 1.0), Err(KeplerError::NonElliptic { .. })));
        let parabolic = StateVector::new(0.0, [1.0, 0.0, 0.0], [0.0, 2f64.sqrt(), 0.0]);
        assert!(kepler_propagate(&parabolic, 1.0, 1.0).is_err());
    }
}
