use serde::{Deserialize, Serialize};

/// Cartesian sample of one trajectory: seconds past J2000, km, km/s.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateVector {
    pub epoch: f64,
    pub r: [f64; 3],
    pub v: [f64; 3],
}

impl StateVector {
    pub fn new(epoch: f64, r: [f64; 3], v: [f64; 3]) -> Self {
        Self { epoch, r, v }
    }

    pub fn from_slice(epoch: f64, rv: &[f64]) -> Self {
        Self {
            epoch,
            r: [rv[0], rv[1], rv[2]],
            v: [rv[3], rv[4], rv[5]],
        }
    }

    pub fn to_array(&self) -> [f64; 6] {
        [self.r[0], self.r[1], self.r[2], self.v[0], self.v[1], self.v[2]]
    }

    pub fn is_finite(&self) -> bool {
        self.epoch.is_finite() && self.r.iter().chain(&self.v).all(|c| c.is_finite())
    }

    pub fn specific_energy(&self, mu: f64) -> f64 {
        0.5 * dot(&self.v, &self.v) - mu / norm(&self.r)
    }

    pub fn angular_momentum(&self) -> [f64; 3] {
        cross(&self.r, &self.v)
    }
}

#[inline]
pub fn dot(a: &[f64; 3], b: &[f64; 3]) -> f64 {
    a[0] * b[0] + a[1] * b[1] + a[2] * b[2]
}

#[inline]
pub fn norm(a: &[f64; 3]) -> f64 {
    dot(a, a).sqrt()
}

#[inline]
pub fn cross(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [
        a[1] * b[2] - a[2] * b[1],
        a[2] * b[0] - a[0] * b[2],
        a[0] * b[1] - a[1] * b[0],
    ]
}

#[inline]
pub fn sub(a: &[f64; 3], b: &[f64; 3]) -> [f64; 3] {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

/// `max(|dr| / |r|, |dv| / |v|)` with the norms floored at `floor`.
pub fn relative_state_error(a: &StateVector, b: &StateVector, floor: f64) -> f64 {
    let dr = norm(&sub(&a.r, &b.r)) / norm(&b.r).max(floor);
    let dv = norm(&sub(&a.v, &b.v)) / norm(&b.v).max(floor);
    dr.max(dv)
}
