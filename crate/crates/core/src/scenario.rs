//! Synthetic heliocentric test batches: clones of a Venus-resonant-like arc
//! perturbed by Venus and the Earth-Moon barycentre on analytic conics.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::dynamics::{
    osculating_period, BodySpec, EphemerisSource, ForceModelConfig, OrbitalElements, StateVector,
};

pub const AU_KM: f64 = 1.495978707e8;
pub const MU_SUN: f64 = 1.32712440018e11;
pub const MU_VENUS: f64 = 324858.592;
pub const MU_EARTH_MOON: f64 = 403503.2355;

/// Reference epoch of the synthetic batches, seconds past J2000.
pub const REFERENCE_EPOCH: f64 = 7.0e8;

/// Fraction of an orbital period covered by the reference arc.
pub const REFERENCE_ARC_PERIODS: f64 = 0.87;

fn deg(x: f64) -> f64 {
    x.to_radians()
}

/// Mean J2000 conics of Venus and the Earth-Moon barycentre.
pub fn inner_planets() -> Vec<BodySpec> {
    vec![
        BodySpec {
            name: "venus".into(),
            mu: MU_VENUS,
            ephemeris: EphemerisSource::Elements(OrbitalElements {
                a: 0.72333566 * AU_KM,
                e: 0.00677672,
                i: deg(3.39467605),
                raan: deg(76.67984255),
                argp: deg(131.60246718 - 76.67984255),
                mean_anomaly: deg(181.97909950 - 131.60246718),
                epoch: 0.0,
            }),
        },
        BodySpec {
            name: "earth-moon".into(),
            mu: MU_EARTH_MOON,
            ephemeris: EphemerisSource::Elements(OrbitalElements {
                a: 1.00000261 * AU_KM,
                e: 0.01671123,
                i: deg(0.00001531),
                raan: 0.0,
                argp: deg(102.93768193),
                mean_anomaly: deg(100.46457166 - 102.93768193),
                epoch: 0.0,
            }),
        },
    ]
}

pub fn reference_force_model() -> ForceModelConfig {
    ForceModelConfig::n_body(MU_SUN, inner_planets())
}

/// Nominal spacecraft conic of the synthetic batches.
pub fn reference_elements() -> OrbitalElements {
    OrbitalElements {
        a: 0.78 * AU_KM,
        e: 0.2,
        i: deg(4.0),
        raan: deg(20.0),
        argp: deg(40.0),
        mean_anomaly: deg(200.0),
        epoch: REFERENCE_EPOCH,
    }
}

pub fn reference_state() -> StateVector {
    reference_elements()
        .to_state(MU_SUN)
        .expect("reference conic is elliptic")
}

/// Span of the reference arc in seconds.
pub fn reference_span() -> f64 {
    REFERENCE_ARC_PERIODS * osculating_period(&reference_state(), MU_SUN).expect("elliptic")
}

/// `count` clones of the reference state; the first is unperturbed, the rest are
/// offset by up to `position_spread` km and `velocity_spread` km/s per component.
pub fn perturbed_clones(
    base: &StateVector,
    count: usize,
    position_spread: f64,
    velocity_spread: f64,
    seed: u64,
) -> Vec<StateVector> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count)
        .map(|i| {
            if i == 0 {
                return *base;
            }
            let mut s = *base;
            for k in 0..3 {
                s.r[k] += rng.random_range(-position_spread..=position_spread);
                s.v[k] += rng.random_range(-velocity_spread..=velocity_spread);
            }
            s
        })
        .collect()
}

/// Default synthetic batch: 10 000 km and 10 m/s spreads around the reference state.
pub fn synthetic_batch(count: usize, seed: u64) -> Vec<StateVector> {
    perturbed_clones(&reference_state(), count, 1.0e4, 1.0e-2, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{kepler_propagate, norm, sub};

    #[test]
    fn batch_is_deterministic_and_starts_at_reference() {
        let a = synthetic_batch(16, 3);
        let b = synthetic_batch(16, 3);
        assert_eq!(a, b);
        assert_eq!(a[0], reference_state());
        assert!(a.iter().all(|s| s.epoch == REFERENCE_EPOCH));
        assert_ne!(a[1], a[2]);
    }

    #[test]
    fn reference_arc_stays_clear_of_planets() {
        let s0 = reference_state();
        let span = reference_span();
        let planets = inner_planets();
        let mut closest = f64::INFINITY;
        for k in 0..=400 {
            let t = REFERENCE_EPOCH + span * k as f64 / 400.0;
            let s = kepler_propagate(&s0, MU_SUN, t - REFERENCE_EPOCH).unwrap();
            for p in &planets {
                let pos = p.position(t, MU_SUN).unwrap();
                closest = closest.min(norm(&sub(&pos, &s.r)));
            }
        }
        assert!(closest > 0.05 * AU_KM, "closest approach {} AU", closest / AU_KM);
    }
}
