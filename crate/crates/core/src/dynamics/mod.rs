//! Force models, conic propagation and ephemeris handling.
//!
//! All quantities are heliocentric ecliptic J2000 in km, km/s and seconds past J2000.

mod ephemeris;
mod forces;
mod kepler;
mod state;

pub use ephemeris::{
    build_ephemeris_cache, BodySpec, ChebyshevSegment, EphemerisError, EphemerisSource,
    EphemerisTable, DEFAULT_PROXIMITY_FLOOR_KM,
};
pub use forces::{
    eval_force_block, eval_nbody, eval_two_body, perturbation_at_node, BlockDynamics,
    DynamicsError, ForceModelConfig, ForceModelKind,
};
pub use kepler::{kepler_propagate, osculating_period, solve_kepler, KeplerError, OrbitalElements};
pub use state::{cross, dot, norm, relative_state_error, sub, StateVector};
