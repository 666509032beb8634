//! Batch orbit propagation with the modified Picard-Chebyshev method.
//!
//! Trajectories that share their time nodes are stacked into component-major
//! blocks and refined together by one fixed-point process. Outer groups of
//! such blocks converge independently and can be spread over a worker pool.

pub mod augmentation;
pub mod cheb;
pub mod dynamics;
pub mod exec;
pub mod io;
pub mod oracle;
pub mod propagator;
pub mod runner;
pub mod scenario;
pub mod selftest;

pub use exec::Parallelism;
