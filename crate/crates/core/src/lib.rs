//! Numerical core for the quasi-lattice approximation of continuum classical
//! gases with strong superstable pair interactions.
//!
//! Space is cut into half-open cubes of edge `a`; the *dilute* restriction keeps
//! only configurations with at most one particle per cube. This crate computes
//! the full and dilute grand partition functions, pressures and correlation
//! functions, the superstability constants that bound their difference, and
//! truncated Kirkwood–Salzburg series for both the continuum and the cube
//! (hard-core corrected) systems.
//!
//! The crate is `no_std` and only needs `alloc`. All randomness is drawn from
//! counter-addressed ChaCha substreams ([`sampling`]) so every estimate is a
//! pure function of its inputs and seed. Parallelism is injected through
//! [`sampling::BatchExecutor`].
//!
//! Module map:
//!
//! - [`potential`]: radial pair potentials, Assumption-(A) certification, Mayer integral `C(β)`
//! - [`lattice`]: cube grids, regions, configurations, dilute/dense indicators
//! - [`energy`]: configuration energies, hard-core corrected energies, stability constants
//! - [`partition`]: `Z`, `Z⁻`, `Z⁺`, pressures and the `ε₁(a)` bound
//! - [`correlation`]: correlation functions by definition and by KS series

#![no_std]
#![forbid(unsafe_code)]
#![allow(clippy::too_many_arguments, clippy::excessive_precision, clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod correlation;
pub mod energy;
pub mod error;
pub mod estimate;
pub mod lattice;
pub mod math;
pub mod partition;
pub mod potential;
pub mod quadrature;
pub mod sampling;

pub use error::{Error, Result};
pub use estimate::{Estimate, Method};
pub use lattice::{Configuration, CubeConfiguration, CubeGrid, CubeIndex, Region};
pub use partition::EnsembleParams;
pub use potential::{AssumptionA, Family, Potential};

/// Largest supported spatial dimension.
pub const MAX_DIM: usize = 3;

/// A point of `ℝ^d`, padded with zeros beyond the active dimension.
pub type Point = [f64; MAX_DIM];
