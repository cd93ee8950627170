//! Top-of-spectrum analysis for finite-volume lattice Anderson Hamiltonians
//! `H = Δ + ξ` with doubly-exponential potential tails.
//!
//! The crate is organised bottom-up: [`lattice`] geometry, [`field`] sampling,
//! [`operator`] assembly and eigensolvers, [`regions`] for the large-field set
//! and its components, [`variational`] for the χ problem, [`verify`] for the
//! deterministic bound checkers and [`evt`] for the extreme-value statistics.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod error;
pub mod evt;
pub mod field;
pub mod lattice;
pub mod operator;
pub mod regions;
pub mod rng;
pub mod stats;
pub mod variational;
pub mod verify;

pub use error::{Error, Result};
pub use field::{PotentialField, TailKind, TailSpec};
pub use lattice::{ContinuumShape, LatticeDomain, Site};
pub use operator::{Hamiltonian, SolverKind, SpectralResult};
