//! D2Q9 lattice Boltzmann solver for convection-diffusion equations with a
//! space-varying convective velocity.
//!
//! The crate provides the two-relaxation-time regularized (TRT-R) collision
//! operator together with BGK and first-order regularized operators, the
//! first-order discrete source term, time- and space-derivative auxiliary
//! terms, boundary schemes, and drivers for the rotating Gaussian pulse and
//! slip-channel benchmarks.

pub mod benchmark;
pub mod boundary;
pub mod cli;
pub mod collision;
pub mod error;
pub mod fields;
pub mod forcing;
pub mod lattice;
pub mod solver;

pub use error::{LbmError, Result};
