//! Finite-dimensional laboratory for the quantum mean-field limit.
//!
//! Linear algebra, a lattice model on the ring, exact N-body and Hartree
//! dynamics, symmetric purifications, and certifiers for the propagation of
//! chaos and counting-functional inequalities.

pub mod bounds;
pub mod dynamics;
pub mod error;
pub mod harness;
pub mod linalg;
pub mod metrics;
pub mod model;
pub mod purify;
pub mod random;

pub use error::{Error, Result};
