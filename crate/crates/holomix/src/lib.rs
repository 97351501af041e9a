//! Desk-scale numerical laboratory for nonlocal operator algebra over
//! periodic Minkowski lattices: Gaussian stochastic potentials, a Wick
//! moment engine, commutation-relation measurements, holographic dephasing
//! experiments, Green's-operator calculus and a toy Fock layer.

pub mod error;
pub mod fields;
pub mod green;
pub mod holo;
pub mod lattice;
pub mod linalg;
pub mod opalg;
pub mod stats;
pub mod wick;

pub use error::{Error, Result};
