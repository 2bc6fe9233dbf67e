//! Nonholonomic Lagrangian and Hamiltonian mechanics on Lie affgebroids, in local coordinates.
//!
//! A model is given by an anchor `(rho0, rho)` and structure functions `(C0, C)` on a
//! base with coordinates `x^i` and a fibre with coordinates `y^alpha`. On top of it the crate
//! computes Euler-Lagrange sections, Poincaré-Cartan sections, affine nonholonomic
//! constraint dynamics, their projectors, and the Hamiltonian counterpart with the
//! nonholonomic bracket.

#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::needless_range_loop)]

pub mod algebroid;
pub mod catalog;
pub mod checks;
pub mod cli;
pub mod config;
pub mod dual;
pub mod error;
pub mod expr;
pub mod field;
pub mod hamiltonian;
pub mod integrator;
pub mod lagrangian;
pub mod linalg;
pub mod nonholonomic;
pub mod prolong;

pub use algebroid::{AffgebroidModel, PhasePoint};
pub use error::{Error, Result};
pub use field::ScalarField;
pub use lagrangian::{Lagrangian, LagrangianSystem};
pub use nonholonomic::{ConstrainedSystem, ConstraintSet};
