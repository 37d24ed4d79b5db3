//! Numerical machinery for free transportation-cost inequalities.

// `!(x > 0.0)` is the NaN-rejecting form of the input checks.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cli;
pub mod equilibrium;
pub mod error;
pub mod free_moments;
pub mod measures;
pub mod potentials;
pub mod pressure;
pub mod quadrature;
pub mod random_matrices;
pub mod tci;
pub mod transport;

pub use error::{Error, Result};
