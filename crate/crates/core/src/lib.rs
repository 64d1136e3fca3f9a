//! Numerical toolkit for Stein's method and Malliavin calculus.
//!
//! Centered reference laws are described through their Stein factor `g*`.
//! The crate solves the associated Stein equation, builds Wiener and
//! Wiener-Poisson chaos on weighted grids, estimates Malliavin quantities
//! for smooth Gaussian functionals, assembles Nourdin-Peccati type distance
//! bounds, and runs the fractional Gaussian noise experiment.

// `!(x > 0.0)` style guards reject NaN along with out-of-range values.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod fbm_lab;
pub mod gaussian_chaos;
pub mod malliavin_numeric;
pub mod np_bound;
pub mod quadrature;
pub mod reference_laws;
pub mod rng;
pub mod stats;
pub mod stein_solver;
pub mod wiener_poisson;

pub use error::{Error, Result};
