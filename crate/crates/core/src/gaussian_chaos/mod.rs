//! Wiener chaos on weighted grids.
//!
//! Kernels are symmetric functions on `cells^q`, stored once per multiset
//! of cells. Cell masses `mu_i` play the role of the control measure, so the
//! same machinery serves Lebesgue grids, non-uniform grids and the jump
//! cells used by [`crate::wiener_poisson`].

mod chaos;
mod contraction;
mod diagnostics;
pub mod index;
mod kernel;
mod sampling;

pub use chaos::{generator, inner_field, l_inverse, malliavin_d, product_expand, ChaosVector};
pub use contraction::{contract, contract_sym, contract_ws, contraction_norm_ws, Contraction};
pub use diagnostics::{
    block_kernel, block_kernel_on, contraction_norms, fourth_moment_report, fourth_moment_row, moment_via_formula, product_formula_residual,
    sample_gamma_pair, FourthMomentRow, MomentCheck, ProductResidual,
};
pub use kernel::{symmetrize, Caps, GridMeasure, RawTensor, SymmetricKernel};
pub use sampling::{sample, sample_joint, sample_joint_with_caps, ChaosPlan, JTable, Noise};
