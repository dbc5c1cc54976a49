//! Scattering theory for one-dimensional complex potentials.
//!
//! The crate computes transfer matrices `M(k)` of layered, delta-comb and
//! sampled potentials, locates the real zeros of `M22` (spectral
//! singularities, the lasing threshold of an optical slab) and of `M11`
//! (coherent perfect absorption), finds complex-`k` resonances and bound
//! states with the argument principle, and solves the Kerr-nonlinear slab
//! laser for its output intensity. A small finite-dimensional toolkit for
//! pseudo-Hermitian matrices (biorthonormal eigensystems, metric operators,
//! exceptional points) lives in [`pseudoherm`].

// `!(x > 0.0)` is used on purpose throughout: it rejects NaN as well
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod contour;
pub mod error;
pub mod newton;
pub mod potentials;
pub mod pseudoherm;
pub mod slablaser;
pub mod spectral;
pub mod transfer;

pub use error::{Error, Result};
pub use num_complex::Complex64;
pub use potentials::{Delta, Layer, Medium, MediumLayer, Potential, SampledGrid, Structure};
pub use transfer::{Amplitudes, Scatterer, TransferMatrix};

/// Imaginary unit.
pub const I: Complex64 = Complex64::new(0.0, 1.0);
