//! Numerical toolkit for the k-plane Radon transform on ℝⁿ.
//!
//! The crate evaluates the k-plane transform and its dual, builds admissible
//! radial wavelets and the kernels derived from them, and measures how the
//! wavelet convolution–backprojection reconstructions converge in several
//! Banach function spaces.

// `!(x > 0.0)` is the NaN-rejecting form used for every range check
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod error;
pub mod grassmann;
pub mod grid;
pub mod kernels;
pub mod lattice;
pub mod radon;
pub mod recon;
pub mod special;
pub mod wavelet;

pub use error::{Error, Result};
pub use grid::GridFunction;
