//! Simple kriging with a known zero mean and a known stationary covariance.
//!
//! The crate computes kriging weights, the kriging variance (power function),
//! Lebesgue constants and RKHS quantities for a small catalog of covariance
//! families, and provides the deterministic building blocks used to study
//! pointwise consistency of the predictor along nested designs:
//!
//! - [`kernels`]: Gaussian, exponential and Matérn covariances with spectral
//!   densities and a polynomial-minorant checker for the spectral density.
//! - [`designs`]: nested design sequences (dyadic grid, Halton, points
//!   accumulating at a target, designs with an empty ball).
//! - [`solver`]: truncated eigendecomposition of the Gram matrix, weights,
//!   variance, Lebesgue constant and span norms.
//! - [`extended`]: multi-precision nested Cholesky for severely
//!   ill-conditioned Gram matrices.
//! - [`functions`]: test functions with exact evaluation and spectral norms.
//! - [`gp`]: Gaussian path simulation with a counter-keyed generator.
//! - [`experiments`]: convergence curves along nested designs.
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]

extern crate alloc;

pub mod designs;
pub mod error;
pub mod experiments;
pub mod extended;
pub mod functions;
pub mod gp;
pub mod kernels;
pub(crate) mod quadrature;
pub mod solver;
pub mod special;

pub use designs::{BoundingBox, Design};
pub use error::{Error, Result};
pub use experiments::{CurveRecord, Precision};
pub use functions::TestFunction;
pub use kernels::{Covariance, Kernel, RadialGrid, SpectralReport};
pub use solver::{GramSystem, Prediction, DEFAULT_TRUNCATION_TOL};

/// Euclidean distance between two points of equal dimension.
#[inline]
pub(crate) fn distance(x: &[f64], y: &[f64]) -> f64 {
    libm::sqrt(x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum())
}
