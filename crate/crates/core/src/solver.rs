//! Kriging weights, kriging variance and Lebesgue constants.
//!
//! The Gram matrix `K = [k(x_i, x_j)]` is factorised by a full symmetric
//! eigendecomposition. Eigenvalues below `truncation_tol * lambda_max` are
//! dropped from the pseudo-inverse, which projects `k(x, .)` onto a subspace
//! of `H_n`. The reported variance is therefore an upper bound on the exact
//! one, and dropping more directions can only increase it.

use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::designs::Design;
use crate::error::{Error, Result};
use crate::kernels::Kernel;

pub const DEFAULT_TRUNCATION_TOL: f64 = 1.0e-12;

/// Pre-clamp variances below `-NEGATIVE_VARIANCE_WARN * s2` are logged.
const NEGATIVE_VARIANCE_WARN: f64 = 1.0e-8;

/// Factorised Gram system of a kernel on a design.
#[derive(Debug, Clone)]
pub struct GramSystem {
    kernel: Kernel,
    design: Design,
    /// Descending.
    eigenvalues: Vec<f64>,
    /// Columns match `eigenvalues`.
    eigenvectors: DMatrix<f64>,
    truncation_tol: f64,
    effective_rank: usize,
    condition_estimate: f64,
}

/// Gram matrix of `kernel` on the points of `design`.
pub fn gram_matrix(kernel: &Kernel, design: &Design) -> DMatrix<f64> {
    let n = design.len();
    let mut k = DMatrix::zeros(n, n);
    for i in 0..n {
        k[(i, i)] = kernel.s2();
        for j in 0..i {
            let v = kernel.eval_unchecked(design.point(i), design.point(j));
            k[(i, j)] = v;
            k[(j, i)] = v;
        }
    }
    k
}

impl GramSystem {
    pub fn build(kernel: &Kernel, design: &Design, truncation_tol: f64) -> Result<Self> {
        kernel.check_dim(design.dim())?;
        if !(0.0..1.0).contains(&truncation_tol) {
            return Err(Error::InvalidParameter {
                name: "truncation_tol",
                value: truncation_tol,
                expected: "a real in [0, 1)",
            });
        }
        if let Some((first, second)) = design.find_duplicate() {
            return Err(Error::DuplicatePoint { first, second });
        }
        let n = design.len();
        let k = gram_matrix(kernel, design);
        if k.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteKernel);
        }
        let (eigenvalues, eigenvectors) = if n == 0 {
            (Vec::new(), DMatrix::zeros(0, 0))
        } else {
            let eig = SymmetricEigen::new(k);
            let mut order: Vec<usize> = (0..n).collect();
            order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
            let values = order.iter().map(|&i| eig.eigenvalues[i]).collect();
            let vectors = DMatrix::from_fn(n, n, |r, c| eig.eigenvectors[(r, order[c])]);
            (values, vectors)
        };
        let lambda_max = eigenvalues.first().copied().unwrap_or(0.0);
        let threshold = truncation_tol * lambda_max;
        let effective_rank = eigenvalues
            .iter()
            .take_while(|&&e| e > 0.0 && e >= threshold)
            .count();
        let condition_estimate = if effective_rank == 0 {
            1.0
        } else {
            lambda_max / eigenvalues[effective_rank - 1]
        };
        Ok(GramSystem {
            kernel: *kernel,
            design: design.clone(),
            eigenvalues,
            eigenvectors,
            truncation_tol,
            effective_rank,
            condition_estimate,
        })
    }

    pub fn kernel(&self) -> &Kernel {
        &self.kernel
    }

    pub fn design(&self) -> &Design {
        &self.design
    }

    pub fn len(&self) -> usize {
        self.design.len()
    }

    pub fn is_empty(&self) -> bool {
        self.design.is_empty()
    }

    /// All eigenvalues of `K`, descending (including discarded ones).
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    pub fn truncation_tol(&self) -> f64 {
        self.truncation_tol
    }

    pub fn effective_rank(&self) -> usize {
        self.effective_rank
    }

    /// `lambda_max / lambda_min` over the retained eigenvalues.
    pub fn condition_estimate(&self) -> f64 {
        self.condition_estimate
    }

    pub fn is_truncated(&self) -> bool {
        self.effective_rank < self.len()
    }

    /// `(k(x, x_1), ..., k(x, x_n))`.
    pub fn cross_covariances(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.kernel.check_dim(x.len())?;
        Ok(self
            .design
            .points()
            .map(|p| self.kernel.eval_unchecked(x, p))
            .collect())
    }

    /// Weights, variance and Lebesgue constant at `x`.
    pub fn kriging_weights(&self, x: &[f64]) -> Result<Prediction> {
        let kx = self.cross_covariances(x)?;
        let n = self.len();
        let kxx = self.kernel.s2();
        let truncated = self.is_truncated();
        if let Some(j) = self.design.position(x) {
            let mut weights = alloc::vec![0.0; n];
            weights[j] = 1.0;
            let variance = kxx - kx[j];
            return Ok(Prediction {
                x: x.to_vec(),
                weights,
                variance,
                preclamp_variance: variance,
                lebesgue: 1.0,
                truncated,
                effective_rank: self.effective_rank,
            });
        }
        let kx_vec = DVector::from_vec(kx);
        let mut weights = DVector::zeros(n);
        let mut explained = 0.0;
        for i in 0..self.effective_rank {
            let v = self.eigenvectors.column(i);
            let a = v.dot(&kx_vec);
            let c = a / self.eigenvalues[i];
            explained += a * c;
            weights.axpy(c, &v, 1.0);
        }
        let preclamp = kxx - explained;
        if preclamp < -NEGATIVE_VARIANCE_WARN * kxx {
            log::warn!("kriging variance {preclamp:e} clamped to 0 (n = {n})");
        }
        let weights: Vec<f64> = weights.iter().copied().collect();
        let lebesgue = lebesgue_constant(&weights);
        Ok(Prediction {
            x: x.to_vec(),
            weights,
            variance: preclamp.max(0.0),
            preclamp_variance: preclamp,
            lebesgue,
            truncated,
            effective_rank: self.effective_rank,
        })
    }

    pub fn kriging_variance(&self, x: &[f64]) -> Result<f64> {
        self.kriging_weights(x).map(|p| p.variance)
    }

    /// `d_H(k(x, .), H_n)` through the norm of the residual
    /// `k(x, .) - sum_i lambda_i k(x_i, .)`, evaluated as a quadratic form
    /// on the `n + 1` translates.
    pub fn rkhs_distance_to_span(&self, x: &[f64]) -> Result<f64> {
        self.kernel.check_dim(x.len())?;
        if self.design.position(x).is_some() {
            return Ok(0.0);
        }
        if self.is_empty() {
            return Ok(libm::sqrt(self.kernel.s2()));
        }
        let p = self.kriging_weights(x)?;
        let (augmented, target) = self.design.with_point(x)?;
        let mut coeffs: Vec<f64> = p.weights.iter().map(|w| -w).collect();
        coeffs.insert(target, 1.0);
        rkhs_norm_span(&self.kernel, &augmented, &coeffs)
    }
}

/// `sum_i |lambda_i|`.
pub fn lebesgue_constant(weights: &[f64]) -> f64 {
    weights.iter().map(|w| libm::fabs(*w)).sum()
}

/// `|| sum_i c_i k(x_i, .) ||_H = sqrt(c^T K c)`.
pub fn rkhs_norm_span(kernel: &Kernel, points: &Design, coeffs: &[f64]) -> Result<f64> {
    kernel.check_dim(points.dim())?;
    if coeffs.len() != points.len() {
        return Err(Error::LengthMismatch {
            expected: points.len(),
            found: coeffs.len(),
        });
    }
    let mut q = 0.0;
    for i in 0..points.len() {
        if coeffs[i] == 0.0 {
            continue;
        }
        let mut row = 0.5 * kernel.s2() * coeffs[i];
        for j in 0..i {
            row += kernel.eval_unchecked(points.point(i), points.point(j)) * coeffs[j];
        }
        q += 2.0 * coeffs[i] * row;
    }
    Ok(libm::sqrt(q.max(0.0)))
}

/// Kriging prediction at one target.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub x: Vec<f64>,
    /// `lambda^i(x; x_n)`
    pub weights: Vec<f64>,
    /// Clamped to `[0, inf)`.
    pub variance: f64,
    pub preclamp_variance: f64,
    /// `sum_i |lambda_i|`
    pub lebesgue: f64,
    pub truncated: bool,
    pub effective_rank: usize,
}

impl Prediction {
    /// `sum_i lambda_i f(x_i)`.
    pub fn predict(&self, samples: &[f64]) -> Result<f64> {
        if samples.len() != self.weights.len() {
            return Err(Error::LengthMismatch {
                expected: self.weights.len(),
                found: samples.len(),
            });
        }
        Ok(self.weights.iter().zip(samples).map(|(w, f)| w * f).sum())
    }

    pub fn lebesgue_constant(&self) -> f64 {
        self.lebesgue
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    fn gaussian() -> Kernel {
        Kernel::gaussian(1.0, 1.0, 1).unwrap()
    }

    fn two_points() -> Design {
        Design::from_coords(1, vec![0.0, 1.0]).unwrap()
    }

    fn close(a: f64, b: f64, tol: f64) -> bool {
        libm::fabs(a - b) <= tol * libm::fabs(b).max(1.0)
    }

    // Everything below against the explicit inverse of [[1, e^-1], [e^-1, 1]].
    #[test]
    fn two_point_gaussian_oracle() {
        let e1 = libm::exp(-1.0);
        let sys = GramSystem::build(&gaussian(), &two_points(), DEFAULT_TRUNCATION_TOL).unwrap();
        let ev = sys.eigenvalues();
        assert!(close(ev[0], 1.0 + e1, 1e-14) && close(ev[1], 1.0 - e1, 1e-14));
        assert_eq!(sys.effective_rank(), 2);

        let p = sys.kriging_weights(&[0.5]).unwrap();
        let w = libm::exp(-0.25) / (1.0 + e1);
        assert!(close(p.weights[0], w, 1e-14) && close(p.weights[1], w, 1e-14));
        let s2 = 1.0 - 2.0 * libm::exp(-0.5) / (1.0 + e1);
        assert!(close(p.variance, s2, 1e-14));
        assert!(close(p.lebesgue, 2.0 * w, 1e-14));
        assert!(close(p.predict(&[3.0, 3.0]).unwrap(), 6.0 * w, 1e-14));
        assert_eq!(p.predict(&[0.0, 0.0]).unwrap(), 0.0);
        let dist = sys.rkhs_distance_to_span(&[0.5]).unwrap();
        assert!(close(dist, libm::sqrt(s2), 1e-12));
    }

    #[test]
    fn nodes_get_unit_weights() {
        let sys = GramSystem::build(&gaussian(), &two_points(), DEFAULT_TRUNCATION_TOL).unwrap();
        let p = sys.kriging_weights(&[1.0]).unwrap();
        assert_eq!(p.weights, vec![0.0, 1.0]);
        assert_eq!(p.variance, 0.0);
        assert_eq!(p.lebesgue, 1.0);
        assert_eq!(sys.rkhs_distance_to_span(&[1.0]).unwrap(), 0.0);
    }

    #[test]
    fn single_point_is_scalar_projection() {
        let k = Kernel::matern(2.0, 1.5, 0.7, 1).unwrap();
        let d = Design::from_coords(1, vec![0.2]).unwrap();
        let sys = GramSystem::build(&k, &d, DEFAULT_TRUNCATION_TOL).unwrap();
        assert_eq!(sys.effective_rank(), 1);
        assert!(close(sys.eigenvalues()[0], 2.0, 1e-15));
        let p = sys.kriging_weights(&[0.9]).unwrap();
        let kx = k.eval(&[0.9], &[0.2]).unwrap();
        assert!(close(p.weights[0], kx / 2.0, 1e-14));
        assert!(p.lebesgue <= 1.0);
    }

    #[test]
    fn empty_design() {
        let k = Kernel::exponential(3.0, 1.0, 1.0, 2).unwrap();
        let d = Design::empty(crate::BoundingBox::unit(2));
        let sys = GramSystem::build(&k, &d, DEFAULT_TRUNCATION_TOL).unwrap();
        let p = sys.kriging_weights(&[0.3, 0.3]).unwrap();
        assert_eq!(p.variance, 3.0);
        assert!(p.weights.is_empty());
        assert_eq!(p.lebesgue, 0.0);
        assert!(close(sys.rkhs_distance_to_span(&[0.3, 0.3]).unwrap(), libm::sqrt(3.0), 1e-15));
    }

    #[test]
    fn gaussian_grid_of_40_is_numerically_rank_deficient() {
        let d = crate::designs::grid_sequence(&crate::BoundingBox::unit(1), 40).unwrap();
        let sys = GramSystem::build(&gaussian(), &d, DEFAULT_TRUNCATION_TOL).unwrap();
        assert!(sys.effective_rank() < 40);
        assert!(sys.is_truncated());
        let p = sys.kriging_weights(&[0.3]).unwrap();
        assert!(p.truncated);
    }

    #[test]
    fn construction_errors() {
        let d = Design::from_coords(1, vec![0.0, 0.5, 0.0]).unwrap();
        assert_eq!(
            GramSystem::build(&gaussian(), &d, 1e-12).unwrap_err(),
            Error::DuplicatePoint { first: 0, second: 2 }
        );
        assert!(GramSystem::build(&gaussian(), &two_points(), 1.0).is_err());
        assert!(GramSystem::build(&gaussian(), &two_points(), -0.1).is_err());
        let d2 = Design::from_coords(2, vec![0.0, 0.0]).unwrap();
        assert!(GramSystem::build(&gaussian(), &d2, 1e-12).is_err());
    }

    #[test]
    fn predict_length_mismatch() {
        let sys = GramSystem::build(&gaussian(), &two_points(), 1e-12).unwrap();
        let p = sys.kriging_weights(&[0.5]).unwrap();
        assert_eq!(
            p.predict(&[1.0]),
            Err(Error::LengthMismatch { expected: 2, found: 1 })
        );
    }

    #[test]
    fn span_norms() {
        let k = gaussian();
        let one = Design::from_coords(1, vec![0.4]).unwrap();
        assert!(close(rkhs_norm_span(&k, &one, &[1.0]).unwrap(), 1.0, 1e-15));
        assert_eq!(rkhs_norm_span(&k, &two_points(), &[0.0, 0.0]).unwrap(), 0.0);
        let want = libm::sqrt(2.0 - 2.0 * libm::exp(-1.0));
        assert!(close(rkhs_norm_span(&k, &two_points(), &[1.0, -1.0]).unwrap(), want, 1e-14));
        assert!(rkhs_norm_span(&k, &two_points(), &[1.0]).is_err());
    }
}
