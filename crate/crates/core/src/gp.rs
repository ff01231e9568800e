//! Gaussian sample paths and Monte Carlo checks of the conditional-mean
//! identity `E[xi(x) | xi(x_1..x_n)] = sum_i lambda_i xi(x_i)`.
//!
//! Path `p` is drawn from a ChaCha8 stream keyed by `(seed, p)`; the `j`-th
//! standard normal of that stream feeds point `j`. Paths are therefore
//! independent of the order in which they are generated.

use alloc::vec;
use alloc::vec::Vec;

use nalgebra::{Cholesky, DMatrix};
use rand_chacha::ChaCha8Rng;
use rand_core::SeedableRng;
use rand_distr::{Distribution, StandardNormal};

use crate::designs::Design;
use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::solver::{gram_matrix, GramSystem, DEFAULT_TRUNCATION_TOL};

/// Diagonal jitter tried in order, relative to `s2`.
const JITTER_SCHEDULE: [f64; 14] = [
    0.0, 1e-16, 1e-15, 1e-14, 1e-13, 1e-12, 1e-11, 1e-10, 1e-9, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4,
];

/// Square-root factor of the covariance matrix of a fixed point set.
#[derive(Debug, Clone)]
pub struct PathSampler {
    points: Design,
    factor: DMatrix<f64>,
    jitter: f64,
    seed: u64,
}

impl PathSampler {
    pub fn new(kernel: &Kernel, points: &Design, seed: u64) -> Result<Self> {
        kernel.check_dim(points.dim())?;
        if let Some((first, second)) = points.find_duplicate() {
            return Err(Error::DuplicatePoint { first, second });
        }
        let k = gram_matrix(kernel, points);
        if k.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFiniteKernel);
        }
        for rel in JITTER_SCHEDULE {
            let jitter = rel * kernel.s2();
            let mut m = k.clone();
            for i in 0..m.nrows() {
                m[(i, i)] += jitter;
            }
            if let Some(c) = Cholesky::new(m) {
                return Ok(PathSampler {
                    points: points.clone(),
                    factor: c.unpack(),
                    jitter,
                    seed,
                });
            }
        }
        Err(Error::Factorization(alloc::format!(
            "covariance of {} points is not positive definite even with jitter 1e-4 * s2",
            points.len()
        )))
    }

    pub fn points(&self) -> &Design {
        &self.points
    }

    pub fn jitter_used(&self) -> f64 {
        self.jitter
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    /// Writes path `path_id` at every point into `out`.
    ///
    /// # Panics
    /// If `out.len()` differs from the number of points.
    pub fn sample_path(&self, path_id: u64, out: &mut [f64]) {
        let n = self.points.len();
        assert_eq!(out.len(), n, "output buffer has the wrong length");
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(path_id);
        let z: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
        for (i, o) in out.iter_mut().enumerate() {
            *o = (0..=i).map(|j| self.factor[(i, j)] * z[j]).sum();
        }
    }

    /// Wraps externally generated rows (path-major) into an ensemble.
    pub fn into_ensemble(self, n_paths: usize, values: Vec<f64>) -> Result<PathEnsemble> {
        if values.len() != n_paths * self.points.len() {
            return Err(Error::LengthMismatch {
                expected: n_paths * self.points.len(),
                found: values.len(),
            });
        }
        Ok(PathEnsemble {
            points: self.points,
            n_paths,
            values,
            seed: self.seed,
            jitter_used: self.jitter,
        })
    }

    /// Generates `n_paths` paths sequentially.
    pub fn ensemble(self, n_paths: usize) -> Result<PathEnsemble> {
        let m = self.points.len();
        let mut values = vec![0.0; n_paths * m];
        if m > 0 {
            for (p, row) in values.chunks_exact_mut(m).enumerate() {
                self.sample_path(p as u64, row);
            }
        }
        self.into_ensemble(n_paths, values)
    }
}

/// Jointly Gaussian draws at a fixed point set, one row per path.
#[derive(Debug, Clone, PartialEq)]
pub struct PathEnsemble {
    pub points: Design,
    pub n_paths: usize,
    /// Row-major `n_paths x points.len()`.
    pub values: Vec<f64>,
    pub seed: u64,
    pub jitter_used: f64,
}

impl PathEnsemble {
    pub fn n_points(&self) -> usize {
        self.points.len()
    }

    pub fn path(&self, p: usize) -> &[f64] {
        let m = self.n_points();
        &self.values[p * m..(p + 1) * m]
    }

    pub fn value(&self, path: usize, point: usize) -> f64 {
        self.values[path * self.n_points() + point]
    }

    pub fn sample_mean(&self, point: usize) -> f64 {
        (0..self.n_paths).map(|p| self.value(p, point)).sum::<f64>() / self.n_paths as f64
    }

    /// Unbiased sample covariance between two points.
    pub fn sample_covariance(&self, i: usize, j: usize) -> f64 {
        let (mi, mj) = (self.sample_mean(i), self.sample_mean(j));
        let s: f64 = (0..self.n_paths)
            .map(|p| (self.value(p, i) - mi) * (self.value(p, j) - mj))
            .sum();
        s / (self.n_paths as f64 - 1.0)
    }
}

/// `n_paths` draws of the centered process with covariance `kernel` at `points`.
pub fn sample_paths(kernel: &Kernel, points: &Design, n_paths: usize, seed: u64) -> Result<PathEnsemble> {
    check_paths(n_paths)?;
    PathSampler::new(kernel, points, seed)?.ensemble(n_paths)
}

fn check_paths(n_paths: usize) -> Result<()> {
    if n_paths < 2 {
        return Err(Error::InvalidParameter {
            name: "n_paths",
            value: n_paths as f64,
            expected: "at least 2 paths",
        });
    }
    Ok(())
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn covariance(a: &[f64], b: &[f64]) -> f64 {
    let (ma, mb) = (mean(a), mean(b));
    a.iter().zip(b).map(|(x, y)| (x - ma) * (y - mb)).sum::<f64>() / (a.len() as f64 - 1.0)
}

/// Residual statistics of `r = xi(x) - sum_i lambda_i xi(x_i)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ConditionalMeanReport {
    pub n_paths: usize,
    /// Kriging variance from the solver.
    pub sigma2: f64,
    pub residual_mean: f64,
    pub residual_variance: f64,
    /// Sample `cov(r, xi(x_i))` for each design point.
    pub covariances: Vec<f64>,
    pub mean_tol: f64,
    pub covariance_tol: Vec<f64>,
    pub variance_tol: f64,
    pub jitter_used: f64,
    pub passed: bool,
}

/// Floor added to every tolerance to absorb jitter and rounding.
fn noise_floor(kernel: &Kernel, jitter: f64, weights: &[f64]) -> f64 {
    let w2: f64 = weights.iter().map(|w| w * w).sum();
    1e-10 * kernel.s2() + 4.0 * jitter * (1.0 + w2)
}

/// Evaluates the conditional-mean statistics on an ensemble drawn at
/// `design ∪ {x}` (as built by [`Design::with_point`]).
pub fn conditional_mean_report(
    kernel: &Kernel,
    design: &Design,
    x: &[f64],
    ensemble: &PathEnsemble,
) -> Result<ConditionalMeanReport> {
    let (union, target) = design.with_point(x)?;
    if ensemble.points != union {
        return Err(Error::Precondition(
            "ensemble points differ from the design with the target appended".into(),
        ));
    }
    check_paths(ensemble.n_paths)?;
    let system = GramSystem::build(kernel, design, DEFAULT_TRUNCATION_TOL)?;
    let pred = system.kriging_weights(x)?;
    let n = design.len();
    let residuals: Vec<f64> = (0..ensemble.n_paths)
        .map(|p| {
            let row = ensemble.path(p);
            row[target] - pred.weights.iter().zip(&row[..n]).map(|(w, v)| w * v).sum::<f64>()
        })
        .collect();
    let columns: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..ensemble.n_paths).map(|p| ensemble.value(p, i)).collect())
        .collect();

    let root_n = libm::sqrt(ensemble.n_paths as f64);
    let floor = noise_floor(kernel, ensemble.jitter_used, &pred.weights);
    let sigma2 = pred.variance;
    let residual_mean = mean(&residuals);
    let residual_variance = covariance(&residuals, &residuals);
    let covariances: Vec<f64> = columns.iter().map(|c| covariance(&residuals, c)).collect();

    let mean_tol = 4.0 * libm::sqrt(sigma2 + floor) / root_n;
    // K_ii = s2 for every point of a stationary kernel
    let covariance_tol = vec![4.0 * libm::sqrt((sigma2 + floor) * kernel.s2()) / root_n + floor; n];
    let variance_tol = 0.05 * sigma2 + floor;

    let passed = libm::fabs(residual_mean) <= mean_tol
        && covariances
            .iter()
            .zip(&covariance_tol)
            .all(|(c, t)| libm::fabs(*c) <= *t)
        && libm::fabs(residual_variance - sigma2) <= variance_tol;

    Ok(ConditionalMeanReport {
        n_paths: ensemble.n_paths,
        sigma2,
        residual_mean,
        residual_variance,
        covariances,
        mean_tol,
        covariance_tol,
        variance_tol,
        jitter_used: ensemble.jitter_used,
        passed,
    })
}

/// Simulates at `design ∪ {x}` and checks the residual statistics.
pub fn conditional_mean_check(
    kernel: &Kernel,
    design: &Design,
    x: &[f64],
    n_paths: usize,
    seed: u64,
) -> Result<ConditionalMeanReport> {
    let (union, _) = design.with_point(x)?;
    let ensemble = sample_paths(kernel, &union, n_paths, seed)?;
    conditional_mean_report(kernel, design, x, &ensemble)
}

/// Ensemble quantities at one design size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MartingaleRecord {
    pub n: usize,
    pub sigma2: f64,
    /// Empirical `E[(xi_hat_n - xi(x))^2]`.
    pub mse: f64,
    /// Empirical `E[xi_hat_n^2]`.
    pub second_moment: f64,
    /// Fraction of paths with `|xi_hat_n - xi(x)| > 0.1 s`.
    pub exceed_coarse: f64,
    /// Fraction of paths with `|xi_hat_n - xi(x)| > 0.01 s`.
    pub exceed_fine: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct MartingaleReport {
    pub records: Vec<MartingaleRecord>,
    /// Row-major `n_paths x n_list.len()` predictor values.
    pub trajectories: Vec<f64>,
    /// `xi(x)` per path.
    pub truth: Vec<f64>,
    pub n_paths: usize,
    pub jitter_used: f64,
    pub mse_tracks_sigma2: bool,
    pub exceedance_non_increasing: bool,
    pub l2_bounded: bool,
}

impl MartingaleReport {
    pub fn passed(&self) -> bool {
        self.mse_tracks_sigma2 && self.exceedance_non_increasing && self.l2_bounded
    }
}

/// Predictor trajectories `n -> sum_i lambda_i(x; x_n) xi(x_i)` for `n` in `n_list`.
///
/// `ensemble` must be drawn at `design.prefix(max n) ∪ {x}`.
pub fn martingale_report(
    kernel: &Kernel,
    design: &Design,
    x: &[f64],
    n_list: &[usize],
    ensemble: &PathEnsemble,
) -> Result<MartingaleReport> {
    let n_max = n_list.iter().copied().max().ok_or_else(|| Error::Precondition("n_list is empty".into()))?;
    if n_max > design.len() {
        return Err(Error::Precondition(alloc::format!(
            "n = {n_max} exceeds the design size {}",
            design.len()
        )));
    }
    let base = design.prefix(n_max);
    let (union, target) = base.with_point(x)?;
    if ensemble.points != union {
        return Err(Error::Precondition(
            "ensemble points differ from the design with the target appended".into(),
        ));
    }
    check_paths(ensemble.n_paths)?;
    let n_paths = ensemble.n_paths;
    let nf = n_paths as f64;
    let s = libm::sqrt(kernel.s2());
    let truth: Vec<f64> = (0..n_paths).map(|p| ensemble.value(p, target)).collect();
    let mut trajectories = vec![0.0; n_paths * n_list.len()];
    let mut records = Vec::with_capacity(n_list.len());
    let mut floors = Vec::with_capacity(n_list.len());
    for (k, &n) in n_list.iter().enumerate() {
        let pred = GramSystem::build(kernel, &base.prefix(n), DEFAULT_TRUNCATION_TOL)?.kriging_weights(x)?;
        let (mut sq_gap, mut sq_pred, mut coarse, mut fine) = (0.0, 0.0, 0usize, 0usize);
        for p in 0..n_paths {
            let row = ensemble.path(p);
            let v: f64 = pred.weights.iter().zip(&row[..n]).map(|(w, y)| w * y).sum();
            trajectories[p * n_list.len() + k] = v;
            let gap = v - truth[p];
            sq_gap += gap * gap;
            sq_pred += v * v;
            coarse += usize::from(libm::fabs(gap) > 0.1 * s);
            fine += usize::from(libm::fabs(gap) > 0.01 * s);
        }
        floors.push(noise_floor(kernel, ensemble.jitter_used, &pred.weights));
        records.push(MartingaleRecord {
            n,
            sigma2: pred.variance,
            mse: sq_gap / nf,
            second_moment: sq_pred / nf,
            exceed_coarse: coarse as f64 / nf,
            exceed_fine: fine as f64 / nf,
        });
    }

    let mse_tracks_sigma2 = records
        .iter()
        .zip(&floors)
        .all(|(r, f)| libm::fabs(r.mse - r.sigma2) <= 0.05 * r.sigma2 + f);
    let fraction_noise = |p: f64| 4.0 * libm::sqrt(p * (1.0 - p) / nf) + 1.0 / nf;
    let exceedance_non_increasing = records.windows(2).all(|w| {
        w[1].exceed_coarse <= w[0].exceed_coarse + fraction_noise(w[0].exceed_coarse)
            && w[1].exceed_fine <= w[0].exceed_fine + fraction_noise(w[0].exceed_fine)
    });
    let l2_tol = 4.0 * kernel.s2() * libm::sqrt(2.0 / nf);
    let l2_bounded = records
        .iter()
        .zip(&floors)
        .all(|(r, f)| r.second_moment <= kernel.s2() + l2_tol + f);

    Ok(MartingaleReport {
        records,
        trajectories,
        truth,
        n_paths,
        jitter_used: ensemble.jitter_used,
        mse_tracks_sigma2,
        exceedance_non_increasing,
        l2_bounded,
    })
}

/// Simulates at `design.prefix(max n) ∪ {x}` and evaluates [`martingale_report`].
pub fn martingale_experiment(
    kernel: &Kernel,
    design: &Design,
    x: &[f64],
    n_list: &[usize],
    n_paths: usize,
    seed: u64,
) -> Result<MartingaleReport> {
    let n_max = n_list.iter().copied().max().unwrap_or(0).min(design.len());
    let (union, _) = design.prefix(n_max).with_point(x)?;
    let ensemble = sample_paths(kernel, &union, n_paths, seed)?;
    martingale_report(kernel, design, x, n_list, &ensemble)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::designs::{grid_sequence, BoundingBox};

    fn line(xs: &[f64]) -> Design {
        Design::from_coords(1, xs.to_vec()).unwrap()
    }

    #[test]
    fn single_point_variance() {
        let k = Kernel::matern(2.0, 1.5, 1.0, 1).unwrap();
        let e = sample_paths(&k, &line(&[0.3]), 100_000, 11).unwrap();
        assert!(libm::fabs(e.sample_covariance(0, 0) - 2.0) < 0.03 * 2.0);
        assert_eq!(e.jitter_used, 0.0);
    }

    #[test]
    fn seeded_runs_are_identical_and_order_free() {
        let k = Kernel::exponential(1.0, 2.0, 1.0, 1).unwrap();
        let d = line(&[0.0, 0.2, 0.7]);
        let a = sample_paths(&k, &d, 50, 5).unwrap();
        let b = sample_paths(&k, &d, 50, 5).unwrap();
        assert!(a.values.iter().zip(&b.values).all(|(p, q)| p.to_bits() == q.to_bits()));
        let sampler = PathSampler::new(&k, &d, 5).unwrap();
        let mut row = [0.0; 3];
        sampler.sample_path(37, &mut row);
        assert_eq!(row, a.path(37));
        let c = sample_paths(&k, &d, 50, 6).unwrap();
        assert_ne!(a.values, c.values);
    }

    #[test]
    fn duplicates_rejected() {
        let k = Kernel::gaussian(1.0, 1.0, 1).unwrap();
        assert_eq!(
            sample_paths(&k, &line(&[0.1, 0.1]), 10, 0).unwrap_err(),
            Error::DuplicatePoint { first: 0, second: 1 }
        );
        assert!(sample_paths(&k, &line(&[0.1]), 1, 0).is_err());
    }

    #[test]
    fn gaussian_two_point_residual_variance() {
        let k = Kernel::gaussian(1.0, 1.0, 1).unwrap();
        let r = conditional_mean_check(&k, &line(&[0.0, 1.0]), &[0.5], 100_000, 3).unwrap();
        let exact = 1.0 - 2.0 * libm::exp(-0.5) / (1.0 + libm::exp(-1.0));
        assert!(libm::fabs(r.sigma2 - exact) < 1e-12);
        assert!(libm::fabs(r.residual_variance - exact) < 0.05 * exact);
        assert!(r.passed, "{r:?}");
    }

    #[test]
    fn target_on_a_node_gives_zero_residual() {
        let k = Kernel::matern(1.0, 2.5, 0.5, 1).unwrap();
        let r = conditional_mean_check(&k, &line(&[0.0, 0.4, 1.0]), &[0.4], 1000, 1).unwrap();
        assert_eq!(r.residual_variance, 0.0);
        assert_eq!(r.residual_mean, 0.0);
        assert!(r.passed);
    }

    #[test]
    fn martingale_on_a_grid() {
        let k = Kernel::matern(1.0, 1.5, 1.0, 1).unwrap();
        let d = grid_sequence(&BoundingBox::unit(1), 64).unwrap();
        let m = martingale_experiment(&k, &d, &[1.0 / 3.0], &[4, 16, 64], 20_000, 9).unwrap();
        assert!(m.passed(), "{:?}", m.records);
        assert!(m.records.windows(2).all(|w| w[1].mse < w[0].mse));
    }

    #[test]
    fn martingale_freezes_once_the_target_is_hit() {
        let k = Kernel::exponential(1.0, 1.0, 1.0, 1).unwrap();
        let d = grid_sequence(&BoundingBox::unit(1), 16).unwrap();
        let m = martingale_experiment(&k, &d, &[0.5], &[1, 4, 16], 500, 2).unwrap();
        for p in 0..m.n_paths {
            let t = &m.trajectories[p * 3..p * 3 + 3];
            assert_eq!(t[0], t[1]);
            assert_eq!(t[1], t[2]);
            assert_eq!(t[2], m.truth[p]);
        }
    }
}
