//! Stationary covariance functions and their spectral densities.
//!
//! Spectral densities use the convention
//! `k(h) = (2 pi)^{-d} \int S(u) e^{i <u, h>} du`, i.e. `S` is the plain
//! Fourier transform of `k` without normalising constants. With this
//! convention the RKHS norm of `f` reads
//! `(2 pi)^{-d} \int |f~(u)|^2 / S(u) du`.

use core::f64::consts::{LN_2, PI};

use crate::error::{Error, Result};
use crate::special::{ln_bessel_k, ln_gamma};

/// Covariance family together with its shape parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Covariance {
    /// `exp(-alpha |h|^2)`
    Gaussian { alpha: f64 },
    /// `exp(-alpha |h|^beta)`, `0 < beta < 2`
    Exponential { alpha: f64, beta: f64 },
    /// Matérn with smoothness `nu` and range `rho`, unit value at zero lag.
    Matern { nu: f64, rho: f64 },
}

impl Covariance {
    pub fn family_name(&self) -> &'static str {
        match self {
            Covariance::Gaussian { .. } => "gaussian",
            Covariance::Exponential { .. } => "exponential",
            Covariance::Matern { .. } => "matern",
        }
    }
}

/// A stationary covariance `k(x, y) = s2 * rho(|x - y|)` on `R^dim`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Kernel {
    covariance: Covariance,
    s2: f64,
    dim: usize,
}

fn positive(name: &'static str, value: f64) -> Result<()> {
    if value.is_finite() && value > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value,
            expected: "a finite positive real",
        })
    }
}

impl Kernel {
    pub fn new(covariance: Covariance, s2: f64, dim: usize) -> Result<Self> {
        positive("s2", s2)?;
        if dim == 0 {
            return Err(Error::InvalidParameter {
                name: "dim",
                value: 0.0,
                expected: "a positive integer",
            });
        }
        match covariance {
            Covariance::Gaussian { alpha } => positive("alpha", alpha)?,
            Covariance::Exponential { alpha, beta } => {
                positive("alpha", alpha)?;
                if !(beta > 0.0 && beta < 2.0) {
                    return Err(Error::InvalidParameter {
                        name: "beta",
                        value: beta,
                        expected: "a real in (0, 2)",
                    });
                }
            }
            Covariance::Matern { nu, rho } => {
                positive("nu", nu)?;
                positive("rho", rho)?;
            }
        }
        Ok(Kernel {
            covariance,
            s2,
            dim,
        })
    }

    pub fn gaussian(s2: f64, alpha: f64, dim: usize) -> Result<Self> {
        Self::new(Covariance::Gaussian { alpha }, s2, dim)
    }

    pub fn exponential(s2: f64, alpha: f64, beta: f64, dim: usize) -> Result<Self> {
        Self::new(Covariance::Exponential { alpha, beta }, s2, dim)
    }

    pub fn matern(s2: f64, nu: f64, rho: f64, dim: usize) -> Result<Self> {
        Self::new(Covariance::Matern { nu, rho }, s2, dim)
    }

    pub fn covariance(&self) -> Covariance {
        self.covariance
    }

    pub fn family_name(&self) -> &'static str {
        self.covariance.family_name()
    }

    /// Variance scale `s^2 = k(x, x)`.
    pub fn s2(&self) -> f64 {
        self.s2
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Same covariance shape with a different variance scale.
    pub fn with_s2(&self, s2: f64) -> Result<Self> {
        Self::new(self.covariance, s2, self.dim)
    }

    pub(crate) fn check_dim(&self, found: usize) -> Result<()> {
        if found == self.dim {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: self.dim,
                found,
            })
        }
    }

    /// Covariance at Euclidean lag `r >= 0`.
    pub fn at_distance(&self, r: f64) -> f64 {
        if r == 0.0 {
            return self.s2;
        }
        let v = match self.covariance {
            Covariance::Gaussian { alpha } => libm::exp(-alpha * r * r),
            Covariance::Exponential { alpha, beta } => libm::exp(-alpha * libm::pow(r, beta)),
            Covariance::Matern { nu, rho } => matern_correlation(nu, rho, r),
        };
        self.s2 * v
    }

    pub fn eval(&self, x: &[f64], y: &[f64]) -> Result<f64> {
        self.check_dim(x.len())?;
        self.check_dim(y.len())?;
        Ok(self.eval_unchecked(x, y))
    }

    #[inline]
    pub(crate) fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        self.at_distance(crate::distance(x, y))
    }

    /// `ln S(u)` as a function of `|u|`.
    pub fn ln_spectral_density_radial(&self, norm_u: f64) -> Result<f64> {
        let d = self.dim as f64;
        let u2 = norm_u * norm_u;
        let ln_s2 = libm::log(self.s2);
        match self.covariance {
            Covariance::Gaussian { alpha } => {
                Ok(ln_s2 + 0.5 * d * libm::log(PI / alpha) - u2 / (4.0 * alpha))
            }
            Covariance::Exponential { alpha, beta } => {
                if beta != 1.0 {
                    return Err(Error::UnsupportedFamily(
                        "no closed-form spectral density for the exponential covariance with beta != 1",
                    ));
                }
                let half = 0.5 * (d + 1.0);
                Ok(ln_s2 + d * LN_2 + 0.5 * (d - 1.0) * libm::log(PI) + ln_gamma(half)
                    + libm::log(alpha)
                    - half * libm::log(alpha * alpha + u2))
            }
            Covariance::Matern { nu, rho } => {
                let kappa2 = 2.0 * nu / (rho * rho);
                let p = nu + 0.5 * d;
                Ok(ln_s2 + d * LN_2 + 0.5 * d * libm::log(PI) + ln_gamma(p) - ln_gamma(nu)
                    + nu * libm::log(kappa2)
                    - p * libm::log(kappa2 + u2))
            }
        }
    }

    pub fn spectral_density_radial(&self, norm_u: f64) -> Result<f64> {
        self.ln_spectral_density_radial(norm_u).map(libm::exp)
    }

    pub fn spectral_density(&self, u: &[f64]) -> Result<f64> {
        self.check_dim(u.len())?;
        let norm = libm::sqrt(u.iter().map(|v| v * v).sum());
        self.spectral_density_radial(norm)
    }

    /// Grid check of `S(u) (1 + |u|^r) >= C > 0`.
    pub fn check_polynomial_minorant(&self, r: u32, grid: &RadialGrid) -> Result<SpectralReport> {
        grid.validate()?;
        let mut c_estimate = f64::INFINITY;
        let mut prev_decade = f64::INFINITY;
        let mut last_decade = f64::INFINITY;
        let prev_start = grid.u_max / 100.0;
        let last_start = grid.u_max / 10.0;
        for u in grid.iter() {
            let g = libm::exp(self.ln_spectral_density_radial(u)? + ln_one_plus_pow(u, r));
            c_estimate = c_estimate.min(g);
            if u >= last_start {
                last_decade = last_decade.min(g);
            } else if u >= prev_start {
                prev_decade = prev_decade.min(g);
            }
        }
        let tail_ratio = if prev_decade > 0.0 {
            last_decade / prev_decade
        } else {
            0.0
        };
        let satisfied = c_estimate > 0.0 && tail_ratio >= 1.0 - grid.refinement_tol;
        Ok(SpectralReport {
            r,
            c_estimate,
            satisfied,
            tail_ratio,
            grid: *grid,
        })
    }

    /// Smallest `r <= r_max` passing [`Kernel::check_polynomial_minorant`].
    pub fn min_poly_order(&self, r_max: u32, grid: &RadialGrid) -> Result<Option<u32>> {
        for r in 0..=r_max {
            if self.check_polynomial_minorant(r, grid)?.satisfied {
                return Ok(Some(r));
            }
        }
        Ok(None)
    }
}

/// `ln(1 + u^r)` without overflow for large `u^r`.
fn ln_one_plus_pow(u: f64, r: u32) -> f64 {
    let ln_p = r as f64 * libm::log(u);
    if ln_p > 0.0 {
        ln_p + libm::log1p(libm::exp(-ln_p))
    } else {
        libm::log1p(libm::exp(ln_p))
    }
}

/// `2^{1-nu}/Gamma(nu) z^nu K_nu(z)` with `z = sqrt(2 nu) r / rho`.
fn matern_correlation(nu: f64, rho: f64, r: f64) -> f64 {
    let z = libm::sqrt(2.0 * nu) * r / rho;
    let ln_v = (1.0 - nu) * LN_2 - ln_gamma(nu) + nu * libm::log(z) + ln_bessel_k(nu, z);
    libm::exp(ln_v).min(1.0)
}

/// Geometric grid of `|u|` values used by the polynomial-minorant check.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RadialGrid {
    pub points: usize,
    pub u_min: f64,
    pub u_max: f64,
    /// Allowed relative drop of the minimum between the last two decades.
    pub refinement_tol: f64,
}

impl Default for RadialGrid {
    fn default() -> Self {
        RadialGrid {
            points: 4096,
            u_min: 1.0e-3,
            u_max: 1.0e4,
            refinement_tol: 0.01,
        }
    }
}

impl RadialGrid {
    fn validate(&self) -> Result<()> {
        positive("u_min", self.u_min)?;
        if !(self.u_max >= 100.0 * self.u_min) || !self.u_max.is_finite() {
            return Err(Error::InvalidParameter {
                name: "u_max",
                value: self.u_max,
                expected: "at least two decades above u_min",
            });
        }
        if self.points < 16 {
            return Err(Error::InvalidParameter {
                name: "points",
                value: self.points as f64,
                expected: "at least 16 grid points",
            });
        }
        Ok(())
    }

    pub fn iter(&self) -> impl Iterator<Item = f64> + '_ {
        let ln_a = libm::log(self.u_min);
        let step = (libm::log(self.u_max) - ln_a) / (self.points - 1) as f64;
        (0..self.points).map(move |i| {
            if i + 1 == self.points {
                self.u_max
            } else {
                libm::exp(ln_a + step * i as f64)
            }
        })
    }
}

/// Outcome of [`Kernel::check_polynomial_minorant`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralReport {
    pub r: u32,
    /// Minimum of `S(u) (1 + |u|^r)` over the grid.
    pub c_estimate: f64,
    pub satisfied: bool,
    /// Minimum over the last grid decade divided by the minimum over the one before.
    pub tail_ratio: f64,
    pub grid: RadialGrid,
}
