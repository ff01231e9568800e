//! Test functions standing in for sample paths.
//!
//! The catalog has one representative per function class of interest:
//! finite kernel spans (in `H`), Gaussian bumps (rapidly decreasing), smooth
//! compactly supported bumps and a continuous, piecewise-linear triangle
//! wave.

use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use crate::designs::Design;
use crate::error::{Error, Result};
use crate::kernels::Kernel;
use crate::quadrature::integrate;

#[derive(Debug, Clone, PartialEq)]
pub enum TestFunction {
    /// `sum_i c_i k(y_i, .)`
    KernelSpan {
        kernel: Kernel,
        centers: Design,
        coeffs: Vec<f64>,
    },
    /// `height * exp(-|x - center|^2 / (2 width^2))`
    GaussianBump {
        center: Vec<f64>,
        width: f64,
        height: f64,
    },
    /// `height * exp(1 - 1 / (1 - t^2))` for `t = |x - center| / radius < 1`, else 0.
    MollifierBump {
        center: Vec<f64>,
        radius: f64,
        height: f64,
    },
    /// `slope * sum_j dist(x_j, period Z)`
    TriangleWave { slope: f64, period: f64, dim: usize },
}

fn check_positive(name: &'static str, v: f64) -> Result<()> {
    if v.is_finite() && v > 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter {
            name,
            value: v,
            expected: "a finite positive real",
        })
    }
}

impl TestFunction {
    pub fn kernel_span(kernel: Kernel, centers: Design, coeffs: Vec<f64>) -> Result<Self> {
        kernel.check_dim(centers.dim())?;
        if coeffs.len() != centers.len() {
            return Err(Error::LengthMismatch {
                expected: centers.len(),
                found: coeffs.len(),
            });
        }
        Ok(TestFunction::KernelSpan {
            kernel,
            centers,
            coeffs,
        })
    }

    pub fn gaussian_bump(center: Vec<f64>, width: f64, height: f64) -> Result<Self> {
        check_positive("width", width)?;
        if center.is_empty() || !height.is_finite() {
            return Err(Error::InvalidParameter {
                name: "gaussian_bump",
                value: height,
                expected: "a non-empty center and finite height",
            });
        }
        Ok(TestFunction::GaussianBump {
            center,
            width,
            height,
        })
    }

    pub fn mollifier_bump(center: Vec<f64>, radius: f64, height: f64) -> Result<Self> {
        check_positive("radius", radius)?;
        if center.is_empty() || !height.is_finite() {
            return Err(Error::InvalidParameter {
                name: "mollifier_bump",
                value: height,
                expected: "a non-empty center and finite height",
            });
        }
        Ok(TestFunction::MollifierBump {
            center,
            radius,
            height,
        })
    }

    pub fn triangle_wave(slope: f64, period: f64, dim: usize) -> Result<Self> {
        check_positive("period", period)?;
        if !slope.is_finite() || dim == 0 {
            return Err(Error::InvalidParameter {
                name: "slope",
                value: slope,
                expected: "a finite slope and positive dimension",
            });
        }
        Ok(TestFunction::TriangleWave { slope, period, dim })
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            TestFunction::KernelSpan { .. } => "kernel_span",
            TestFunction::GaussianBump { .. } => "gaussian_bump",
            TestFunction::MollifierBump { .. } => "mollifier_bump",
            TestFunction::TriangleWave { .. } => "continuous_nonsmooth",
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            TestFunction::KernelSpan { centers, .. } => centers.dim(),
            TestFunction::GaussianBump { center, .. } | TestFunction::MollifierBump { center, .. } => {
                center.len()
            }
            TestFunction::TriangleWave { dim, .. } => *dim,
        }
    }

    pub fn evaluate(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: x.len(),
            });
        }
        Ok(match self {
            TestFunction::KernelSpan {
                kernel,
                centers,
                coeffs,
            } => centers
                .points()
                .zip(coeffs)
                .map(|(y, c)| c * kernel.eval_unchecked(x, y))
                .sum(),
            TestFunction::GaussianBump {
                center,
                width,
                height,
            } => {
                let r = crate::distance(x, center);
                height * libm::exp(-r * r / (2.0 * width * width))
            }
            TestFunction::MollifierBump {
                center,
                radius,
                height,
            } => {
                let t = crate::distance(x, center) / radius;
                if t >= 1.0 {
                    0.0
                } else {
                    height * libm::exp(1.0 - 1.0 / (1.0 - t * t))
                }
            }
            TestFunction::TriangleWave { slope, period, .. } => x
                .iter()
                .map(|v| slope * libm::fabs(v - period * libm::round(v / period)))
                .sum(),
        })
    }

    /// Values at every design point.
    pub fn samples(&self, design: &Design) -> Result<Vec<f64>> {
        design.points().map(|p| self.evaluate(p)).collect()
    }

    /// `f~(u) = \int f(x) e^{-i <u, x>} dx` (gaussian bumps only).
    pub fn fourier_transform(&self, u: &[f64]) -> Result<Complex64> {
        match self {
            TestFunction::GaussianBump {
                center,
                width,
                height,
            } => {
                if u.len() != center.len() {
                    return Err(Error::DimensionMismatch {
                        expected: center.len(),
                        found: u.len(),
                    });
                }
                let d = center.len() as f64;
                let u2: f64 = u.iter().map(|v| v * v).sum();
                let modulus = height
                    * libm::pow(width * libm::sqrt(2.0 * PI), d)
                    * libm::exp(-0.5 * width * width * u2);
                let phase: f64 = -u.iter().zip(center).map(|(a, b)| a * b).sum::<f64>();
                Ok(Complex64::from_polar(modulus, phase))
            }
            other => Err(Error::UnsupportedFunction(other.kind_name())),
        }
    }

    /// `||f||_H^2 = (2 pi)^{-1} \int |f~(u)|^2 / S(u) du` in one dimension,
    /// integrated over dyadic blocks `[0, U], [U, 2U], [2U, 4U], ...` until a
    /// block adds less than `spec.tail_tol` of the running total.
    pub fn rkhs_norm_spectral(&self, kernel: &Kernel, spec: &QuadratureSpec) -> Result<SpectralNorm> {
        let TestFunction::GaussianBump { center, width, height } = self else {
            return Err(Error::UnsupportedFunction(self.kind_name()));
        };
        if center.len() != 1 || kernel.dim() != 1 {
            return Err(Error::DimensionMismatch {
                expected: 1,
                found: center.len().max(kernel.dim()),
            });
        }
        // validate the kernel family up front
        kernel.ln_spectral_density_radial(0.0)?;
        let w = *width;
        let ln_scale = 2.0 * libm::log(libm::fabs(*height)) + libm::log(2.0 * PI * w * w);
        let integrand = |u: f64| {
            let ln_s = kernel.ln_spectral_density_radial(u).unwrap_or(f64::NAN);
            libm::exp(ln_scale - w * w * u * u - ln_s)
        };
        let first = spec.initial_extent.unwrap_or(1.0 / w);
        check_positive("initial_extent", first)?;

        let mut total = 0.0;
        let mut error = 0.0;
        let mut a = 0.0;
        let mut b = first;
        for _ in 0..spec.max_blocks {
            let block = integrate(integrand, a, b, 0.0, spec.rel_tol);
            if !block.value.is_finite() {
                return Ok(SpectralNorm::divergent(b));
            }
            total += block.value;
            error += block.error;
            if block.value <= spec.tail_tol * total && a > 0.0 {
                let sq = total / PI;
                return Ok(SpectralNorm {
                    norm: libm::sqrt(sq),
                    tail_bound: (block.value + error) / PI,
                    extent: b,
                    divergent: false,
                });
            }
            a = b;
            b *= 2.0;
        }
        Ok(SpectralNorm::divergent(a))
    }
}

/// Controls for [`TestFunction::rkhs_norm_spectral`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub rel_tol: f64,
    /// Stop once a block contributes less than this fraction of the total.
    pub tail_tol: f64,
    /// First block is `[0, initial_extent]`; defaults to `1 / width`.
    pub initial_extent: Option<f64>,
    pub max_blocks: usize,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        QuadratureSpec {
            rel_tol: 1.0e-11,
            tail_tol: 1.0e-8,
            initial_extent: None,
            max_blocks: 60,
        }
    }
}

/// Result of the spectral RKHS norm quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectralNorm {
    /// `+inf` when the integral diverges (`f` not in `H`).
    pub norm: f64,
    /// Last block plus accumulated quadrature error, on the squared norm.
    pub tail_bound: f64,
    /// Upper end of the integrated range.
    pub extent: f64,
    pub divergent: bool,
}

impl SpectralNorm {
    fn divergent(extent: f64) -> Self {
        SpectralNorm {
            norm: f64::INFINITY,
            tail_bound: f64::INFINITY,
            extent,
            divergent: true,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn evaluation_examples() {
        let m = TestFunction::mollifier_bump(vec![2.0], 0.5, 1.0).unwrap();
        assert_eq!(m.evaluate(&[1.0]).unwrap(), 0.0);
        assert_eq!(m.evaluate(&[2.0]).unwrap(), 1.0);
        assert_eq!(m.evaluate(&[2.5]).unwrap(), 0.0);
        assert!(m.evaluate(&[2.499]).unwrap() > 0.0);
        let g = TestFunction::gaussian_bump(vec![0.0], 1.0, 1.0).unwrap();
        assert_eq!(g.evaluate(&[0.0]).unwrap(), 1.0);
        assert!(g.evaluate(&[0.0, 1.0]).is_err());
    }

    #[test]
    fn mollifier_is_exactly_zero_off_support() {
        let m = TestFunction::mollifier_bump(vec![0.0, 0.0], 0.3, 2.0).unwrap();
        for i in 0..200 {
            let t = i as f64 * 0.01;
            let v = m.evaluate(&[t, 0.0]).unwrap();
            if t >= 0.3 {
                assert_eq!(v.to_bits(), 0.0f64.to_bits());
            } else {
                assert!(v > 0.0);
            }
        }
    }

    #[test]
    fn gaussian_bump_decays_faster_than_polynomials() {
        let g = TestFunction::gaussian_bump(vec![0.5], 0.7, 2.0).unwrap();
        for n in 0..=3 {
            let sup = (0..4001)
                .map(|i| -200.0 + 0.1 * i as f64)
                .map(|x| g.evaluate(&[x]).unwrap() * libm::pow(1.0 + x * x, n as f64))
                .fold(0.0, f64::max);
            assert!(sup.is_finite() && sup < 1e3, "N = {n}: {sup}");
        }
    }

    #[test]
    fn triangle_wave_is_continuous() {
        let f = TestFunction::triangle_wave(2.0, 0.25, 1).unwrap();
        assert_eq!(f.evaluate(&[0.0]).unwrap(), 0.0);
        assert!(libm::fabs(f.evaluate(&[0.125]).unwrap() - 0.25) < 1e-15);
        let mut prev = f.evaluate(&[-1.0]).unwrap();
        for i in 1..20000 {
            let v = f.evaluate(&[-1.0 + i as f64 * 1e-4]).unwrap();
            assert!(libm::fabs(v - prev) <= 2.0 * 1e-4 + 1e-12);
            prev = v;
        }
    }

    #[test]
    fn transform_only_for_gaussian_bumps() {
        let g = TestFunction::gaussian_bump(vec![0.0], 0.5, 3.0).unwrap();
        let t = g.fourier_transform(&[0.0]).unwrap();
        assert!(libm::fabs(t.re - 3.0 * 0.5 * libm::sqrt(2.0 * PI)) < 1e-14);
        assert_eq!(t.im, 0.0);
        let m = TestFunction::mollifier_bump(vec![0.0], 1.0, 1.0).unwrap();
        assert_eq!(
            m.fourier_transform(&[0.0]),
            Err(Error::UnsupportedFunction("mollifier_bump"))
        );
        let k = Kernel::matern(1.0, 1.5, 1.0, 1).unwrap();
        assert!(m.rkhs_norm_spectral(&k, &QuadratureSpec::default()).is_err());
    }

    #[test]
    fn spectral_norm_closed_form_for_matern_three_halves() {
        // S(u) = 4 kappa^3 / (kappa^2 + u^2)^2 with kappa^2 = 3, |f~|^2 = 2 pi e^{-u^2}
        let g = TestFunction::gaussian_bump(vec![0.0], 1.0, 1.0).unwrap();
        let k = Kernel::matern(1.0, 1.5, 1.0, 1).unwrap();
        let r = g.rkhs_norm_spectral(&k, &QuadratureSpec::default()).unwrap();
        let want = libm::sqrt(libm::sqrt(PI) * 12.75 / (12.0 * libm::sqrt(3.0)));
        assert!(!r.divergent);
        assert!(libm::fabs(r.norm - want) / want < 1e-9, "{} vs {}", r.norm, want);
    }

    #[test]
    fn narrow_bump_is_outside_the_gaussian_rkhs() {
        let k = Kernel::gaussian(1.0, 1.0, 1).unwrap();
        // finite iff width^2 > 1 / (4 alpha)
        let narrow = TestFunction::gaussian_bump(vec![0.0], 0.2, 1.0).unwrap();
        assert!(narrow.rkhs_norm_spectral(&k, &QuadratureSpec::default()).unwrap().divergent);
        let wide = TestFunction::gaussian_bump(vec![0.0], 2.0, 1.0).unwrap();
        let r = wide.rkhs_norm_spectral(&k, &QuadratureSpec::default()).unwrap();
        assert!(!r.divergent && r.norm.is_finite());
        // closed form: (1/pi) int 2 pi w^2 e^{-w^2 u^2} e^{u^2/4} / sqrt(pi) du
        let c = 4.0 - 0.25;
        let want = libm::sqrt(2.0 * 4.0 / libm::sqrt(PI) * 0.5 * libm::sqrt(PI / c));
        assert!(libm::fabs(r.norm - want) / want < 1e-9);
    }
}
