//! Multi-precision kriging along nested designs.
//!
//! Gaussian-covariance Gram matrices on a few dozen points of the unit
//! interval have Cholesky pivots below `1e-80`, far outside what double
//! precision resolves. Here the Gram matrix of the largest design is
//! factorised once as `K = L L^T` in binary floating point of adjustable
//! precision, with no truncation. Since the designs are nested, `L_n` is the
//! leading block of `L`, and with `v = L^{-1} k_x`
//!
//! ```text
//! sigma^2(x; x_n) = k(x, x) - sum_{i <= n} v_i^2,   lambda_n = L_n^{-T} v[..n]
//! ```
//!
//! The working precision is doubled until two consecutive precisions agree
//! on every reported quantity.

use alloc::format;
use alloc::vec::Vec;

use astro_float::{BigFloat, Consts, RoundingMode, Sign, WORD_BIT_SIZE};

use crate::designs::Design;
use crate::error::{Error, Result};
use crate::kernels::{Covariance, Kernel};

const RM: RoundingMode = RoundingMode::ToEven;

/// Precision schedule for [`nested_curve`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ExtendedOptions {
    /// Starting mantissa size in bits.
    pub min_bits: usize,
    /// Largest mantissa size tried before giving up.
    pub max_bits: usize,
    /// Relative agreement required between consecutive precisions.
    pub agreement: f64,
}

impl Default for ExtendedOptions {
    fn default() -> Self {
        ExtendedOptions {
            min_bits: 256,
            max_bits: 16384,
            agreement: 1.0e-12,
        }
    }
}

/// Quantities at one prefix size, rounded to `f64` at the end.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedPoint {
    pub n: usize,
    pub sigma2: f64,
    pub lebesgue: f64,
    /// `sum_i lambda_i f(x_i)` when samples were supplied.
    pub prediction: Option<f64>,
    /// Largest over smallest Cholesky pivot of `K_n`.
    pub pivot_ratio: f64,
    /// Mantissa bits of the accepted run.
    pub bits: usize,
}

/// Round to the nearest `f64` (ties away from the 64-bit truncation).
pub fn to_f64(x: &BigFloat) -> f64 {
    if x.is_nan() {
        return f64::NAN;
    }
    if x.is_inf_pos() {
        return f64::INFINITY;
    }
    if x.is_inf_neg() {
        return f64::NEG_INFINITY;
    }
    let Some((words, _, sign, exponent, _)) = x.as_raw_parts() else {
        return f64::NAN;
    };
    if x.is_zero() {
        return 0.0;
    }
    // value = 0.m * 2^exponent with the top bit of the last word set
    let mut top: u64 = 0;
    let mut bits = 0;
    for w in words.iter().rev() {
        if bits >= 64 {
            break;
        }
        let wv = *w;
        if WORD_BIT_SIZE >= 64 {
            top = wv;
        } else {
            top |= wv << (64 - WORD_BIT_SIZE - bits);
        }
        bits += WORD_BIT_SIZE;
    }
    let magnitude = libm::ldexp(top as f64, exponent - 64);
    if sign == Sign::Neg {
        -magnitude
    } else {
        magnitude
    }
}

struct Arith {
    p: usize,
    consts: Consts,
}

impl Arith {
    fn new(p: usize) -> Result<Self> {
        let consts =
            Consts::new().map_err(|e| Error::Factorization(format!("constants cache: {e:?}")))?;
        Ok(Arith { p, consts })
    }

    fn num(&self, v: f64) -> BigFloat {
        BigFloat::from_f64(v, self.p)
    }

    fn add(&self, a: &BigFloat, b: &BigFloat) -> BigFloat {
        a.add(b, self.p, RM)
    }

    fn sub(&self, a: &BigFloat, b: &BigFloat) -> BigFloat {
        a.sub(b, self.p, RM)
    }

    fn mul(&self, a: &BigFloat, b: &BigFloat) -> BigFloat {
        a.mul(b, self.p, RM)
    }

    fn div(&self, a: &BigFloat, b: &BigFloat) -> BigFloat {
        a.div(b, self.p, RM)
    }

    fn kernel(&mut self, kernel: &Kernel, x: &[f64], y: &[f64]) -> Result<BigFloat> {
        let mut d2 = self.num(0.0);
        for (a, b) in x.iter().zip(y) {
            let d = self.sub(&self.num(*a), &self.num(*b));
            d2 = self.add(&d2, &self.mul(&d, &d));
        }
        let s2 = self.num(kernel.s2());
        if d2.is_zero() {
            return Ok(s2);
        }
        let arg = match kernel.covariance() {
            Covariance::Gaussian { alpha } => self.mul(&self.num(alpha), &d2),
            Covariance::Exponential { alpha, beta } => {
                let r = d2.sqrt(self.p, RM);
                let rb = if beta == 1.0 {
                    r
                } else {
                    let ln_r = r.ln(self.p, RM, &mut self.consts);
                    self.mul(&self.num(beta), &ln_r)
                        .exp(self.p, RM, &mut self.consts)
                };
                self.mul(&self.num(alpha), &rb)
            }
            Covariance::Matern { .. } => {
                return Err(Error::UnsupportedFamily(
                    "extended precision is available for the gaussian and exponential covariances only",
                ))
            }
        };
        let e = arg.neg().exp(self.p, RM, &mut self.consts);
        Ok(self.mul(&s2, &e))
    }
}

/// One factorisation at fixed precision. `None` when a pivot is not positive.
fn run_at(
    bits: usize,
    kernel: &Kernel,
    design: &Design,
    x: &[f64],
    sizes: &[usize],
    samples: Option<&[f64]>,
) -> Result<Option<Vec<ExtendedPoint>>> {
    let mut ar = Arith::new(bits)?;
    let n_max = sizes.iter().copied().max().unwrap_or(0);
    let hit = design.prefix(n_max).position(x);
    // Only points before a coinciding target matter beyond that index.
    let n_fac = hit.map_or(n_max, |j| n_max.min(j + 1));

    // Row-major packed lower triangle.
    let idx = |i: usize, j: usize| i * (i + 1) / 2 + j;
    let mut l: Vec<BigFloat> = Vec::with_capacity(n_fac * (n_fac + 1) / 2);
    let mut pivots: Vec<BigFloat> = Vec::with_capacity(n_fac);
    let mut v: Vec<BigFloat> = Vec::with_capacity(n_fac);
    for i in 0..n_fac {
        for j in 0..=i {
            let mut s = ar.kernel(kernel, design.point(i), design.point(j))?;
            for q in 0..j {
                s = ar.sub(&s, &ar.mul(&l[idx(i, q)], &l[idx(j, q)]));
            }
            if j < i {
                l.push(ar.div(&s, &l[idx(j, j)]));
            } else {
                if !s.is_positive() || s.is_zero() {
                    return Ok(None);
                }
                pivots.push(s.clone());
                l.push(s.sqrt(bits, RM));
            }
        }
        let mut s = ar.kernel(kernel, x, design.point(i))?;
        for q in 0..i {
            s = ar.sub(&s, &ar.mul(&l[idx(i, q)], &v[q]));
        }
        v.push(ar.div(&s, &l[idx(i, i)]));
    }

    let kxx = ar.num(kernel.s2());
    let mut residual = Vec::with_capacity(n_fac + 1);
    residual.push(kxx.clone());
    for q in 0..n_fac {
        let next = ar.sub(&residual[q], &ar.mul(&v[q], &v[q]));
        residual.push(next);
    }
    let pivot_f64: Vec<f64> = pivots.iter().map(to_f64).collect();

    let mut out = Vec::with_capacity(sizes.len());
    for &n in sizes {
        if let Some(j) = hit.filter(|&j| j < n) {
            out.push(ExtendedPoint {
                n,
                sigma2: 0.0,
                lebesgue: 1.0,
                prediction: samples.map(|s| s[j]),
                pivot_ratio: pivot_ratio(&pivot_f64[..n_fac.min(n)]),
                bits,
            });
            continue;
        }
        // back substitution L_n^T lambda = v[..n]
        let mut lambda: Vec<BigFloat> = alloc::vec![ar.num(0.0); n];
        for i in (0..n).rev() {
            let mut s = v[i].clone();
            for q in i + 1..n {
                s = ar.sub(&s, &ar.mul(&l[idx(q, i)], &lambda[q]));
            }
            lambda[i] = ar.div(&s, &l[idx(i, i)]);
        }
        let mut tv = ar.num(0.0);
        for w in &lambda {
            tv = ar.add(&tv, &w.abs());
        }
        let prediction = samples.map(|s| {
            let mut acc = ar.num(0.0);
            for (w, f) in lambda.iter().zip(s) {
                acc = ar.add(&acc, &ar.mul(w, &ar.num(*f)));
            }
            to_f64(&acc)
        });
        let sigma2 = to_f64(&residual[n]);
        if sigma2 < 0.0 {
            return Ok(None);
        }
        out.push(ExtendedPoint {
            n,
            sigma2,
            lebesgue: to_f64(&tv),
            prediction,
            pivot_ratio: pivot_ratio(&pivot_f64[..n]),
            bits,
        });
    }
    Ok(Some(out))
}

fn pivot_ratio(p: &[f64]) -> f64 {
    if p.is_empty() {
        return 1.0;
    }
    let max = p.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = p.iter().copied().fold(f64::INFINITY, f64::min);
    max / min
}

fn agree(a: &[ExtendedPoint], b: &[ExtendedPoint], tol: f64) -> bool {
    let near = |x: f64, y: f64| libm::fabs(x - y) <= tol * libm::fabs(x).max(libm::fabs(y));
    a.iter().zip(b).all(|(p, q)| {
        near(p.sigma2, q.sigma2)
            && near(p.lebesgue, q.lebesgue)
            && match (p.prediction, q.prediction) {
                (Some(x), Some(y)) => near(x, y) || libm::fabs(x - y) <= 1e-300,
                _ => true,
            }
    })
}

/// Kriging variance, Lebesgue constant and optionally the prediction of
/// `samples` at `x`, for every prefix size in `sizes`, without truncation.
pub fn nested_curve(
    kernel: &Kernel,
    design: &Design,
    x: &[f64],
    sizes: &[usize],
    samples: Option<&[f64]>,
    opts: &ExtendedOptions,
) -> Result<Vec<ExtendedPoint>> {
    kernel.check_dim(design.dim())?;
    kernel.check_dim(x.len())?;
    if let Some(&n) = sizes.iter().find(|&&n| n > design.len()) {
        return Err(Error::Precondition(format!(
            "prefix size {n} exceeds the design size {}",
            design.len()
        )));
    }
    let n_max = sizes.iter().copied().max().unwrap_or(0);
    if let Some((first, second)) = design.prefix(n_max).find_duplicate() {
        return Err(Error::DuplicatePoint { first, second });
    }
    if let Some(s) = samples {
        if s.len() < n_max {
            return Err(Error::LengthMismatch {
                expected: n_max,
                found: s.len(),
            });
        }
    }
    if opts.min_bits < 64 || opts.max_bits < opts.min_bits {
        return Err(Error::InvalidParameter {
            name: "bits",
            value: opts.min_bits as f64,
            expected: "64 <= min_bits <= max_bits",
        });
    }
    let mut bits = opts.min_bits;
    let mut previous = run_at(bits, kernel, design, x, sizes, samples)?;
    while bits * 2 <= opts.max_bits {
        bits *= 2;
        let current = run_at(bits, kernel, design, x, sizes, samples)?;
        if let (Some(p), Some(c)) = (&previous, &current) {
            if agree(p, c, opts.agreement) {
                return Ok(current.unwrap());
            }
        }
        previous = current;
    }
    Err(Error::Factorization(format!(
        "no agreement between consecutive precisions up to {} bits",
        opts.max_bits
    )))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::designs::grid_sequence;
    use crate::solver::GramSystem;
    use crate::BoundingBox;
    use alloc::vec;

    #[test]
    fn f64_conversion_round_trips() {
        for &v in &[1.0, -2.5, 0.1, 1e-300, 3.0e250, -7.0e-5, core::f64::consts::PI] {
            assert_eq!(to_f64(&BigFloat::from_f64(v, 256)), v);
        }
        assert_eq!(to_f64(&BigFloat::from_f64(0.0, 256)), 0.0);
        let third = BigFloat::from_f64(1.0, 512).div(&BigFloat::from_f64(3.0, 512), 512, RM);
        assert_eq!(to_f64(&third), 1.0 / 3.0);
    }

    #[test]
    fn matches_double_precision_on_well_conditioned_system() {
        let k = Kernel::exponential(1.3, 2.0, 1.0, 1).unwrap();
        let d = grid_sequence(&BoundingBox::unit(1), 12).unwrap();
        let x = [0.3];
        let samples: Vec<f64> = d.points().map(|p| libm::sin(3.0 * p[0])).collect();
        let got = nested_curve(&k, &d, &x, &[1, 4, 12], Some(&samples), &ExtendedOptions::default())
            .unwrap();
        for p in got {
            let sys = GramSystem::build(&k, &d.prefix(p.n), 0.0).unwrap();
            let pr = sys.kriging_weights(&x).unwrap();
            assert!(libm::fabs(p.sigma2 - pr.variance) < 1e-13);
            assert!(libm::fabs(p.lebesgue - pr.lebesgue) < 1e-12);
            let want = pr.predict(&samples[..p.n]).unwrap();
            assert!(libm::fabs(p.prediction.unwrap() - want) < 1e-12);
        }
    }

    #[test]
    fn two_point_oracle() {
        let k = Kernel::gaussian(1.0, 1.0, 1).unwrap();
        let d = Design::from_coords(1, vec![0.0, 1.0]).unwrap();
        let got = nested_curve(&k, &d, &[0.5], &[0, 1, 2], None, &ExtendedOptions::default())
            .unwrap();
        let e1 = libm::exp(-1.0);
        assert_eq!(got[0].sigma2, 1.0);
        assert!(libm::fabs(got[1].sigma2 - (1.0 - libm::exp(-0.5))) < 1e-15);
        let s2 = 1.0 - 2.0 * libm::exp(-0.5) / (1.0 + e1);
        assert!(libm::fabs(got[2].sigma2 - s2) < 1e-15);
        let w = libm::exp(-0.25) / (1.0 + e1);
        assert!(libm::fabs(got[2].lebesgue - 2.0 * w) < 1e-15);
    }

    #[test]
    fn target_on_a_node() {
        let k = Kernel::gaussian(1.0, 1.0, 1).unwrap();
        let d = grid_sequence(&BoundingBox::unit(1), 6).unwrap();
        let samples = [1.0, 2.0, 3.0, 4.0, 5.0, 6.0];
        // 0.75 is the third point
        let got = nested_curve(&k, &d, &[0.75], &[2, 3, 6], Some(&samples), &ExtendedOptions::default())
            .unwrap();
        assert!(got[0].sigma2 > 0.0);
        assert_eq!((got[1].sigma2, got[1].lebesgue, got[1].prediction), (0.0, 1.0, Some(3.0)));
        assert_eq!(got[2].prediction, Some(3.0));
    }

    #[test]
    fn matern_is_rejected() {
        let k = Kernel::matern(1.0, 1.5, 1.0, 1).unwrap();
        let d = grid_sequence(&BoundingBox::unit(1), 3).unwrap();
        assert!(matches!(
            nested_curve(&k, &d, &[2.0], &[3], None, &ExtendedOptions::default()),
            Err(Error::UnsupportedFamily(_))
        ));
    }

    #[test]
    fn oversized_prefix_is_rejected() {
        let k = Kernel::gaussian(1.0, 1.0, 1).unwrap();
        let d = grid_sequence(&BoundingBox::unit(1), 3).unwrap();
        assert!(nested_curve(&k, &d, &[2.0], &[4], None, &ExtendedOptions::default()).is_err());
    }
}
