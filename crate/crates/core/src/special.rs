//! Special functions needed by the covariance catalog.
//!
//! The modified Bessel function of the second kind is evaluated with Temme's
//! series for `x < 2` and Steed's continued fraction otherwise, both at an
//! order `mu` in `[-1/2, 1/2]`, followed by the upward recurrence to the
//! requested order. Everything is carried in log space so that very large
//! orders or arguments neither overflow nor underflow.

use core::f64::consts::PI;

const EPS: f64 = 1.0e-16;
const MAX_ITER: usize = 100_000;
const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

#[inline]
pub fn ln_gamma(x: f64) -> f64 {
    libm::lgamma(x)
}

#[inline]
pub fn gamma(x: f64) -> f64 {
    libm::tgamma(x)
}

/// `K_nu(x)` for `nu >= 0`, `x > 0`.
pub fn bessel_k(nu: f64, x: f64) -> f64 {
    libm::exp(ln_bessel_k(nu, x))
}

/// `ln K_nu(x)` for `nu >= 0`, `x > 0`.
pub fn ln_bessel_k(nu: f64, x: f64) -> f64 {
    debug_assert!(nu >= 0.0 && x > 0.0);
    let nl = libm::floor(nu + 0.5) as usize;
    let mu = nu - nl as f64;
    let (ln_kmu, ratio) = if x < 2.0 {
        temme_series(mu, x)
    } else {
        steed_fraction(mu, x)
    };
    // ratio = K_{mu+1}/K_mu; the upward recurrence is run on ratios.
    let mut ln_k = ln_kmu;
    let mut r = ratio;
    for i in 1..=nl {
        ln_k += libm::log(r);
        r = (mu + i as f64) * 2.0 / x + 1.0 / r;
    }
    ln_k
}

/// `(1/Gamma(1-mu) - 1/Gamma(1+mu)) / (2 mu)` and `(1/Gamma(1-mu) + 1/Gamma(1+mu)) / 2`.
fn temme_gammas(mu: f64) -> (f64, f64, f64, f64) {
    let gampl = 1.0 / gamma(1.0 + mu);
    let gammi = 1.0 / gamma(1.0 - mu);
    let gam2 = 0.5 * (gammi + gampl);
    let gam1 = if libm::fabs(mu) < 1.0e-3 {
        // odd part of the Taylor series of 1/Gamma(1+z)
        let m2 = mu * mu;
        -(EULER_GAMMA - 0.042_002_635_034_095_2 * m2 - 0.042_197_734_555_544_3 * m2 * m2)
    } else {
        (gammi - gampl) / (2.0 * mu)
    };
    (gam1, gam2, gampl, gammi)
}

fn temme_series(mu: f64, x: f64) -> (f64, f64) {
    let x2 = 0.5 * x;
    let pimu = PI * mu;
    let fact = if libm::fabs(pimu) < EPS {
        1.0
    } else {
        pimu / libm::sin(pimu)
    };
    let d = -libm::log(x2);
    let e = mu * d;
    let fact2 = if libm::fabs(e) < EPS {
        1.0
    } else {
        libm::sinh(e) / e
    };
    let (gam1, gam2, gampl, gammi) = temme_gammas(mu);
    let mut ff = fact * (gam1 * libm::cosh(e) + gam2 * fact2 * d);
    let mut sum = ff;
    let e = libm::exp(e);
    let mut p = 0.5 * e / gampl;
    let mut q = 0.5 / (e * gammi);
    let mut c = 1.0;
    let d = x2 * x2;
    let mut sum1 = p;
    let mu2 = mu * mu;
    for i in 1..MAX_ITER {
        let fi = i as f64;
        ff = (fi * ff + p + q) / (fi * fi - mu2);
        c *= d / fi;
        p /= fi - mu;
        q /= fi + mu;
        let del = c * ff;
        sum += del;
        sum1 += c * (p - fi * ff);
        if libm::fabs(del) < libm::fabs(sum) * EPS {
            break;
        }
    }
    let k1 = sum1 * 2.0 / x;
    (libm::log(sum), k1 / sum)
}

fn steed_fraction(mu: f64, x: f64) -> (f64, f64) {
    let mu2 = mu * mu;
    let mut b = 2.0 * (1.0 + x);
    let mut d = 1.0 / b;
    let mut delh = d;
    let mut h = d;
    let mut q1 = 0.0;
    let mut q2 = 1.0;
    let a1 = 0.25 - mu2;
    let mut q = a1;
    let mut c = a1;
    let mut a = -a1;
    let mut s = 1.0 + q * delh;
    for i in 2..MAX_ITER {
        let fi = i as f64;
        a -= 2.0 * (fi - 1.0);
        c = -a * c / fi;
        let qnew = (q1 - b * q2) / a;
        q1 = q2;
        q2 = qnew;
        q += c * qnew;
        b += 2.0;
        d = 1.0 / (b + a * d);
        delh *= b * d - 1.0;
        h += delh;
        let dels = q * delh;
        s += dels;
        if libm::fabs(dels / s) < EPS {
            break;
        }
    }
    let h = a1 * h;
    let ln_kmu = 0.5 * libm::log(PI / (2.0 * x)) - x - libm::log(s);
    (ln_kmu, (mu + x + 0.5 - h) / x)
}
