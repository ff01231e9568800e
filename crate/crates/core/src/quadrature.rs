//! Adaptive Gauss–Kronrod (7/15) quadrature on finite intervals.

use alloc::vec::Vec;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

/// One Kronrod panel: (estimate, error estimate).
fn kronrod<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let c = 0.5 * (a + b);
    let h = 0.5 * (b - a);
    let fc = f(c);
    let mut gauss = fc * WG[3];
    let mut kron = fc * WGK[7];
    for j in 0..7 {
        let dx = h * XGK[j];
        let pair = f(c - dx) + f(c + dx);
        kron += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kron * h, libm::fabs((kron - gauss) * h))
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Integral {
    pub value: f64,
    pub error: f64,
}

/// Integrates `f` over `[a, b]` by bisecting the worst panel until the summed
/// error estimate is below `max(abs_tol, rel_tol * |value|)`.
pub(crate) fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    abs_tol: f64,
    rel_tol: f64,
) -> Integral {
    const MAX_PANELS: usize = 2000;
    let mut panels: Vec<(f64, f64, f64, f64)> = Vec::new();
    let (v, e) = kronrod(&f, a, b);
    panels.push((a, b, v, e));
    loop {
        let value: f64 = panels.iter().map(|p| p.2).sum();
        let error: f64 = panels.iter().map(|p| p.3).sum();
        let tol = abs_tol.max(rel_tol * libm::fabs(value));
        if error <= tol || panels.len() >= MAX_PANELS || !value.is_finite() {
            return Integral { value, error };
        }
        let (worst, _) = panels
            .iter()
            .enumerate()
            .fold((0, -1.0), |acc, (i, p)| if p.3 > acc.1 { (i, p.3) } else { acc });
        let (pa, pb, _, _) = panels.swap_remove(worst);
        let mid = 0.5 * (pa + pb);
        let (v1, e1) = kronrod(&f, pa, mid);
        let (v2, e2) = kronrod(&f, mid, pb);
        panels.push((pa, mid, v1, e1));
        panels.push((mid, pb, v2, e2));
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn integrates_polynomials_and_gaussians() {
        let r = integrate(|x| x * x * x - 2.0 * x, 0.0, 3.0, 1e-14, 1e-14);
        assert!(libm::fabs(r.value - (81.0 / 4.0 - 9.0)) < 1e-12);
        let r = integrate(|x| libm::exp(-x * x), -10.0, 10.0, 1e-15, 1e-14);
        assert!(libm::fabs(r.value - libm::sqrt(core::f64::consts::PI)) < 1e-13);
    }

    #[test]
    fn adapts_to_a_sharp_peak() {
        let r = integrate(|x| 1.0 / (1e-4 + x * x), -1.0, 1.0, 1e-12, 1e-12);
        let want = 2.0 * libm::atan(1.0 / 1e-2) / 1e-2;
        assert!(libm::fabs(r.value - want) / want < 1e-10);
    }
}
