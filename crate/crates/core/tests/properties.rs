use kriglab_core::designs::{self, BoundingBox, Design};
use kriglab_core::experiments::{self, Precision};
use kriglab_core::extended::{self, ExtendedOptions};
use kriglab_core::kernels::{Kernel, RadialGrid};
use kriglab_core::solver::{gram_matrix, rkhs_norm_span, GramSystem};
use kriglab_core::TestFunction;
use proptest::prelude::*;

fn kernel(dim: usize) -> impl Strategy<Value = Kernel> {
    let s2 = 0.2f64..5.0;
    prop_oneof![
        (s2.clone(), 0.5f64..20.0).prop_map(move |(s2, a)| Kernel::gaussian(s2, a, dim).unwrap()),
        (s2.clone(), 0.5f64..10.0, 0.3f64..1.9)
            .prop_map(move |(s2, a, b)| Kernel::exponential(s2, a, b, dim).unwrap()),
        (s2, prop::sample::select(vec![0.5, 1.5, 2.5, 3.7]), 0.05f64..1.0)
            .prop_map(move |(s2, nu, rho)| Kernel::matern(s2, nu, rho, dim).unwrap()),
    ]
}

fn design(dim: usize, max_n: usize) -> impl Strategy<Value = Design> {
    prop::collection::vec(prop::collection::vec(0.0f64..1.0, dim), 1..=max_n).prop_map(move |pts| {
        let coords: Vec<f64> = pts.into_iter().flatten().collect();
        Design::with_box(coords, BoundingBox::unit(dim)).unwrap()
    })
}

fn case() -> impl Strategy<Value = (Kernel, Design, Vec<f64>)> {
    (1usize..=3).prop_flat_map(|d| (kernel(d), design(d, 12), prop::collection::vec(-0.2f64..1.2, d)))
}

fn well_separated(d: &Design, min: f64) -> bool {
    let pts: Vec<&[f64]> = d.points().collect();
    pts.iter().enumerate().all(|(i, p)| {
        pts[..i]
            .iter()
            .all(|q| p.iter().zip(q.iter()).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt() >= min)
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn gram_matrix_is_positive_semidefinite((k, d, _) in case()) {
        prop_assume!(well_separated(&d, 1e-3));
        let g = gram_matrix(&k, &d);
        let e = g.symmetric_eigen();
        let max = e.eigenvalues.max();
        prop_assert!(e.eigenvalues.iter().all(|v| *v >= -1e-9 * max));
    }

    #[test]
    fn predictor_interpolates((k, d, _) in case(), idx in any::<prop::sample::Index>()) {
        prop_assume!(well_separated(&d, 1e-3));
        let sys = GramSystem::build(&k, &d, 1e-12).unwrap();
        let j = idx.index(d.len());
        let p = sys.kriging_weights(d.point(j)).unwrap();
        prop_assert_eq!(p.variance, 0.0);
        let unit = p.weights.iter().enumerate().all(|(i, w)| *w == f64::from(u8::from(i == j)));
        prop_assert!(unit);
        let samples: Vec<f64> = (0..d.len()).map(|i| (i as f64).sin()).collect();
        prop_assert_eq!(p.predict(&samples).unwrap(), samples[j]);
    }

    #[test]
    fn variance_is_bounded_by_every_single_point((k, d, x) in case()) {
        prop_assume!(well_separated(&d, 1e-2));
        let sys = GramSystem::build(&k, &d, 1e-12).unwrap();
        let v = sys.kriging_variance(&x).unwrap();
        prop_assert!(v <= k.s2() + 1e-12);
        for p in d.points() {
            let bound = 2.0 * k.s2() - 2.0 * k.eval(&x, p).unwrap();
            prop_assert!(v <= bound + 1e-10 * k.s2());
        }
    }

    #[test]
    fn variance_decreases_along_prefixes((k, d, x) in case()) {
        prop_assume!(well_separated(&d, 1e-2));
        let mut prev = f64::INFINITY;
        for n in 0..=d.len() {
            let v = GramSystem::build(&k, &d.prefix(n), 1e-12).unwrap().kriging_variance(&x).unwrap();
            prop_assert!(v <= prev + 1e-10 * k.s2());
            prev = v;
        }
    }

    #[test]
    fn cauchy_schwarz_bound((k, d, x) in case(), coeffs in prop::collection::vec(-2.0f64..2.0, 1..6)) {
        prop_assume!(well_separated(&d, 1e-2));
        let centers = Design::with_box(
            (0..coeffs.len()).flat_map(|i| vec![0.17 * i as f64 + 0.05; k.dim()]).collect(),
            BoundingBox::unit(k.dim()),
        ).unwrap();
        let norm = rkhs_norm_span(&k, &centers, &coeffs).unwrap();
        let f = TestFunction::kernel_span(k, centers, coeffs).unwrap();
        let sys = GramSystem::build(&k, &d, 1e-12).unwrap();
        let p = sys.kriging_weights(&x).unwrap();
        let pred = p.predict(&f.samples(&d).unwrap()).unwrap();
        let err = (f.evaluate(&x).unwrap() - pred).abs();
        prop_assert!(err <= norm * p.variance.sqrt() + 1e-8, "{} > {}", err, norm * p.variance.sqrt());
    }

    #[test]
    fn scaling_s2_scales_variance_only((k, d, x) in case(), c in 0.1f64..10.0) {
        prop_assume!(well_separated(&d, 1e-2));
        let a = GramSystem::build(&k, &d, 1e-12).unwrap().kriging_weights(&x).unwrap();
        let scaled = k.with_s2(k.s2() * c).unwrap();
        let b = GramSystem::build(&scaled, &d, 1e-12).unwrap().kriging_weights(&x).unwrap();
        prop_assert!((b.variance - c * a.variance).abs() <= 1e-9 * c * k.s2());
        if a.effective_rank == d.len() && b.effective_rank == d.len() {
            for (u, v) in a.weights.iter().zip(&b.weights) {
                prop_assert!((u - v).abs() <= 1e-6 * (1.0 + u.abs()));
            }
        }
    }

    #[test]
    fn translation_invariance((k, d, x) in case(), shift in -3.0f64..3.0) {
        prop_assume!(well_separated(&d, 5e-2));
        let a = GramSystem::build(&k, &d, 1e-12).unwrap().kriging_weights(&x).unwrap();
        let moved = Design::from_coords(d.dim(), d.coords().iter().map(|v| v + shift).collect()).unwrap();
        let xs: Vec<f64> = x.iter().map(|v| v + shift).collect();
        let b = GramSystem::build(&k, &moved, 1e-12).unwrap().kriging_weights(&xs).unwrap();
        prop_assert!((a.variance - b.variance).abs() <= 1e-8 * k.s2());
    }

    #[test]
    fn truncation_is_conservative((k, d, x) in case(), tau in 1e-10f64..1e-3) {
        prop_assume!(well_separated(&d, 1e-2));
        let fine = GramSystem::build(&k, &d, 1e-12).unwrap().kriging_weights(&x).unwrap();
        let coarse = GramSystem::build(&k, &d, tau).unwrap().kriging_weights(&x).unwrap();
        prop_assert!(coarse.preclamp_variance >= fine.preclamp_variance - 1e-12 * k.s2());
    }

    #[test]
    fn grid_prefixes_are_nested(n in 1usize..200, m in 1usize..200, dim in 1usize..4) {
        let (a, b) = (n.min(m), n.max(m));
        let big = designs::grid_sequence(&BoundingBox::unit(dim), b).unwrap();
        let small = designs::grid_sequence(&BoundingBox::unit(dim), a).unwrap();
        let head = big.prefix(a);
        prop_assert_eq!(head.coords(), small.coords());
        prop_assert!(small.find_duplicate().is_none());
    }

    #[test]
    fn halton_prefixes_are_nested(n in 1usize..200, dim in 1usize..17) {
        let big = designs::halton_sequence(&BoundingBox::unit(dim), n + 7).unwrap();
        let small = designs::halton_sequence(&BoundingBox::unit(dim), n).unwrap();
        let head = big.prefix(n);
        prop_assert_eq!(head.coords(), small.coords());
    }

    #[test]
    fn minorant_check_is_monotone_in_r(nu in 0.3f64..4.0, r in 1u32..12) {
        let k = Kernel::matern(1.0, nu, 1.0, 1).unwrap();
        let grid = RadialGrid::default();
        if k.check_polynomial_minorant(r, &grid).unwrap().satisfied {
            prop_assert!(k.check_polynomial_minorant(r + 1, &grid).unwrap().satisfied);
        }
    }
}

#[test]
fn fill_distance_shrinks_along_the_grid() {
    // max over a fine probe of the distance to the nearest design point
    let probe: Vec<f64> = (0..=1000).map(|i| i as f64 / 1000.0).collect();
    let d = designs::grid_sequence(&BoundingBox::unit(1), 256).unwrap();
    let fill = |n: usize| {
        probe
            .iter()
            .map(|t| d.prefix(n).coords().iter().map(|c| (c - t).abs()).fold(f64::INFINITY, f64::min))
            .fold(0.0, f64::max)
    };
    let mut prev = f64::INFINITY;
    for n in [1, 2, 4, 8, 16, 32, 64, 128, 256] {
        let h = fill(n);
        assert!(h <= prev);
        prev = h;
    }
    assert!(prev < 0.005);
}

#[test]
fn extended_precision_reaches_the_gaussian_decay() {
    let k = Kernel::gaussian(1.0, 1.0, 1).unwrap();
    let d = designs::grid_sequence(&BoundingBox::unit(1), 40).unwrap();
    let pts = extended::nested_curve(&k, &d, &[2.0], &[5, 10, 20, 40], None, &ExtendedOptions::default()).unwrap();
    let want = [
        4.898_430_881_860_994e-1,
        2.102_365_404_560_728_5e-2,
        7.384_461_835_424_4e-8,
        1.237_910_202_214_569_3e-24,
    ];
    for (p, w) in pts.iter().zip(want) {
        assert!((p.sigma2 - w).abs() <= 1e-10 * w, "n = {}: {} vs {}", p.n, p.sigma2, w);
    }
}

#[test]
fn double_precision_gaussian_curve_saturates_but_stays_monotone() {
    let k = Kernel::gaussian(1.0, 1.0, 1).unwrap();
    let d = designs::grid_sequence(&BoundingBox::unit(1), 64).unwrap();
    let recs = experiments::neb_curve(&k, &d, &[2.0], &[5, 10, 20, 40, 64], &Precision::default()).unwrap();
    assert!(experiments::sigma2_non_increasing(&recs, 1.0, 1e-10));
    assert!(recs.last().unwrap().effective_rank < 64);
}
