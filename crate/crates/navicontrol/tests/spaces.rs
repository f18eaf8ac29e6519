use std::f64::consts::PI;

use navicontrol::spaces::{dual_pairing, fourier_coeffs, l2_inner, sobolev_norm, trapezoid};
use navicontrol::{c64, Complex64, Error, ExpSum, FourierVector, GridFunction, State};
use proptest::collection::vec;
use proptest::prelude::*;

fn modes(c: &[(f64, f64)]) -> Vec<(i64, Complex64)> {
    c.iter()
        .enumerate()
        .flat_map(|(j, &(re, im))| {
            let m = j as i64 + 1;
            // Alternate between a one-sided and a real mode pattern.
            if j % 2 == 0 {
                vec![(m, c64(re, im)), (-m, c64(re, -im))]
            } else {
                vec![(m, c64(re, im)), (-m, c64(im, re))]
            }
        })
        .collect()
}

fn vector(c: &[(f64, f64)], s: f64) -> FourierVector {
    FourierVector::new(modes(c), s, true).unwrap()
}

fn coeffs() -> impl Strategy<Value = Vec<(f64, f64)>> {
    vec((-2.0f64..2.0, -2.0f64..2.0), 1..6)
}

#[test]
fn sine_has_expected_sobolev_norms() {
    let half = c64(0.0, 0.5);
    let v = FourierVector::new([(1, half), (-1, -half)], 1.0, true).unwrap();
    let h1 = sobolev_norm(&v, 1.0, false).unwrap();
    assert!((h1 - ((1.0 + 4.0 * PI * PI) / 2.0).sqrt()).abs() <= 1e-14);
    let dot = sobolev_norm(&v, 1.0, true).unwrap();
    assert!((dot - (2.0 * PI * PI).sqrt()).abs() <= 1e-14);
    let l2 = sobolev_norm(&v, 0.0, false).unwrap();
    assert!((l2 - 0.5f64.sqrt()).abs() <= 1e-15);
}

#[test]
fn nonzero_mean_is_rejected() {
    let err = FourierVector::new([(0, c64(0.3, 0.0)), (1, c64(1.0, 0.0))], 1.0, true).unwrap_err();
    assert!(matches!(err, Error::NotMeanZero { .. }));
    let v = FourierVector::new([(0, c64(0.3, 0.0)), (1, c64(1.0, 0.0))], 1.0, false).unwrap();
    assert!(matches!(sobolev_norm(&v, 1.0, true), Err(Error::NotMeanZero { .. })));
    assert!(matches!(dual_pairing(&v, &v), Err(Error::NotMeanZero { .. })));
}

#[test]
fn tiny_mean_is_dropped() {
    let v = FourierVector::new([(0, c64(1e-14, 0.0)), (2, c64(1.0, 0.0))], 1.0, true).unwrap();
    assert_eq!(v.coeff(0), c64(0.0, 0.0));
}

#[test]
fn coefficients_need_a_fine_enough_grid() {
    let g = GridFunction::from_real_fn(16, |x| (2.0 * PI * x).sin()).unwrap();
    assert!(matches!(fourier_coeffs(&g, 5, 0.0), Err(Error::GridTooCoarse { .. })));
    assert!(fourier_coeffs(&g, 4, 0.0).is_ok());
}

#[test]
fn grid_functions_validate_shape() {
    assert!(GridFunction::new(vec![c64(0.0, 0.0)]).is_err());
    let a = GridFunction::from_real_fn(8, |x| x).unwrap();
    let b = GridFunction::from_real_fn(16, |x| x).unwrap();
    assert!(matches!(State::new(a.clone(), b.clone()), Err(Error::GridMismatch(_))));
    assert!(l2_inner(&a, &b).is_err());
    // ∫ x² = 1/3 up to the trapezoid error h²/6.
    let n2 = l2_inner(&b, &b).unwrap().re;
    assert!((n2 - 1.0 / 3.0 - 1.0 / (6.0 * 256.0)).abs() <= 1e-14);
}

#[test]
fn trapezoid_is_exact_for_linear_data() {
    let v: Vec<f64> = (0..=10).map(|i| 3.0 * i as f64 * 0.1 + 1.0).collect();
    assert!((trapezoid(&v, 0.1) - 2.5).abs() <= 1e-14);
}

#[test]
fn expsum_coefficients_match_grid_coefficients() {
    let f = ExpSum::sine(2.0, 1.0).plus(&ExpSum::sine(3.0, 0.5));
    let exact = FourierVector::from_expsum(&f, 6, 1.0, false).unwrap();
    let grid = fourier_coeffs(&GridFunction::from_expsum(4096, &f).unwrap(), 6, 1.0).unwrap();
    for m in -6..=6 {
        let d = (exact.coeff(m) - grid.coeff(m)).norm();
        assert!(d <= 1e-6, "m = {m}: {d:e}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn parseval_on_the_grid(c in coeffs()) {
        let v = vector(&c, 0.0);
        let g = GridFunction::from_fn(64, |x| v.eval(x)).unwrap();
        let grid_sq = l2_inner(&g, &g).unwrap().re;
        let coef_sq = sobolev_norm(&v, 0.0, false).unwrap().powi(2);
        prop_assert!((grid_sq - coef_sq).abs() <= 1e-12 * coef_sq.max(1.0));
        let back = fourier_coeffs(&g, 12, 0.0).unwrap();
        for (&m, &cm) in &v.coeffs {
            prop_assert!((back.coeff(m) - cm).norm() <= 1e-12 * (1.0 + cm.norm()));
        }
    }

    #[test]
    fn pairing_is_sesquilinear(
        a in coeffs(), b in coeffs(), c in coeffs(),
        (sr, si) in (-2.0f64..2.0, -2.0f64..2.0),
    ) {
        let (va, vb, vc) = (vector(&a, -1.0), vector(&b, -1.0), vector(&c, 1.0));
        let s = c64(sr, si);
        let combo = FourierVector::new(
            va.coeffs.iter().map(|(&m, &x)| (m, s * x)).chain(vb.coeffs.iter().map(|(&m, &x)| (m, x))),
            -1.0,
            true,
        ).unwrap();
        let lhs = dual_pairing(&combo, &vc).unwrap();
        let rhs = s * dual_pairing(&va, &vc).unwrap() + dual_pairing(&vb, &vc).unwrap();
        prop_assert!((lhs - rhs).norm() <= 1e-12 * (1.0 + rhs.norm()));
        // Conjugate-linear in the second slot.
        let scaled = FourierVector::new(vc.coeffs.iter().map(|(&m, &x)| (m, s * x)), 1.0, true).unwrap();
        let l2 = dual_pairing(&va, &scaled).unwrap();
        let r2 = s.conj() * dual_pairing(&va, &vc).unwrap();
        prop_assert!((l2 - r2).norm() <= 1e-12 * (1.0 + r2.norm()));
    }

    #[test]
    fn pairing_is_bounded_by_dual_norms(a in coeffs(), b in coeffs(), s in 0.0f64..2.0) {
        let (va, vb) = (vector(&a, -s), vector(&b, s));
        let p = dual_pairing(&va, &vb).unwrap().norm();
        let bound = sobolev_norm(&va, -s, true).unwrap() * sobolev_norm(&vb, s, true).unwrap();
        prop_assert!(p <= bound * (1.0 + 1e-12) + 1e-300);
        let bound_inh = sobolev_norm(&va, -s, false).unwrap() * sobolev_norm(&vb, s, false).unwrap();
        prop_assert!(p <= bound_inh * (1.0 + 1e-12) + 1e-300);
    }

    #[test]
    fn pairing_matches_l2_integral(a in coeffs(), b in coeffs()) {
        let (va, vb) = (vector(&a, 0.0), vector(&b, 0.0));
        let ga = GridFunction::from_fn(128, |x| va.eval(x)).unwrap();
        let gb = GridFunction::from_fn(128, |x| vb.eval(x)).unwrap();
        let grid = l2_inner(&ga, &gb).unwrap();
        let dual = dual_pairing(&va, &vb).unwrap();
        prop_assert!((grid - dual).norm() <= 1e-12 * (1.0 + dual.norm()));
    }
}
