use std::f64::consts::PI;

use nalgebra::Matrix3;
use navicontrol::spectral::cubic::{poly, relative_residual};
use navicontrol::spectral::{
    asymptotic_fit_range, char_det, char_fn_symmetric, compute_spectrum, cubic_roots, refine_root,
    SpectrumConfig,
};
use navicontrol::{c64, Branch, Complex64, Spectrum};
use proptest::prelude::*;

// Reference eigenvalues from an independent 40-digit evaluation of the
// label-free characteristic function, seeded at the branch asymptotes.
const HYPERBOLIC_ORACLE: [(i64, f64, f64); 3] = [
    (15, -0.998_570_025_730_031_8, -94.249_322_823_422_955),
    (30, -0.999_481_188_165_871_3, -188.496_105_402_698_29),
    (60, -0.999_813_765_108_085_3, -376.991_311_575_036_02),
];
const PARABOLIC_ORACLE: [(i64, f64); 2] = [(10, -986.210_224_971_804_8), (20, -3947.091_706_512_749_5)];

fn spectrum(k: i64) -> Spectrum {
    compute_spectrum(&SpectrumConfig {
        k_para: (1, k),
        k_hyp: (1, k),
        ..SpectrumConfig::default()
    })
    .unwrap()
}

fn rel(a: Complex64, b: Complex64) -> f64 {
    (a - b).norm() / b.norm()
}

#[test]
fn eigenvalues_match_high_precision_oracle() {
    let spec = spectrum(60);
    for (k, re, im) in HYPERBOLIC_ORACLE {
        for kk in [k, -k] {
            let expect = if kk > 0 { c64(re, im) } else { c64(re, -im) };
            let got = spec.hyperbolic[&kk].lambda;
            assert!(rel(got, expect) <= 1e-12, "k = {kk}: {got} vs {expect}");
        }
    }
    for (k, re) in PARABOLIC_ORACLE {
        let got = spec.parabolic[&k].lambda;
        assert!(rel(got, c64(re, 0.0)) <= 1e-12, "k = {k}: {got}");
        assert_eq!(got.im, 0.0);
    }
}

#[test]
fn newton_from_asymptote_reaches_oracle() {
    let (k, re, im) = HYPERBOLIC_ORACLE[0];
    let r = refine_root(c64(1.0, 2.0 * PI * k as f64), 1e-12, 50).unwrap();
    assert!(rel(-r.mu, c64(re, im)) <= 1e-12);
    assert!(r.residual <= 1e-12);
}

#[test]
fn cubic_roots_match_companion_matrix() {
    for mu in [c64(0.3, 0.0), c64(2.0, 5.0), c64(400.0, 0.0), c64(1.0, 377.0), c64(-7.0, 3.0)] {
        let one = c64(1.0, 0.0);
        let zero = c64(0.0, 0.0);
        let companion = Matrix3::new(
            -mu, -2.0 * mu, -mu * mu, //
            one, zero, zero, //
            zero, one, zero,
        );
        let mut expect: Vec<Complex64> = companion.schur().eigenvalues().unwrap().iter().copied().collect();
        let roots = cubic_roots(mu).unwrap();
        for m in roots.m {
            let (i, d) = expect
                .iter()
                .enumerate()
                .map(|(i, e)| (i, (e - m).norm()))
                .min_by(|a, b| a.1.total_cmp(&b.1))
                .unwrap();
            assert!(d <= 1e-9 * (1.0 + m.norm()), "mu = {mu}: root {m} off by {d:e}");
            expect.remove(i);
            assert!(relative_residual(mu, m) <= 1e-13);
        }
        let sum: Complex64 = roots.m.iter().sum();
        assert!((sum + mu).norm() <= 1e-10 * (1.0 + mu.norm()));
    }
}

#[test]
fn cubic_rejects_zero_mu() {
    assert!(cubic_roots(c64(0.0, 0.0)).is_err());
    assert_eq!(poly(c64(1.0, 0.0), c64(0.0, 0.0)), c64(1.0, 0.0));
}

#[test]
fn spectrum_satisfies_structural_invariants() {
    let spec = spectrum(40);
    spec.check_invariants().unwrap();
    assert!(spec.k_min_p <= 3 && spec.k_min_h <= 4, "{} {}", spec.k_min_p, spec.k_min_h);
    assert_eq!(spec.low_count, spec.low.len() as i64);
    for r in spec.records() {
        assert!(r.lambda.re < 0.0);
        if r.branch != Branch::Low {
            assert!(r.window_ok && r.window_count == 1, "{:?} k = {}", r.branch, r.k);
        }
        if r.branch != Branch::Low && r.k.abs() >= 5 {
            assert!(r.residual <= 1e-10, "{:?} k = {}: {:e}", r.branch, r.k, r.residual);
        }
    }
    for (&k, r) in &spec.parabolic {
        assert_eq!(r.lambda.im, 0.0, "diffusive k = {k} not real");
    }
    for (&k, r) in &spec.hyperbolic {
        let partner = spec.hyperbolic[&-k].lambda;
        assert!((partner - r.lambda.conj()).norm() <= 1e-10 * r.lambda.norm());
    }
}

#[test]
fn spectrum_is_deterministic() {
    let a = spectrum(24);
    let b = spectrum(24);
    assert_eq!(a.to_csv(), b.to_csv());
}

#[test]
fn csv_header_and_row_count() {
    let spec = spectrum(20);
    let csv = spec.to_csv();
    let mut lines = csv.lines();
    assert_eq!(lines.next(), Some("branch,k,re_lambda,im_lambda,residual,window_ok"));
    assert_eq!(lines.count(), spec.len());
}

#[test]
fn branches_approach_their_asymptotes() {
    let spec = spectrum(64);
    let fit = asymptotic_fit_range(&spec, (20, 64)).unwrap();
    assert!(fit.max_abs <= PI / 2.0);
    // The diffusive branch sits on the negative real axis with a constant shift.
    assert!(fit.slopes.d.is_none());
    let c = fit.slopes.c.unwrap();
    assert!((-1.2..=-0.8).contains(&c), "slope of Re sqrt(mu) - k pi: {c}");
    for p in &fit.parabolic {
        let k = p.k as f64;
        let dev = (spec.parabolic[&p.k].lambda.re + (k * PI).powi(2)).abs();
        assert!((0.5..=1.0).contains(&dev), "k = {}: {dev}", p.k);
    }
    // |λ + 1 + 2ikπ| decays at least like 1/|k|.
    for h in &fit.hyperbolic {
        assert!(h.k.abs() as f64 * h.defect <= 0.1, "k = {}: {:e}", h.k, h.defect);
    }
    let s = fit.slopes.defect.unwrap();
    assert!(s <= -0.6, "defect slope {s}");
}

#[test]
fn characteristic_function_vanishes_at_eigenvalues() {
    let spec = spectrum(16);
    for r in spec.records() {
        let f = char_fn_symmetric(r.mu()).unwrap();
        let near = char_fn_symmetric(r.mu() + c64(0.3, 0.3)).unwrap();
        let scale = near.to_complex().norm() * (f.log_scale - near.log_scale).exp();
        assert!(f.value.norm() <= 1e-8 * near.value.norm().max(scale), "{:?} k = {}", r.branch, r.k);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn characteristic_function_is_conjugate_symmetric(re in -40.0f64..400.0, im in 0.5f64..300.0) {
        let mu = c64(re, im);
        let a = char_fn_symmetric(mu).unwrap().to_complex();
        let b = char_fn_symmetric(mu.conj()).unwrap().to_complex();
        prop_assert!((b - a.conj()).norm() <= 1e-9 * a.norm(), "{mu}: {a} vs {b}");
        let da = char_det(mu).unwrap();
        let db = char_det(mu.conj()).unwrap();
        prop_assert!((da.norm() - db.norm()).abs() <= 1e-9 * da.norm());
    }

    #[test]
    fn cubic_roots_have_small_residual(re in -50.0f64..5000.0, im in -3000.0f64..3000.0) {
        prop_assume!(re.abs() + im.abs() > 1e-3);
        let mu = c64(re, im);
        let roots = cubic_roots(mu).unwrap();
        for m in roots.m {
            prop_assert!(relative_residual(mu, m) <= 1e-12);
        }
    }
}
