use std::f64::consts::PI;
use std::sync::OnceLock;

use navicontrol::control::{
    exponential_gram, gram_condition, lift_to_dirichlet, moment_residuals, moment_targets, observation_bands,
    solve_moments, weighted_exp_integral, weighted_gram, BoundarySignal, ControlSignal, ControlWeight, FnSignal,
    InitialData, MomentSystem, Regularization, SampledSignal, SolveOptions, Velocity,
};
use navicontrol::spectral::{build_all, compute_spectrum, SpectrumConfig};
use navicontrol::{c64, Branch, Complex64, EigenPair, Error, ExpSum, FourierVector};
use proptest::prelude::*;

fn all_pairs() -> &'static [EigenPair] {
    static PAIRS: OnceLock<Vec<EigenPair>> = OnceLock::new();
    PAIRS.get_or_init(|| {
        let spec = compute_spectrum(&SpectrumConfig {
            k_para: (1, 64),
            k_hyp: (1, 64),
            ..SpectrumConfig::default()
        })
        .unwrap();
        build_all(&spec).unwrap()
    })
}

fn control_pairs(k: i64) -> Vec<EigenPair> {
    all_pairs()
        .iter()
        .filter(|p| match p.branch {
            Branch::Low => true,
            _ => p.k.abs() <= k,
        })
        .cloned()
        .collect()
}

fn standard_control(samples: usize) -> (MomentSystem, ControlSignal) {
    let ms = moment_targets(&InitialData::standard(), &control_pairs(20), 1.5).unwrap();
    let p = solve_moments(
        &ms,
        &SolveOptions {
            samples,
            ..SolveOptions::default()
        },
    )
    .unwrap();
    (ms, p)
}

fn max_norm(v: &[Complex64]) -> f64 {
    v.iter().map(|r| r.norm()).fold(0.0, f64::max)
}

#[test]
fn standard_data_satisfies_every_moment() {
    let (ms, p) = standard_control(4096);
    assert_eq!(ms.exponents[0].branch, None, "mean mode first");
    assert!(ms.warnings.is_empty());
    assert!(p.max_residual <= 1e-8, "{:e}", p.max_residual);
    let quad = moment_residuals(&p.sampled(), &ms).unwrap();
    assert!(max_norm(&quad) <= 1e-6, "{:e}", max_norm(&quad));
    assert!(p.imag_ratio <= 1e-8);
    assert!(p.integral().abs() <= 1e-8);
    // The window vanishes at both ends.
    assert!(p.value(0.0).abs() <= 1e-12 && p.value(1.5).abs() <= 1e-12);
    assert!(p.l2_norm() > 0.0);
}

#[test]
fn quadrature_residual_converges_with_the_sample_count() {
    let (ms, coarse) = standard_control(1024);
    let fine = solve_moments(
        &ms,
        &SolveOptions {
            samples: 4096,
            ..SolveOptions::default()
        },
    )
    .unwrap();
    let rc = max_norm(&moment_residuals(&coarse.sampled(), &ms).unwrap());
    let rf = max_norm(&moment_residuals(&fine.sampled(), &ms).unwrap());
    assert!(rf <= (rc / 3.5).max(1e-10), "{rc:e} -> {rf:e}");
    assert!(matches!(
        moment_residuals(&SampledSignal::zero(1.5, 512), &ms),
        Err(Error::InvalidInput(_))
    ));
}

#[test]
fn exact_integrals_match_the_samples() {
    let (_, p) = standard_control(8192);
    let s = p.sampled();
    assert!((s.l2_norm() - p.l2_norm()).abs() <= 1e-6 * p.l2_norm());
    assert!((s.integral() - p.integral()).abs() <= 1e-6 * p.l2_norm());
}

#[test]
fn solve_is_deterministic() {
    let (_, a) = standard_control(2048);
    let (_, b) = standard_control(2048);
    assert_eq!(a.to_csv(), b.to_csv());
    assert!(a.to_csv().starts_with("t,p\n"));
}

#[test]
fn zero_data_gives_zero_control() {
    let ms = moment_targets(&InitialData::zero(), &control_pairs(10), 1.5).unwrap();
    let p = solve_moments(&ms, &SolveOptions::default()).unwrap();
    assert!(p.samples.iter().all(|&v| v == 0.0));
    assert_eq!(p.max_residual, 0.0);
}

#[test]
fn control_is_linear_in_the_data() {
    let pairs = control_pairs(12);
    let data = InitialData::standard();
    let doubled = InitialData {
        rho0: FourierVector::new(data.rho0.coeffs.iter().map(|(&m, &c)| (m, 2.0 * c)), 1.0, true).unwrap(),
        u0: Velocity::Closed(ExpSum::sine(1.0, 2.0)),
    };
    let opts = SolveOptions {
        samples: 2048,
        ..SolveOptions::default()
    };
    let a = solve_moments(&moment_targets(&data, &pairs, 1.5).unwrap(), &opts).unwrap();
    let b = solve_moments(&moment_targets(&doubled, &pairs, 1.5).unwrap(), &opts).unwrap();
    let scale = a.samples.iter().map(|v| v.abs()).fold(0.0, f64::max);
    for (x, y) in a.samples.iter().zip(&b.samples) {
        assert!((2.0 * x - y).abs() <= 1e-8 * scale);
    }
}

#[test]
fn ridge_and_truncated_svd_agree_on_a_small_system() {
    let ms = moment_targets(&InitialData::standard(), &control_pairs(6), 2.0).unwrap();
    let tsvd = solve_moments(&ms, &SolveOptions::default()).unwrap();
    let ridge = solve_moments(
        &ms,
        &SolveOptions {
            regularization: Regularization::Ridge { eps: 1e-12 },
            ..SolveOptions::default()
        },
    )
    .unwrap();
    assert_eq!(ridge.rank, ms.len());
    let scale = tsvd.samples.iter().map(|v| v.abs()).fold(0.0, f64::max);
    let diff = tsvd
        .samples
        .iter()
        .zip(&ridge.samples)
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    assert!(diff <= 1e-6 * scale, "{diff:e}");
}

#[test]
fn short_horizon_warns_and_bad_horizon_fails() {
    let pairs = control_pairs(6);
    let ms = moment_targets(&InitialData::standard(), &pairs, 0.9).unwrap();
    assert_eq!(ms.warnings.len(), 1);
    assert!(matches!(
        moment_targets(&InitialData::standard(), &pairs, 0.0),
        Err(Error::InvalidInput(_))
    ));
}

#[test]
fn density_with_mean_is_rejected() {
    let data = InitialData {
        rho0: FourierVector::new([(0, c64(1.0, 0.0)), (1, c64(0.5, 0.0)), (-1, c64(0.5, 0.0))], 1.0, false).unwrap(),
        u0: Velocity::Closed(ExpSum::new()),
    };
    assert!(matches!(
        moment_targets(&data, &control_pairs(4), 1.5),
        Err(Error::NotMeanZero { .. })
    ));
}

#[test]
fn inconsistent_targets_are_rejected() {
    let mut ms = moment_targets(&InitialData::standard(), &control_pairs(6), 1.5).unwrap();
    let i = ms
        .exponents
        .iter()
        .position(|e| e.branch == Some(Branch::Hyperbolic))
        .unwrap();
    ms.targets[i] += c64(0.0, 1e-3);
    assert!(matches!(ms.validate(), Err(Error::ConjugateInconsistent { .. })));
    assert!(matches!(
        solve_moments(&ms, &SolveOptions::default()),
        Err(Error::ConjugateInconsistent { .. })
    ));

    let mut lonely = moment_targets(&InitialData::standard(), &control_pairs(6), 1.5).unwrap();
    lonely.exponents.remove(i);
    lonely.targets.remove(i);
    assert!(matches!(lonely.validate(), Err(Error::Invariant(_))));
}

#[test]
fn observation_is_bounded_in_both_bands() {
    let b = observation_bands(all_pairs(), (1, 64));
    assert!(b.min_unit > 0.0);
    assert!(b.parabolic_ratio <= 100.0, "{}", b.parabolic_ratio);
    assert!(b.hyperbolic_ratio <= 100.0, "{}", b.hyperbolic_ratio);
}

#[test]
fn exponential_gram_examples() {
    let g = exponential_gram(&[c64(0.0, 0.0)], 1.5);
    assert!((g[(0, 0)].re - 1.5).abs() <= 1e-15);
    let g = exponential_gram(&[c64(-1.0, 0.0), c64(-2.0, 0.0)], 1.0);
    assert!((g[(0, 1)].re - 0.31674).abs() <= 1e-5);
}

#[test]
fn weighted_gram_is_hermitian_positive() {
    let lambdas: Vec<Complex64> = control_pairs(8).iter().map(|p| p.lambda).collect();
    let g = weighted_gram(&lambdas, 1.5, ControlWeight::default());
    let eig = nalgebra::SymmetricEigen::new(g.clone()).eigenvalues;
    assert!(eig.iter().all(|&e| e > -1e-12 * eig.max()));
    for j in 0..g.nrows() {
        for k in 0..g.ncols() {
            assert!((g[(j, k)] - g[(k, j)].conj()).norm() <= 1e-15);
        }
    }
}

#[test]
fn transport_gram_degrades_below_the_transport_time() {
    let hyp: Vec<Complex64> = control_pairs(20)
        .iter()
        .filter(|p| p.branch == Branch::Hyperbolic)
        .map(|p| p.lambda)
        .collect();
    let c15 = gram_condition(&hyp, 1.5, ControlWeight::NONE);
    let c09 = gram_condition(&hyp, 0.9, ControlWeight::NONE);
    assert!(c15.is_finite() && c15 < 100.0, "{c15}");
    assert!(c09 >= 10.0 * c15, "{c15} -> {c09}");
}

#[test]
fn dirichlet_lift_adds_the_jump() {
    let p = FnSignal {
        horizon: 1.0,
        f: |t: f64| (PI * t).sin(),
    };
    let trace = SampledSignal {
        times: (0..=10).map(|j| j as f64 / 10.0).collect(),
        values: (0..=10).map(|j| j as f64).collect(),
    };
    let h = lift_to_dirichlet(&p, &trace).unwrap();
    for j in 0..=10 {
        let t = j as f64 / 10.0;
        assert!((h.values[j] - (j as f64 + (PI * t).sin())).abs() <= 1e-15);
    }
    let other = FnSignal { horizon: 2.0, f: |_t: f64| 0.0 };
    assert!(matches!(lift_to_dirichlet(&other, &trace), Err(Error::GridMismatch(_))));
}

fn simpson(f: impl Fn(f64) -> Complex64, t: f64, n: usize) -> Complex64 {
    let h = t / n as f64;
    let mut s = f(0.0) + f(t);
    for i in 1..n {
        s += f(i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    s * (h / 3.0)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn weighted_integral_matches_quadrature(
        power in 0u32..4,
        re in -20.0f64..10.0,
        im in -60.0f64..60.0,
        horizon in 0.5f64..3.0,
    ) {
        let z = c64(re, im);
        let exact = weighted_exp_integral(power, z, horizon);
        let w = ControlWeight { power };
        let quad = simpson(|s| w.eval(s, horizon) * (z * s).exp(), horizon, 20_000);
        let scale = simpson(|s| c64(w.eval(s, horizon) * (re * s).exp(), 0.0), horizon, 20_000).re;
        prop_assert!((exact - quad).norm() <= 1e-9 * scale.max(1e-3), "{exact} vs {quad}");
    }

    #[test]
    fn weighted_integral_is_continuous_at_removable_points(power in 1u32..4, j in 1u32..4, eps in 1e-9f64..1e-3) {
        prop_assume!(j <= power);
        let horizon = 1.5;
        let z0 = c64(0.0, 2.0 * j as f64 * PI / horizon);
        let a = weighted_exp_integral(power, z0, horizon);
        let b = weighted_exp_integral(power, z0 + c64(eps, -eps), horizon);
        prop_assert!((a - b).norm() <= 10.0 * eps * horizon * horizon);
    }

    #[test]
    fn targets_do_not_depend_on_eigenfunction_scaling(re in -2.0f64..2.0, im in -2.0f64..2.0) {
        prop_assume!(re.abs() + im.abs() > 0.05);
        let pairs = control_pairs(10);
        let s = c64(re, im);
        // Conjugate partners get conjugate scales so real data stays conjugate-consistent.
        let rescaled: Vec<EigenPair> = pairs
            .iter()
            .map(|p| if p.lambda.im < 0.0 { p.rescaled(s.conj()) } else { p.rescaled(s) })
            .collect();
        let data = InitialData::standard();
        let a = moment_targets(&data, &pairs, 1.5).unwrap();
        let b = moment_targets(&data, &rescaled, 1.5).unwrap();
        for (x, y) in a.targets.iter().zip(&b.targets) {
            prop_assert!((x - y).norm() <= 1e-10 * x.norm().max(1e-12), "{x} vs {y}");
        }
    }
}
