use criterion::{black_box, criterion_group, criterion_main, Criterion};
use navicontrol::control::{moment_targets, solve_moments, weighted_gram, ControlWeight, InitialData, SolveOptions};
use navicontrol::sim::{simulate_forward, SimConfig};
use navicontrol::spectral::{build_all, compute_spectrum, SpectrumConfig};
use navicontrol::{Branch, EigenPair};

const T: f64 = 1.5;

fn spectrum_config(k: i64) -> SpectrumConfig {
    SpectrumConfig {
        k_para: (1, k),
        k_hyp: (1, k),
        ..SpectrumConfig::default()
    }
}

fn control_pairs(k: i64) -> Vec<EigenPair> {
    let spec = compute_spectrum(&spectrum_config(k)).unwrap();
    build_all(&spec)
        .unwrap()
        .into_iter()
        .filter(|p| p.branch == Branch::Low || p.k.abs() <= k)
        .collect()
}

fn spectrum(c: &mut Criterion) {
    c.bench_function("spectrum k<=16", |b| b.iter(|| compute_spectrum(black_box(&spectrum_config(16))).unwrap()));
}

fn control(c: &mut Criterion) {
    let pairs = control_pairs(20);
    let ms = moment_targets(&InitialData::standard(), &pairs, T).unwrap();
    c.bench_function("weighted gram 20+20", |b| {
        b.iter(|| weighted_gram(black_box(&ms.lambdas()), T, ControlWeight::default()))
    });
    c.bench_function("solve moments 20+20", |b| {
        b.iter(|| solve_moments(black_box(&ms), &SolveOptions::default()).unwrap())
    });
}

fn simulation(c: &mut Criterion) {
    let ms = moment_targets(&InitialData::standard(), &control_pairs(8), T).unwrap();
    let p = solve_moments(&ms, &SolveOptions::default()).unwrap();
    let cfg = SimConfig::new(128, 256, T);
    let u0 = InitialData::standard().to_state(128).unwrap();
    let mut group = c.benchmark_group("simulation");
    group.sample_size(10);
    group.bench_function("forward n=128", |b| b.iter(|| simulate_forward(black_box(&u0), &p, &cfg).unwrap()));
    group.finish();
}

criterion_group!(benches, spectrum, control, simulation);
criterion_main!(benches);
