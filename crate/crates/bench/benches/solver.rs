use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use std::hint::black_box;

use kirchhoff_bench::{gaussian, harmonic_case};
use kirchhoff_core::field::{energy, l2_gradient};
use kirchhoff_core::ground_state::solve_q;
use kirchhoff_core::minimizer::minimize;
use kirchhoff_core::potential::{analyze_wells, h_function};
use kirchhoff_core::{GridSpec, GroundState, LocalModel, PotentialSpec, WellSpec};

fn ground_state(c: &mut Criterion) {
    c.bench_function("solve_q dr=1e-3", |b| {
        b.iter(|| {
            solve_q(
                GroundState::DEFAULT_TOL,
                GroundState::DEFAULT_R_MAX,
                black_box(1e-3),
            )
            .unwrap()
        })
    });
}

fn field_ops(c: &mut Criterion) {
    let mut group = c.benchmark_group("field");
    for n in [128, 256, 512] {
        let grid = GridSpec::new(4.0, n).unwrap();
        let u = gaussian(&grid, 0.7);
        let v = PotentialSpec::harmonic().sample(&grid);
        group.bench_with_input(BenchmarkId::new("energy", n), &u, |b, u| {
            b.iter(|| energy(u, 20.0, 0.1, Some(&v)))
        });
        group.bench_with_input(BenchmarkId::new("l2_gradient", n), &u, |b, u| {
            b.iter(|| l2_gradient(u, 20.0, 0.1, Some(&v)))
        });
    }
    group.finish();
}

fn potential(c: &mut Criterion) {
    let profile = &GroundState::reference().profile;
    let well = WellSpec::new(
        [0.0, 0.0],
        2.0,
        LocalModel::Anisotropic { c1: 1.0, c2: 4.0 },
    );
    c.bench_function("h_function", |b| {
        b.iter(|| h_function(&well, profile, black_box([0.3, -0.2])).unwrap())
    });
    let two = PotentialSpec::product(vec![
        WellSpec::isotropic([-1.0, 0.0], 2.0),
        WellSpec::isotropic([1.0, 0.0], 4.0),
    ]);
    c.bench_function("analyze_wells two-well", |b| {
        b.iter(|| analyze_wells(&two, profile).unwrap())
    });
}

fn minimizer(c: &mut Criterion) {
    let mut group = c.benchmark_group("minimize");
    group.sample_size(10);
    for accelerate in [true, false] {
        let (problem, mut config) = harmonic_case(0.05, 193);
        config.accelerate = accelerate;
        let label = if accelerate { "accelerated" } else { "plain" };
        group.bench_function(BenchmarkId::new("harmonic b=0.05 n=193", label), |b| {
            b.iter(|| minimize(&problem, &config).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, ground_state, field_ops, potential, minimizer);
criterion_main!(benches);
