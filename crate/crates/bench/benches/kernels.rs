use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use floquet_lattice::{compute_spectrum, eigen_decompose, evolve, monodromy, q_gamma, ClassifyParams, EvolveOptions};
use floquet_lattice_bench::{central_site, dark_point};

fn bessel_sums(c: &mut Criterion) {
    let mut group = c.benchmark_group("q_gamma");
    for harmonics in [10usize, 20, 40] {
        group.bench_with_input(BenchmarkId::from_parameter(harmonics), &harmonics, |b, &l| {
            b.iter(|| q_gamma(black_box(2.4308), l))
        });
    }
    group.finish();
}

fn propagation(c: &mut Criterion) {
    let config = dark_point();
    let initial = central_site(&config);
    let mut group = c.benchmark_group("evolve_one_period");
    for spp in [256usize, 2048] {
        let options = EvolveOptions::new(config.drive().period()).steps_per_period(spp).sample_every(0);
        group.bench_with_input(BenchmarkId::from_parameter(spp), &options, |b, o| {
            b.iter(|| evolve(&config, black_box(&initial), o).unwrap())
        });
    }
    group.finish();
}

fn spectra(c: &mut Criterion) {
    let config = dark_point();
    let mut group = c.benchmark_group("spectrum");
    group.sample_size(10);
    group.bench_function("monodromy_spp256", |b| b.iter(|| monodromy(black_box(&config), 256).unwrap()));
    let u = monodromy(&config, 256).unwrap();
    group.bench_function("eigen_decompose_101", |b| b.iter(|| eigen_decompose(black_box(&u)).unwrap()));
    group.bench_function("compute_spectrum_spp2048", |b| {
        b.iter(|| compute_spectrum(black_box(&config), 2048, &ClassifyParams::default()).unwrap())
    });
    group.finish();
}

criterion_group!(benches, bessel_sums, propagation, spectra);
criterion_main!(benches);
