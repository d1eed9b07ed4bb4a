use std::hint::black_box;

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use dips_core::constants::bennett_nu;
use dips_core::linalg::{operator_norm, OPNORM_TOL};
use dips_core::perm::{evaluate_dips, sample_uniform};
use dips_core::tensor::hoeffding_decompose;
use dips_core::verify::{empirical_tail, Mode};
use dips_core::{gen, RngSeed};

fn decompose(c: &mut Criterion) {
    let mut group = c.benchmark_group("decompose");
    for n in [6, 10, 14] {
        let t = gen::dense_tensor(&mut RngSeed::new(1).rng(), n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &t, |b, t| {
            b.iter(|| hoeffding_decompose(black_box(t)).unwrap())
        });
    }
    group.finish();
}

fn evaluate(c: &mut Criterion) {
    let mut group = c.benchmark_group("evaluate_dips");
    let mut rng = RngSeed::new(2).rng();
    let p = sample_uniform(20, RngSeed::new(3)).unwrap();
    for (label, t) in [("dense", gen::dense_tensor(&mut rng, 20)), ("product", gen::product_tensor(&mut rng, 20))] {
        group.bench_function(label, |b| b.iter(|| evaluate_dips(black_box(&t), black_box(&p), true).unwrap()));
    }
    group.finish();
}

fn opnorm(c: &mut Criterion) {
    let mut group = c.benchmark_group("operator_norm");
    for n in [20, 100] {
        let m = gen::gaussian_matrix(&mut RngSeed::new(4).rng(), n, n);
        group.bench_with_input(BenchmarkId::from_parameter(n), &m, |b, m| {
            b.iter(|| operator_norm(black_box(m), OPNORM_TOL).unwrap())
        });
    }
    group.finish();
}

fn nu(c: &mut Criterion) {
    let mut group = c.benchmark_group("bennett_nu");
    for n in [10, 20, 40] {
        let mut rng = RngSeed::new(5).rng();
        let cm = gen::centered_zero_diagonal(&mut rng, n);
        let a = gen::uniform_matrix(&mut rng, n, n);
        group.bench_function(BenchmarkId::from_parameter(n), |b| {
            b.iter(|| bennett_nu(black_box(&cm), black_box(&a), 0).unwrap())
        });
    }
    group.finish();
}

fn monte_carlo(c: &mut Criterion) {
    let mut group = c.benchmark_group("empirical_tail");
    group.sample_size(10);
    let t = gen::degenerate_tensor(&mut RngSeed::new(6).rng(), 20);
    let grid: Vec<f64> = (0..50).map(|k| k as f64 * 0.5).collect();
    group.bench_function("mc_n20_r10000", |b| {
        b.iter(|| empirical_tail(&t, Mode::Mc { replicates: 10_000, seed: 7 }, true, black_box(&grid)).unwrap())
    });
    group.bench_function("exact_n7", |b| {
        let t7 = gen::dense_tensor(&mut RngSeed::new(8).rng(), 7);
        b.iter(|| empirical_tail(&t7, Mode::Exact, true, black_box(&grid)).unwrap())
    });
    group.finish();
}

criterion_group!(benches, decompose, evaluate, opnorm, nu, monte_carlo);
criterion_main!(benches);
