//! Hot kernels on one thread versus the default rayon pool.
//!
//! With `--no-default-features` both variants run the sequential code path,
//! which gives the baseline for the parallel build.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use goal::global_op::{apply_global, apply_global_adjoint, GlobalOperatorConfig, MeasurementOperator};
use goal::objective::{sparsity_grad, AnalysisOperator, TrainingSet};
use goal::oblique::random_point;
use goal::patches::Image;
use goal::reconstruct::{recon_grad, ReconstructionProblem};
use ndarray::Array2;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::ThreadPool;

fn pools() -> Vec<(String, ThreadPool)> {
    let default = rayon::current_num_threads();
    let build = |n| rayon::ThreadPoolBuilder::new().num_threads(n).build().unwrap();
    vec![("1 thread".to_string(), build(1)), (format!("default pool ({default})"), build(default))]
}

fn operator() -> AnalysisOperator {
    AnalysisOperator::from_point(&random_point(64, 128, 1).unwrap(), 8).unwrap()
}

fn image(h: usize, w: usize) -> Image {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    Image::new(Array2::from_shape_simple_fn((h, w), || rng.random_range(0.0..255.0))).unwrap()
}

fn global_operator(c: &mut Criterion) {
    let op = operator();
    let img = image(128, 128);
    let cfg = GlobalOperatorConfig::dense(8, 128, 128);
    let z = apply_global(&op, &img, &cfg).unwrap();
    let mut group = c.benchmark_group("global_operator_128x128");
    group.sample_size(10);
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::new("forward", &name), |b| {
            pool.install(|| b.iter(|| apply_global(&op, &img, &cfg).unwrap()))
        });
        group.bench_function(BenchmarkId::new("adjoint", &name), |b| {
            pool.install(|| b.iter(|| apply_global_adjoint(&op, z.view(), &cfg).unwrap()))
        });
    }
    group.finish();
}

fn learning_gradient(c: &mut Criterion) {
    let op = operator();
    let samples = TrainingSet::new(random_point(64, 20_000, 3).unwrap().into_inner()).unwrap();
    let mut group = c.benchmark_group("sparsity_gradient_20000");
    group.sample_size(10);
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::from_parameter(&name), |b| {
            pool.install(|| b.iter(|| sparsity_grad(op.view(), &samples, 0.4, 1e-6).unwrap()))
        });
    }
    group.finish();
}

fn reconstruction_gradient(c: &mut Criterion) {
    let img = image(128, 128);
    let prob = ReconstructionProblem::new(MeasurementOperator::identity(128, 128), img.to_vector(), operator(), 1.25)
        .unwrap();
    let mut group = c.benchmark_group("reconstruction_gradient_128x128");
    group.sample_size(10);
    for (name, pool) in pools() {
        group.bench_function(BenchmarkId::from_parameter(&name), |b| {
            pool.install(|| b.iter(|| recon_grad(&img, &prob).unwrap()))
        });
    }
    group.finish();
}

criterion_group!(kernels, global_operator, learning_gradient, reconstruction_gradient);
criterion_main!(kernels);
