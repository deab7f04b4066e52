#![allow(dead_code)]

use std::path::PathBuf;

use goal::objective::TrainingSet;
use goal::patches::Image;
use ndarray::{Array1, Array2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

pub const FD_STEP: f64 = 1e-6;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn gaussian_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    Array2::from_shape_simple_fn((rows, cols), || rng.sample::<f64, _>(StandardNormal))
}

pub fn gaussian_vector(len: usize, rng: &mut ChaCha8Rng) -> Array1<f64> {
    Array1::from_shape_simple_fn(len, || rng.sample::<f64, _>(StandardNormal))
}

/// Matrix with unit-norm rows.
pub fn unit_rows(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> Array2<f64> {
    let mut m = gaussian_matrix(rows, cols, rng);
    for mut r in m.rows_mut() {
        let n = r.dot(&r).sqrt();
        r /= n;
    }
    m
}

/// `M` unit-norm random columns of dimension `n`.
pub fn random_training_set(n: usize, m: usize, rng: &mut ChaCha8Rng) -> TrainingSet {
    TrainingSet::new(unit_rows(m, n, rng).reversed_axes()).unwrap()
}

pub fn uniform_image(h: usize, w: usize, lo: f64, hi: f64, rng: &mut ChaCha8Rng) -> Image {
    Image::new(Array2::from_shape_simple_fn((h, w), || rng.random_range(lo..hi))).unwrap()
}

/// Central differences of `f` at `x` in every coordinate.
pub fn fd_gradient(x: &Array2<f64>, step: f64, mut f: impl FnMut(&Array2<f64>) -> f64) -> Array2<f64> {
    let mut g = Array2::zeros(x.dim());
    let mut probe = x.clone();
    for idx in ndarray::indices(x.dim()) {
        let orig = probe[idx];
        probe[idx] = orig + step;
        let up = f(&probe);
        probe[idx] = orig - step;
        let down = f(&probe);
        probe[idx] = orig;
        g[idx] = (up - down) / (2.0 * step);
    }
    g
}

/// `‖a − b‖_F / ‖b‖_F`.
pub fn rel_err(a: &Array2<f64>, b: &Array2<f64>) -> f64 {
    let diff = a - b;
    diff.iter().map(|v| v * v).sum::<f64>().sqrt() / b.iter().map(|v| v * v).sum::<f64>().sqrt()
}

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

pub fn load(rel: &str) -> Image {
    goal::io::read_pgm(&data_dir().join(rel)).unwrap()
}

pub fn training_images() -> Vec<Image> {
    ["astronaut", "coffee", "rocket"]
        .iter()
        .map(|n| load(&format!("train/{n}.pgm")))
        .collect()
}

/// Largest `|x_iᵀx_j| − 1` over distinct columns (must stay ≤ 1e-12).
pub fn lemma2_excess(x: ndarray::ArrayView2<f64>) -> f64 {
    let g = x.t().dot(&x);
    let k = g.nrows();
    let mut worst = f64::NEG_INFINITY;
    for i in 0..k {
        for j in (i + 1)..k {
            worst = worst.max(g[[i, j]].abs() - 1.0);
        }
    }
    worst
}

/// `det(XXᵀ/k)` via the eigenvalues of the Gram matrix, and the bound `(1/n)ⁿ`.
pub fn lemma1_det_and_bound(x: ndarray::ArrayView2<f64>) -> (f64, f64) {
    let (n, k) = x.dim();
    let gram = x.dot(&x.t()) / k as f64;
    let det: f64 = goal::linalg::sym_eigenvalues(gram.view()).iter().product();
    (det, (1.0 / n as f64).powi(n as i32))
}

/// `max_{i<j} (|ω_iᵀs − ω_jᵀs| − sqrt(2(1 − ω_iᵀω_j))‖s‖)` for unit rows of `omega`.
pub fn lemma4_excess(omega: ndarray::ArrayView2<f64>, s: ndarray::ArrayView1<f64>) -> f64 {
    let z = omega.dot(&s);
    let ns = s.dot(&s).sqrt();
    let k = omega.nrows();
    let mut worst = f64::NEG_INFINITY;
    for i in 0..k {
        for j in (i + 1)..k {
            let c = omega.row(i).dot(&omega.row(j));
            let bound = (2.0 * (1.0 - c)).max(0.0).sqrt() * ns;
            worst = worst.max((z[i] - z[j]).abs() - bound);
        }
    }
    worst
}

/// Unit-norm harmonic frame: `k` directions in the plane at angles `πi/k`,
/// stacked as a `k × 2` operator. Tight for `k ≥ 2`.
pub fn planar_harmonic_frame(k: usize) -> Array2<f64> {
    Array2::from_shape_fn((k, 2), |(i, j)| {
        let a = std::f64::consts::PI * i as f64 / k as f64;
        if j == 0 { a.cos() } else { a.sin() }
    })
}
