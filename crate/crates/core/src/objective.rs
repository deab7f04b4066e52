//! The operator-learning cost and its gradients.
//!
//! For the transposed operator `X = Ωᵀ ∈ OB(n, k)` and training patches
//! `S ∈ R^{n×M}` the learner minimizes
//!
//! ```text
//! f(X) = J_{p,ν}(XᵀS) + κ·h(Xᵀ) + μ·r(Xᵀ)
//! J_{p,ν}(V) = 1/(2M) Σ_j ( 1/p Σ_i (v_ij² + ν)^{p/2} )²
//! h(Ω)       = −1/(n log n) · log det(ΩᵀΩ / k)
//! r(Ω)       = −Σ_{i<j} log(1 − (ω_iᵀω_j)²)
//! ```
//!
//! `J` is the squared empirical mean plus the empirical variance of the
//! per-patch sparsity, `h` keeps `Ω` away from rank deficiency (it is `≥ 1` on
//! the manifold and equals 1 exactly at tight frames) and `r` is a log-barrier
//! against (anti)parallel atoms. Barrier blow-ups are reported as `+∞` so a
//! line search simply shrinks the step.

use ndarray::{s, Array2, ArrayView2, Axis};

use crate::error::{Error, Result};
use crate::linalg;
use crate::oblique::{project_tangent, ObliquePoint, TangentVector};
use crate::par;

/// Training columns per parallel work item.
const SAMPLE_CHUNK: usize = 1024;

/// Unit-norm training patches stored as the columns of an `n × M` matrix.
#[derive(Debug, Clone)]
pub struct TrainingSet {
    data: Array2<f64>,
}

impl TrainingSet {
    pub fn new(data: Array2<f64>) -> Result<Self> {
        if data.ncols() == 0 || data.nrows() == 0 {
            return Err(Error::Domain("training set is empty".into()));
        }
        let worst = data
            .columns()
            .into_iter()
            .map(|c| (c.dot(&c).sqrt() - 1.0).abs())
            .fold(0.0, f64::max);
        if !(worst <= 1e-10) {
            return Err(Error::Domain(format!(
                "training samples must have unit norm (max deviation {worst:e})"
            )));
        }
        Ok(Self { data })
    }

    /// Patch dimension `n`.
    pub fn dim(&self) -> usize {
        self.data.nrows()
    }

    /// Number of samples `M`.
    pub fn len(&self) -> usize {
        self.data.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.data.ncols() == 0
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.data.view()
    }
}

/// Weights and smoothing of the learning cost.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LearnParams {
    pub p: f64,
    pub nu: f64,
    pub kappa: f64,
    pub mu: f64,
}

impl Default for LearnParams {
    fn default() -> Self {
        Self {
            p: 0.4,
            nu: 1e-6,
            kappa: 9000.0,
            mu: 0.01,
        }
    }
}

impl LearnParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.p > 0.0 && self.p <= 1.0) {
            return Err(Error::param(format!("p must lie in (0, 1], got {}", self.p)));
        }
        if !(self.nu > 0.0) {
            return Err(Error::param(format!("nu must be positive, got {}", self.nu)));
        }
        if !(self.kappa >= 0.0) || !(self.mu >= 0.0) {
            return Err(Error::param("kappa and mu must be nonnegative"));
        }
        Ok(())
    }
}

/// A learned `k × n` analysis operator with unit-norm rows (atoms).
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisOperator {
    data: Array2<f64>,
    patch_side: usize,
}

impl AnalysisOperator {
    /// Checks shape (`n = patch_side²`, `k ≥ n`), unit rows to `row_tol` and
    /// full column rank.
    pub fn with_tolerance(data: Array2<f64>, patch_side: usize, row_tol: f64) -> Result<Self> {
        let (k, n) = data.dim();
        if patch_side == 0 || n != patch_side * patch_side {
            return Err(Error::dim(format!(
                "operator has {n} columns, expected patch_side² = {}",
                patch_side * patch_side
            )));
        }
        if k < n {
            return Err(Error::dim(format!("operator needs k >= n, got k={k}, n={n}")));
        }
        let worst = data
            .rows()
            .into_iter()
            .map(|r| (r.dot(&r).sqrt() - 1.0).abs())
            .fold(0.0, f64::max);
        if !(worst <= row_tol) {
            return Err(Error::Domain(format!(
                "operator rows must have unit norm (max deviation {worst:e})"
            )));
        }
        let smin = linalg::singular_values(data.view())
            .last()
            .copied()
            .unwrap_or(0.0);
        if smin <= 1e-12 {
            return Err(Error::Domain("operator does not have full rank".into()));
        }
        Ok(Self { data, patch_side })
    }

    pub fn new(data: Array2<f64>, patch_side: usize) -> Result<Self> {
        Self::with_tolerance(data, patch_side, 1e-10)
    }

    /// `Ω = Xᵀ`.
    pub fn from_point(x: &ObliquePoint, patch_side: usize) -> Result<Self> {
        Self::new(x.view().t().to_owned(), patch_side)
    }

    /// An operator that is not required to be a valid learned operator, e.g.
    /// a handcrafted finite-difference filter bank used in reconstruction
    /// experiments. Only the shape is checked.
    pub fn handcrafted(data: Array2<f64>, patch_side: usize) -> Result<Self> {
        let n = data.ncols();
        if patch_side == 0 || n != patch_side * patch_side {
            return Err(Error::dim(format!(
                "operator has {n} columns, expected patch_side² = {}",
                patch_side * patch_side
            )));
        }
        Ok(Self { data, patch_side })
    }

    /// `X = Ωᵀ` as a point of the oblique manifold.
    pub fn to_point(&self) -> Result<ObliquePoint> {
        ObliquePoint::new(self.data.t().to_owned())
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.data.view()
    }

    /// Number of atoms `k`.
    pub fn atoms(&self) -> usize {
        self.data.nrows()
    }

    /// Patch dimension `n`.
    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    pub fn patch_side(&self) -> usize {
        self.patch_side
    }

    /// `max_{i≠j} |ω_iᵀω_j|`.
    pub fn mutual_coherence(&self) -> f64 {
        mutual_coherence(self.data.view())
    }

    pub fn condition_number(&self) -> f64 {
        linalg::condition_number(self.data.view())
    }
}

/// `max_{i≠j} |ω_iᵀω_j|` over the rows of `omega`.
pub fn mutual_coherence(omega: ArrayView2<f64>) -> f64 {
    let g = omega.dot(&omega.t());
    let k = g.nrows();
    let mut m = 0.0f64;
    for i in 0..k {
        for j in (i + 1)..k {
            m = m.max(g[[i, j]].abs());
        }
    }
    m
}

/// `J_{p,ν}(V) = 1/(2M) Σ_j (1/p Σ_i (v_ij² + ν)^{p/2})²` for a `k × M` matrix.
pub fn sparsity_cost(v: ArrayView2<f64>, p: f64, nu: f64) -> Result<f64> {
    let m = v.ncols();
    if m == 0 || v.nrows() == 0 {
        return Err(Error::Domain("sparsity cost of an empty matrix".into()));
    }
    let half_p = 0.5 * p;
    let total = par::chunked_sum(m, SAMPLE_CHUNK, |cols| {
        v.slice(s![.., cols])
            .columns()
            .into_iter()
            .map(|c| {
                let g = c.fold(0.0, |acc, &z| acc + (z * z + nu).powf(half_p)) / p;
                g * g
            })
            .sum()
    });
    Ok(total / (2.0 * m as f64))
}

/// Cost and (optionally) gradient of `Ω ↦ J_{p,ν}(ΩS)` with `ΩS` formed once
/// per chunk of samples.
fn sparsity_terms(
    omega: ArrayView2<f64>,
    samples: ArrayView2<f64>,
    p: f64,
    nu: f64,
    with_grad: bool,
) -> (f64, Option<Array2<f64>>) {
    let m = samples.ncols();
    let (k, n) = omega.dim();
    let half_p = 0.5 * p;
    let chunks = par::chunk_count(m, SAMPLE_CHUNK);
    let partials = par::map_collect(chunks, |c| {
        let start = c * SAMPLE_CHUNK;
        let block = samples.slice(s![.., start..(start + SAMPLE_CHUNK).min(m)]);
        let mut z = omega.dot(&block);
        let mut cost = 0.0;
        for mut col in z.columns_mut() {
            let mut g = 0.0;
            for &v in col.iter() {
                g += (v * v + nu).powf(half_p);
            }
            g /= p;
            cost += g * g;
            if with_grad {
                // overwrite z_ij with g_j · z_ij (z_ij² + ν)^{p/2 − 1}
                col.mapv_inplace(|v| g * v * (v * v + nu).powf(half_p - 1.0));
            }
        }
        let grad = with_grad.then(|| z.dot(&block.t()));
        (cost, grad)
    });
    let mut cost = 0.0;
    let mut grad = with_grad.then(|| Array2::<f64>::zeros((k, n)));
    for (c, g) in partials {
        cost += c;
        if let (Some(acc), Some(g)) = (grad.as_mut(), g) {
            *acc += &g;
        }
    }
    let inv_m = 1.0 / m as f64;
    if let Some(g) = grad.as_mut() {
        g.mapv_inplace(|v| v * inv_m);
    }
    (0.5 * cost * inv_m, grad)
}

/// Euclidean gradient of `Ω ↦ J_{p,ν}(ΩS)`, a `k × n` matrix.
pub fn sparsity_grad(omega: ArrayView2<f64>, s: &TrainingSet, p: f64, nu: f64) -> Result<Array2<f64>> {
    if omega.ncols() != s.dim() {
        return Err(Error::dim(format!(
            "operator has {} columns, training patches have dimension {}",
            omega.ncols(),
            s.dim()
        )));
    }
    let (_, g) = sparsity_terms(omega, s.view(), p, nu, true);
    Ok(g.expect("gradient requested"))
}

fn rank_scale(omega: ArrayView2<f64>) -> Result<f64> {
    let n = omega.ncols() as f64;
    if omega.ncols() < 2 {
        return Err(Error::param("rank penalty needs n >= 2"));
    }
    Ok(n * n.ln())
}

/// `h(Ω) = −1/(n log n) · log det(ΩᵀΩ/k)`; `+∞` when `ΩᵀΩ` is singular.
pub fn rank_penalty(omega: ArrayView2<f64>) -> Result<f64> {
    let scale = rank_scale(omega)?;
    let k = omega.nrows() as f64;
    let gram = omega.t().dot(&omega) / k;
    Ok(match linalg::spd_log_det(gram.view()) {
        Some(ld) => -ld / scale,
        None => f64::INFINITY,
    })
}

/// `∂h/∂Ω = −2/(k n log n) · Ω (ΩᵀΩ/k)⁻¹`.
pub fn rank_penalty_grad(omega: ArrayView2<f64>) -> Result<Array2<f64>> {
    let scale = rank_scale(omega)?;
    let k = omega.nrows() as f64;
    let gram = omega.t().dot(&omega) / k;
    let inv = linalg::spd_inverse(gram.view())
        .ok_or_else(|| Error::Singular("ΩᵀΩ is not positive definite".into()))?;
    Ok(omega.dot(&inv) * (-2.0 / (k * scale)))
}

/// Gram matrix `ΩΩᵀ`, or `None` if two rows are (anti)parallel.
fn row_gram(omega: ArrayView2<f64>) -> (Array2<f64>, bool) {
    let g = omega.dot(&omega.t());
    let k = g.nrows();
    let mut inside = true;
    'outer: for i in 0..k {
        for j in (i + 1)..k {
            if !(g[[i, j]].abs() < 1.0) {
                inside = false;
                break 'outer;
            }
        }
    }
    (g, inside)
}

/// `r(Ω) = −Σ_{i<j} log(1 − (ω_iᵀω_j)²)`; `+∞` at the barrier.
pub fn coherence_penalty(omega: ArrayView2<f64>) -> f64 {
    let (g, inside) = row_gram(omega);
    if !inside {
        return f64::INFINITY;
    }
    let k = g.nrows();
    let mut acc = 0.0;
    for i in 0..k {
        for j in (i + 1)..k {
            let c = g[[i, j]];
            acc -= (1.0 - c * c).ln();
        }
    }
    if acc.is_finite() {
        acc
    } else {
        f64::INFINITY
    }
}

/// `∂r/∂Ω = C·Ω` with `C_ij = 2 g_ij / (1 − g_ij²)` off the diagonal.
pub fn coherence_penalty_grad(omega: ArrayView2<f64>) -> Result<Array2<f64>> {
    let (mut c, inside) = row_gram(omega);
    if !inside {
        return Err(Error::Singular("two operator rows are linearly dependent".into()));
    }
    let k = c.nrows();
    for i in 0..k {
        for j in 0..k {
            c[[i, j]] = if i == j {
                0.0
            } else {
                let g = c[[i, j]];
                2.0 * g / (1.0 - g * g)
            };
        }
    }
    Ok(c.dot(&omega))
}

/// The learning cost for a fixed training set and parameters.
#[derive(Debug, Clone, Copy)]
pub struct LearningObjective<'a> {
    samples: &'a TrainingSet,
    params: LearnParams,
}

impl<'a> LearningObjective<'a> {
    pub fn new(samples: &'a TrainingSet, params: LearnParams) -> Result<Self> {
        params.validate()?;
        if samples.dim() < 2 {
            return Err(Error::param("patch dimension must be at least 2"));
        }
        Ok(Self { samples, params })
    }

    pub fn params(&self) -> LearnParams {
        self.params
    }

    pub fn samples(&self) -> &TrainingSet {
        self.samples
    }

    fn check(&self, x: &ObliquePoint) -> Result<()> {
        if x.n() != self.samples.dim() {
            return Err(Error::dim(format!(
                "point has {} rows, training patches have dimension {}",
                x.n(),
                self.samples.dim()
            )));
        }
        Ok(())
    }

    /// `f(X)`; `+∞` if a barrier is hit.
    pub fn cost(&self, x: &ObliquePoint) -> Result<f64> {
        self.check(x)?;
        let omega = x.view().reversed_axes();
        let (j, _) = sparsity_terms(omega, self.samples.view(), self.params.p, self.params.nu, false);
        Ok(j + self.penalties(omega)?)
    }

    fn penalties(&self, omega: ArrayView2<f64>) -> Result<f64> {
        let mut acc = 0.0;
        if self.params.kappa > 0.0 {
            acc += self.params.kappa * rank_penalty(omega)?;
        }
        if self.params.mu > 0.0 {
            acc += self.params.mu * coherence_penalty(omega);
        }
        Ok(acc)
    }

    /// `f(X)` and the Euclidean gradient `∇f(X)` (`n × k`).
    pub fn cost_and_euclidean_grad(&self, x: &ObliquePoint) -> Result<(f64, Array2<f64>)> {
        self.check(x)?;
        let omega = x.view().reversed_axes();
        let (j, g) = sparsity_terms(omega, self.samples.view(), self.params.p, self.params.nu, true);
        let mut grad = g.expect("gradient requested");
        let cost = j + self.penalties(omega)?;
        if self.params.kappa > 0.0 {
            grad.scaled_add(self.params.kappa, &rank_penalty_grad(omega)?);
        }
        if self.params.mu > 0.0 {
            grad.scaled_add(self.params.mu, &coherence_penalty_grad(omega)?);
        }
        Ok((cost, grad.reversed_axes()))
    }

    /// `f(X)` and the Riemannian gradient `Π_{T_X OB}(∇f(X))`.
    pub fn cost_and_grad(&self, x: &ObliquePoint) -> Result<(f64, TangentVector)> {
        let (cost, egrad) = self.cost_and_euclidean_grad(x)?;
        Ok((cost, project_tangent(x, egrad.view())?))
    }
}

/// `f(X) = J_{p,ν}(XᵀS) + κ h(Xᵀ) + μ r(Xᵀ)`.
pub fn total_cost(x: &ObliquePoint, s: &TrainingSet, params: LearnParams) -> Result<f64> {
    LearningObjective::new(s, params)?.cost(x)
}

/// Riemannian gradient of [`total_cost`].
pub fn riemannian_grad(x: &ObliquePoint, s: &TrainingSet, params: LearnParams) -> Result<TangentVector> {
    Ok(LearningObjective::new(s, params)?.cost_and_grad(x)?.1)
}

/// Per-sample sparsity `g(Ω s_j) = 1/p Σ_i |(Ω s_j)_i|^p`, used for diagnostics.
pub fn sample_sparsity(omega: ArrayView2<f64>, s: &TrainingSet, p: f64) -> Vec<f64> {
    let z = omega.dot(&s.view());
    z.axis_iter(Axis(1))
        .map(|c| c.fold(0.0, |acc, &v| acc + v.abs().powf(p)) / p)
        .collect()
}
