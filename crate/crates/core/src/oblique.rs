//! Geometry of the oblique manifold `OB(n, k)`.
//!
//! `OB(n, k)` is the set of full-rank `n × k` matrices (`k ≥ n`) whose columns
//! have unit Euclidean norm. It is an open subset of the product of `k` unit
//! spheres `S^{n-1}`, so geodesics and parallel transport act column by
//! column with the great-circle formulas.
//!
//! The learned analysis operator is stored transposed: `X = Ωᵀ`, so the
//! unit-norm *rows* of `Ω` are the unit-norm *columns* of `X`.

use ndarray::{Array1, Array2, ArrayView1, ArrayView2, ArrayViewMut1, Axis, Zip};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::linalg;

/// Column-norm tolerance for membership checks.
pub const UNIT_TOL: f64 = 1e-10;
/// Smallest admissible singular value for a valid point.
pub const RANK_TOL: f64 = 1e-12;
/// `random_point` re-draws below this smallest singular value.
const DRAW_RANK_TOL: f64 = 1e-6;

/// A point of `OB(n, k)`.
#[derive(Debug, Clone, PartialEq)]
pub struct ObliquePoint {
    data: Array2<f64>,
}

impl ObliquePoint {
    /// Validates unit columns (to [`UNIT_TOL`]), `k ≥ n` and full rank.
    pub fn new(data: Array2<f64>) -> Result<Self> {
        let (n, k) = data.dim();
        if n == 0 || k < n {
            return Err(Error::dim(format!("OB(n,k) needs 0 < n <= k, got {n}x{k}")));
        }
        let err = max_column_norm_error(data.view());
        if err > UNIT_TOL {
            return Err(Error::Domain(format!(
                "columns are not unit norm (max deviation {err:e})"
            )));
        }
        let smin = linalg::singular_values(data.view())
            .last()
            .copied()
            .unwrap_or(0.0);
        if smin <= RANK_TOL {
            return Err(Error::Domain(format!(
                "matrix is rank deficient (smallest singular value {smin:e})"
            )));
        }
        Ok(Self { data })
    }

    /// Normalizes every column and validates the result.
    pub fn from_unnormalized(mut data: Array2<f64>) -> Result<Self> {
        for mut col in data.columns_mut() {
            let nrm = col.dot(&col).sqrt();
            if nrm == 0.0 {
                return Err(Error::Domain("zero column cannot be normalized".into()));
            }
            col /= nrm;
        }
        Self::new(data)
    }

    /// Wraps a matrix produced by a geodesic step; rank is not rechecked.
    pub(crate) fn from_raw(data: Array2<f64>) -> Self {
        Self { data }
    }

    pub fn n(&self) -> usize {
        self.data.nrows()
    }

    pub fn k(&self) -> usize {
        self.data.ncols()
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.data.view()
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.data
    }

    /// Largest `| ‖x_j‖ − 1 |` over the columns.
    pub fn column_norm_error(&self) -> f64 {
        max_column_norm_error(self.data.view())
    }
}

/// A tangent vector `Ξ` with `ddiag(XᵀΞ) = 0` at some base point `X`.
///
/// The base point is not stored; [`TangentVector::tangency_error`] checks the
/// relation against a given point.
#[derive(Debug, Clone, PartialEq)]
pub struct TangentVector {
    data: Array2<f64>,
}

impl TangentVector {
    pub fn zeros(n: usize, k: usize) -> Self {
        Self {
            data: Array2::zeros((n, k)),
        }
    }

    /// Wraps a matrix the caller knows to be tangent.
    pub fn from_raw(data: Array2<f64>) -> Self {
        Self { data }
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.data.view()
    }

    pub fn into_inner(self) -> Array2<f64> {
        self.data
    }

    /// Frobenius inner product `tr(AᵀB)`.
    pub fn inner(&self, other: &TangentVector) -> f64 {
        frobenius_inner(self.data.view(), other.data.view())
    }

    pub fn norm(&self) -> f64 {
        self.inner(self).sqrt()
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &TangentVector, b: f64) -> TangentVector {
        let mut out = self.data.clone();
        Zip::from(&mut out)
            .and(&other.data)
            .for_each(|o, &v| *o = a * *o + b * v);
        TangentVector { data: out }
    }

    /// Largest `|x_jᵀ ξ_j|` over the columns.
    pub fn tangency_error(&self, x: &ObliquePoint) -> f64 {
        x.data
            .columns()
            .into_iter()
            .zip(self.data.columns())
            .map(|(xc, hc)| xc.dot(&hc).abs())
            .fold(0.0, f64::max)
    }
}

pub(crate) fn frobenius_inner(a: ArrayView2<f64>, b: ArrayView2<f64>) -> f64 {
    Zip::from(a).and(b).fold(0.0, |acc, &x, &y| acc + x * y)
}

fn max_column_norm_error(a: ArrayView2<f64>) -> f64 {
    a.columns()
        .into_iter()
        .map(|c| (c.dot(&c).sqrt() - 1.0).abs())
        .fold(0.0, f64::max)
}

/// Orthogonal projection `Q − X·ddiag(XᵀQ)` onto the tangent space at `X`.
pub fn project_tangent(x: &ObliquePoint, q: ArrayView2<f64>) -> Result<TangentVector> {
    if q.dim() != x.data.dim() {
        return Err(Error::dim(format!(
            "cannot project {:?} onto tangent space of {:?}",
            q.dim(),
            x.data.dim()
        )));
    }
    let mut out = q.to_owned();
    for (mut oc, xc) in out.columns_mut().into_iter().zip(x.data.columns()) {
        // dividing by ‖x‖² keeps the result tangent when rounding has moved
        // x slightly off the sphere and q has a large normal component
        let d = xc.dot(&oc) / xc.dot(&xc);
        oc.scaled_add(-d, &xc);
    }
    Ok(TangentVector { data: out })
}

/// Great circle through unit vector `x` with initial velocity `h` (`xᵀh = 0`).
pub fn sphere_geodesic(x: ArrayView1<f64>, h: ArrayView1<f64>, t: f64) -> Array1<f64> {
    let mut out = Array1::zeros(x.len());
    sphere_geodesic_into(x, h, t, out.view_mut());
    out
}

fn sphere_geodesic_into(
    x: ArrayView1<f64>,
    h: ArrayView1<f64>,
    t: f64,
    mut out: ArrayViewMut1<f64>,
) {
    debug_assert!((x.dot(&x) - 1.0).abs() < 1e-8);
    debug_assert!(x.dot(&h).abs() < 1e-8 * (1.0 + h.dot(&h).sqrt()));
    let nh = h.dot(&h).sqrt();
    if nh == 0.0 || t == 0.0 {
        out.assign(&x);
        return;
    }
    let (s, c) = (t * nh).sin_cos();
    let b = s / nh;
    Zip::from(&mut out)
        .and(&x)
        .and(&h)
        .for_each(|o, &xi, &hi| *o = xi * c + hi * b);
    // stops rounding drift from accumulating over many steps
    let norm = out.dot(&out).sqrt();
    out /= norm;
}

/// Parallel transport of `xi` (tangent at `x`) along the great circle
/// `γ(x, h, ·)` to `γ(x, h, t)`. Columns with `h = 0` are returned unchanged.
pub fn sphere_transport(
    xi: ArrayView1<f64>,
    x: ArrayView1<f64>,
    h: ArrayView1<f64>,
    t: f64,
) -> Array1<f64> {
    let mut out = Array1::zeros(x.len());
    sphere_transport_into(xi, x, h, t, out.view_mut());
    out
}

fn sphere_transport_into(
    xi: ArrayView1<f64>,
    x: ArrayView1<f64>,
    h: ArrayView1<f64>,
    t: f64,
    mut out: ArrayViewMut1<f64>,
) {
    let nh2 = h.dot(&h);
    out.assign(&xi);
    if nh2 == 0.0 {
        return;
    }
    let nh = nh2.sqrt();
    let coef = xi.dot(&h) / nh2;
    if coef == 0.0 {
        return;
    }
    let (s, c) = (t * nh).sin_cos();
    let a = coef * nh * s;
    let b = coef * (1.0 - c);
    Zip::from(&mut out)
        .and(&x)
        .and(&h)
        .for_each(|o, &xj, &hj| *o -= a * xj + b * hj);
    // remove the rounding-level normal component at the endpoint
    let mut end = Array1::zeros(x.len());
    sphere_geodesic_into(x, h, t, end.view_mut());
    let d = end.dot(&out);
    out.scaled_add(-d, &end);
}

/// Geodesic `Γ(X, H, t)`, the column-wise great circles.
pub fn geodesic(x: &ObliquePoint, h: &TangentVector, t: f64) -> ObliquePoint {
    debug_assert_eq!(x.data.dim(), h.data.dim());
    let mut out = Array2::zeros(x.data.dim());
    Zip::from(out.axis_iter_mut(Axis(1)))
        .and(x.data.axis_iter(Axis(1)))
        .and(h.data.axis_iter(Axis(1)))
        .for_each(|o, xc, hc| sphere_geodesic_into(xc, hc, t, o));
    ObliquePoint::from_raw(out)
}

/// Parallel transport `T(Ξ, X, H, t)` of `xi` along `Γ(X, H, ·)`.
pub fn transport(xi: &TangentVector, x: &ObliquePoint, h: &TangentVector, t: f64) -> TangentVector {
    debug_assert_eq!(x.data.dim(), h.data.dim());
    debug_assert_eq!(x.data.dim(), xi.data.dim());
    let mut out = Array2::zeros(x.data.dim());
    Zip::from(out.axis_iter_mut(Axis(1)))
        .and(xi.data.axis_iter(Axis(1)))
        .and(x.data.axis_iter(Axis(1)))
        .and(h.data.axis_iter(Axis(1)))
        .for_each(|o, xic, xc, hc| sphere_transport_into(xic, xc, hc, t, o));
    TangentVector { data: out }
}

/// Random point with i.i.d. standard-normal entries and normalized columns.
///
/// Draws whose smallest singular value falls below `1e-6` are rejected and
/// re-drawn from the same stream, so the result is a function of the seed.
pub fn random_point(n: usize, k: usize, seed: u64) -> Result<ObliquePoint> {
    if n == 0 || k < n {
        return Err(Error::param(format!("random_point needs 0 < n <= k, got n={n}, k={k}")));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    loop {
        let mut data: Array2<f64> = Array2::from_shape_simple_fn((n, k), || StandardNormal.sample(&mut rng));
        let mut degenerate = false;
        for mut col in data.columns_mut() {
            let nrm = col.dot(&col).sqrt();
            if nrm == 0.0 {
                degenerate = true;
                break;
            }
            col /= nrm;
        }
        if degenerate {
            continue;
        }
        let smin = linalg::singular_values(data.view())
            .last()
            .copied()
            .unwrap_or(0.0);
        if smin >= DRAW_RANK_TOL {
            return Ok(ObliquePoint::from_raw(data));
        }
    }
}

/// Random tangent vector at `x` (standard normal, projected).
pub fn random_tangent(x: &ObliquePoint, seed: u64) -> TangentVector {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let q = Array2::from_shape_simple_fn(x.data.dim(), || StandardNormal.sample(&mut rng));
    project_tangent(x, q.view()).expect("shapes agree by construction")
}
