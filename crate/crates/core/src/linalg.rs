//! Small dense linear algebra on `ndarray` matrices, backed by nalgebra.

use nalgebra::DMatrix;
use ndarray::{Array2, ArrayView2};

pub(crate) fn to_na(a: ArrayView2<f64>) -> DMatrix<f64> {
    DMatrix::from_fn(a.nrows(), a.ncols(), |i, j| a[[i, j]])
}

pub(crate) fn from_na(m: &DMatrix<f64>) -> Array2<f64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

/// Singular values in descending order.
pub fn singular_values(a: ArrayView2<f64>) -> Vec<f64> {
    let mut s: Vec<f64> = to_na(a).singular_values().iter().copied().collect();
    s.sort_by(|x, y| y.total_cmp(x));
    s
}

/// Ratio of the largest to the smallest singular value; `inf` when singular.
pub fn condition_number(a: ArrayView2<f64>) -> f64 {
    let s = singular_values(a);
    match (s.first(), s.last()) {
        (Some(&hi), Some(&lo)) if lo > 0.0 => hi / lo,
        _ => f64::INFINITY,
    }
}

/// `log det` of a symmetric positive definite matrix, `None` if the
/// Cholesky factorization fails.
pub fn spd_log_det(a: ArrayView2<f64>) -> Option<f64> {
    let chol = to_na(a).cholesky()?;
    let l = chol.l_dirty();
    let mut acc = 0.0;
    for i in 0..l.nrows() {
        let d = l[(i, i)];
        if !(d > 0.0) {
            return None;
        }
        acc += d.ln();
    }
    Some(2.0 * acc)
}

/// Inverse of a symmetric positive definite matrix.
pub fn spd_inverse(a: ArrayView2<f64>) -> Option<Array2<f64>> {
    let chol = to_na(a).cholesky()?;
    Some(from_na(&chol.inverse()))
}

/// Eigenvalues of a symmetric matrix, ascending.
pub fn sym_eigenvalues(a: ArrayView2<f64>) -> Vec<f64> {
    let mut e: Vec<f64> = to_na(a).symmetric_eigenvalues().iter().copied().collect();
    e.sort_by(|x, y| x.total_cmp(y));
    e
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use ndarray::array;

    #[test]
    fn log_det_of_diagonal() {
        let a = array![[2.0, 0.0], [0.0, 3.0]];
        assert_abs_diff_eq!(spd_log_det(a.view()).unwrap(), 6f64.ln(), epsilon = 1e-14);
        let inv = spd_inverse(a.view()).unwrap();
        assert_abs_diff_eq!(inv[[1, 1]], 1.0 / 3.0, epsilon = 1e-14);
    }

    #[test]
    fn singular_matrix_has_no_log_det() {
        let a = array![[1.0, 1.0], [1.0, 1.0]];
        assert!(spd_log_det(a.view()).is_none());
        assert!(condition_number(a.view()) > 1e12);
    }
}
