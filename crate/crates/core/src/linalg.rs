//! Small dense linear-algebra helpers shared by the oracles and metrics.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

/// Largest eigenvalue of a symmetric positive semidefinite matrix by power
/// iteration, started from the normalized all-ones vector.
///
/// Stops when the Rayleigh quotient changes by less than `tol` relative, or
/// after `max_iter` products.
pub fn power_iteration(mat: &DMatrix<f64>, tol: f64, max_iter: usize) -> f64 {
    let n = mat.nrows();
    if n == 0 {
        return 0.0;
    }
    let mut v = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    let mut lambda = 0.0;
    for _ in 0..max_iter {
        let w = mat * &v;
        let norm = w.norm();
        if norm == 0.0 {
            return 0.0;
        }
        let next = v.dot(&w);
        v = w / norm;
        if (next - lambda).abs() <= tol * next.abs().max(f64::MIN_POSITIVE) {
            return next;
        }
        lambda = next;
    }
    lambda
}

/// Extreme eigenvalues `(min, max)` of a symmetric matrix.
pub fn symmetric_extremes(mat: &DMatrix<f64>) -> (f64, f64) {
    if mat.nrows() == 0 {
        return (f64::INFINITY, f64::NEG_INFINITY);
    }
    let eig = SymmetricEigen::new(mat.clone()).eigenvalues;
    let lo = eig.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = eig.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    (lo, hi)
}

/// Gershgorin upper bound on the spectrum of a symmetric matrix.
pub fn gershgorin_upper(mat: &DMatrix<f64>) -> f64 {
    (0..mat.nrows())
        .map(|i| {
            let off: f64 = (0..mat.ncols()).filter(|&j| j != i).map(|j| mat[(i, j)].abs()).sum();
            mat[(i, i)] + off
        })
        .fold(f64::NEG_INFINITY, f64::max)
}

/// Principal submatrix on `idx × idx`.
pub fn principal_submatrix(mat: &DMatrix<f64>, idx: &[usize]) -> DMatrix<f64> {
    DMatrix::from_fn(idx.len(), idx.len(), |r, c| mat[(idx[r], idx[c])])
}
