//! Independent reference computations shared by the integration tests.
#![allow(dead_code)]

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use twometric::Objective;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_vec(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> DVector<f64> {
    DVector::from_fn(n, |_, _| rng.random_range(lo..hi))
}

/// `|fd − gᵀd| / max(1, |gᵀd|)` with a central difference of step `h`.
pub fn directional_fd_error(f: &dyn Objective, x: &DVector<f64>, d: &DVector<f64>, h: f64) -> f64 {
    let fp = f.value(&(x + d * h)).unwrap();
    let fm = f.value(&(x - d * h)).unwrap();
    let fd = (fp - fm) / (2.0 * h);
    let exact = f.gradient(x).unwrap().dot(d);
    (fd - exact).abs() / exact.abs().max(1.0)
}

/// Grid minimizer of `½(y − z)² + t|y|` on `[z − r, z + r]`.
pub fn prox_by_grid(z: f64, t: f64, r: f64, points: usize) -> f64 {
    let mut best = (f64::INFINITY, z);
    for i in 0..=points {
        let y = z - r + 2.0 * r * i as f64 / points as f64;
        let v = 0.5 * (y - z) * (y - z) + t * y.abs();
        if v < best.0 {
            best = (v, y);
        }
    }
    // Zero lies off-grid in general and is the kink minimizer.
    if 0.5 * z * z <= best.0 && (z.abs() <= r) {
        best = (0.5 * z * z, 0.0);
    }
    best.1
}

/// 1-D LASSO `½(a x − b)² + γ|x|` minimizer.
pub fn lasso_1d(a: f64, b: f64, gamma: f64) -> f64 {
    let z = a * b;
    z.signum() * (z.abs() - gamma).max(0.0) / (a * a)
}

/// Dense solve through a full-pivot LU, unrelated to the Cholesky route.
pub fn dense_solve(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    a.clone().full_piv_lu().solve(b).expect("nonsingular")
}

/// `D` rebuilt column by column from a linear map.
pub fn matrix_of(n: usize, apply: impl Fn(&DVector<f64>) -> DVector<f64>) -> DMatrix<f64> {
    let mut d = DMatrix::zeros(n, n);
    for j in 0..n {
        let mut e = DVector::zeros(n);
        e[j] = 1.0;
        d.set_column(j, &apply(&e));
    }
    d
}

/// Random symmetric matrix with eigenvalues drawn from `[lo, hi]`.
pub fn random_spd(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> DMatrix<f64> {
    let g = DMatrix::from_fn(n, n, |_, _| rng.random_range(-1.0..1.0));
    let q = g.qr().q();
    let eigs = DVector::from_fn(n, |_, _| rng.random_range(lo..hi));
    let m = &q * DMatrix::from_diagonal(&eigs) * q.transpose();
    (&m + m.transpose()) * 0.5
}
