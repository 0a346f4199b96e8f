//! Objective functions and seeded test-problem generators.
//!
//! Every objective implements [`Objective`]: value, gradient, optional
//! Hessian, and whatever constants are known for it (Lipschitz constant of
//! the gradient, a lower bound on the feasible region, a gradient-norm bound).
//! Objectives are immutable after construction and can be shared between
//! threads.

use nalgebra::{DMatrix, DVector};
use rand::seq::index;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::error::{param, Error, Result};
use crate::linalg;

/// Known constants of an objective. Any of them may be unknown.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct Constants {
    /// Lipschitz constant of the gradient on the region of interest.
    pub lipschitz: Option<f64>,
    /// Lower bound `f_low` of the objective on the region of interest.
    pub lower_bound: Option<f64>,
    /// Upper bound `G` on the gradient norm.
    pub gradient_bound: Option<f64>,
}

/// A smooth objective `f: R^n -> R`.
pub trait Objective: Send + Sync {
    fn dim(&self) -> usize;

    fn constants(&self) -> Constants;

    fn value(&self, x: &DVector<f64>) -> Result<f64>;

    fn gradient(&self, x: &DVector<f64>) -> Result<DVector<f64>>;

    fn has_hessian(&self) -> bool {
        false
    }

    /// True when the Hessian does not depend on `x`; lets metrics reuse
    /// factorizations across iterations.
    fn constant_hessian(&self) -> bool {
        false
    }

    fn hessian(&self, _x: &DVector<f64>) -> Result<DMatrix<f64>> {
        param("objective provides no Hessian")
    }

    /// `f(x) - f(y)`. Implementations override this with a cancellation-free
    /// formula where one exists, so that line searches stay meaningful when
    /// the decrease is far below the resolution of `f` itself.
    fn decrease(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<f64> {
        Ok(self.value(x)? - self.value(y)?)
    }
}

fn check_dim(x: &DVector<f64>, n: usize) -> Result<()> {
    if x.len() != n {
        return param(format!("point has dimension {}, expected {n}", x.len()));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// LASSO
// ---------------------------------------------------------------------------

/// A random LASSO problem `min ½‖Ax − b‖² + γ‖x‖₁` with a sparse planted
/// solution `u_true` and noiseless measurements `b = A·u_true`.
#[derive(Debug, Clone, PartialEq)]
pub struct LassoInstance {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub u_true: DVector<f64>,
    pub gamma: f64,
    pub seed: u64,
}

/// On-disk form: `A` stored row-major as a flat array.
#[derive(Serialize, Deserialize)]
struct LassoFile {
    m: usize,
    n: usize,
    gamma: f64,
    seed: u64,
    #[serde(rename = "A")]
    a: Vec<f64>,
    b: Vec<f64>,
    u_true: Vec<f64>,
}

impl LassoInstance {
    pub fn rows(&self) -> usize {
        self.a.nrows()
    }

    pub fn cols(&self) -> usize {
        self.a.ncols()
    }

    /// `‖Aᵀb‖_∞`, the smallest γ for which `x = 0` is optimal.
    pub fn gamma_max(&self) -> f64 {
        (self.a.transpose() * &self.b).amax()
    }

    pub fn with_gamma(&self, gamma: f64) -> Self {
        Self { gamma, ..self.clone() }
    }

    pub fn to_json(&self) -> Result<String> {
        let (m, n) = self.a.shape();
        let mut a = Vec::with_capacity(m * n);
        for i in 0..m {
            a.extend(self.a.row(i).iter());
        }
        let file = LassoFile {
            m,
            n,
            gamma: self.gamma,
            seed: self.seed,
            a,
            b: self.b.iter().copied().collect(),
            u_true: self.u_true.iter().copied().collect(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: LassoFile = serde_json::from_str(text)?;
        if f.m == 0 || f.n == 0 {
            return param("instance dimensions must be positive");
        }
        if f.a.len() != f.m * f.n {
            return param(format!("A has {} entries, expected m*n = {}", f.a.len(), f.m * f.n));
        }
        if f.b.len() != f.m {
            return param(format!("b has {} entries, expected m = {}", f.b.len(), f.m));
        }
        if f.u_true.len() != f.n {
            return param(format!("u_true has {} entries, expected n = {}", f.u_true.len(), f.n));
        }
        if !(f.gamma > 0.0) {
            return param("gamma must be positive");
        }
        Ok(Self {
            a: DMatrix::from_row_slice(f.m, f.n, &f.a),
            b: DVector::from_vec(f.b),
            u_true: DVector::from_vec(f.u_true),
            gamma: f.gamma,
            seed: f.seed,
        })
    }
}

/// Generates a seeded LASSO instance.
///
/// `A` has i.i.d. standard normal entries (drawn row by row); `u_true` has
/// `round(density·n)` (at least one) nonzeros at uniformly chosen positions
/// with standard normal values; `b = A·u_true`.
pub fn make_lasso(m: usize, n: usize, density: f64, gamma: f64, seed: u64) -> Result<LassoInstance> {
    if m == 0 || n == 0 {
        return param("m and n must be at least 1");
    }
    if !(density > 0.0 && density <= 1.0) {
        return param(format!("density must lie in (0, 1], got {density}"));
    }
    if !(gamma > 0.0) || !gamma.is_finite() {
        return param(format!("gamma must be positive, got {gamma}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut entries = Vec::with_capacity(m * n);
    for _ in 0..m * n {
        entries.push(StandardNormal.sample(&mut rng));
    }
    let a = DMatrix::from_row_slice(m, n, &entries);

    let nnz = ((density * n as f64).round() as usize).clamp(1, n);
    let mut support = index::sample(&mut rng, n, nnz).into_vec();
    support.sort_unstable();
    let mut u_true = DVector::zeros(n);
    for i in support {
        let v: f64 = StandardNormal.sample(&mut rng);
        // A zero draw would silently shrink the support.
        u_true[i] = if v == 0.0 { 1.0 } else { v };
    }
    let b = &a * &u_true;
    Ok(LassoInstance {
        a,
        b,
        u_true,
        gamma,
        seed,
    })
}

/// Smooth part `½‖Ax − b‖²` of a LASSO problem.
#[derive(Debug, Clone)]
pub struct LassoOracle {
    a: DMatrix<f64>,
    b: DVector<f64>,
    gram: DMatrix<f64>,
    lipschitz: f64,
}

/// Power-iteration settings for the LASSO Lipschitz constant.
const POWER_TOL: f64 = 1e-10;
const POWER_MAX_ITER: usize = 10_000;

impl LassoOracle {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Result<Self> {
        if a.nrows() != b.len() {
            return param(format!("A has {} rows but b has {} entries", a.nrows(), b.len()));
        }
        let gram = a.transpose() * &a;
        let lipschitz = linalg::power_iteration(&gram, POWER_TOL, POWER_MAX_ITER);
        Ok(Self { a, b, gram, lipschitz })
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.a
    }

    pub fn rhs(&self) -> &DVector<f64> {
        &self.b
    }

    pub fn gram(&self) -> &DMatrix<f64> {
        &self.gram
    }
}

/// Objective `½‖Ax − b‖²` for an instance; `L` is the top eigenvalue of `AᵀA`
/// and `f_low = 0`.
pub fn lasso_oracle(inst: &LassoInstance) -> Result<LassoOracle> {
    LassoOracle::new(inst.a.clone(), inst.b.clone())
}

impl Objective for LassoOracle {
    fn dim(&self) -> usize {
        self.a.ncols()
    }

    fn constants(&self) -> Constants {
        Constants {
            lipschitz: Some(self.lipschitz),
            lower_bound: Some(0.0),
            gradient_bound: None,
        }
    }

    fn value(&self, x: &DVector<f64>) -> Result<f64> {
        check_dim(x, self.dim())?;
        let r = &self.a * x - &self.b;
        Ok(0.5 * r.norm_squared())
    }

    fn gradient(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(x, self.dim())?;
        let r = &self.a * x - &self.b;
        Ok(self.a.tr_mul(&r))
    }

    fn has_hessian(&self) -> bool {
        true
    }

    fn constant_hessian(&self) -> bool {
        true
    }

    fn hessian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        check_dim(x, self.dim())?;
        Ok(self.gram.clone())
    }

    fn decrease(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<f64> {
        check_dim(x, self.dim())?;
        check_dim(y, self.dim())?;
        let r = &self.a * x - &self.b;
        let ad = &self.a * (y - x);
        Ok(-r.dot(&ad) - 0.5 * ad.norm_squared())
    }
}

// ---------------------------------------------------------------------------
// Convex quadratic on the nonnegative orthant
// ---------------------------------------------------------------------------

/// `f(x) = ½(x − c)ᵀQ(x − c)` with `Q` symmetric positive definite.
///
/// The minimizer over `x ≥ 0` is computed at construction by an independent
/// route (active-set enumeration for n ≤ 12, projected gradient plus an exact
/// polish otherwise) and reported as `f_low`.
#[derive(Debug, Clone)]
pub struct QuadraticBox {
    q: DMatrix<f64>,
    c: DVector<f64>,
    eig_min: f64,
    eig_max: f64,
    lipschitz: f64,
    minimizer: DVector<f64>,
    f_low: f64,
}

#[derive(Serialize, Deserialize)]
struct QuadraticFile {
    q: Vec<Vec<f64>>,
    c: Vec<f64>,
}

const ENUMERATION_MAX_DIM: usize = 12;

impl QuadraticBox {
    pub fn new(q: DMatrix<f64>, c: DVector<f64>) -> Result<Self> {
        let n = c.len();
        if n == 0 || q.shape() != (n, n) {
            return param(format!("Q is {}x{} but c has {} entries", q.nrows(), q.ncols(), n));
        }
        crate::error::ensure_finite(q.as_slice(), "Q")?;
        crate::error::ensure_finite(c.as_slice(), "c")?;
        let q = (&q + q.transpose()) * 0.5;
        let (eig_min, eig_max) = linalg::symmetric_extremes(&q);
        if !(eig_min > 0.0) {
            return param("Q must be positive definite");
        }
        let minimizer = if n <= ENUMERATION_MAX_DIM {
            enumerate_active_sets(&q, &c)?
        } else {
            projected_gradient_reference(&q, &c, eig_max)?
        };
        let d = &minimizer - &c;
        let f_low = 0.5 * d.dot(&(&q * &d));
        Ok(Self {
            q,
            c,
            eig_min,
            eig_max,
            lipschitz: eig_max,
            minimizer,
            f_low,
        })
    }

    pub fn q(&self) -> &DMatrix<f64> {
        &self.q
    }

    pub fn center(&self) -> &DVector<f64> {
        &self.c
    }

    /// Exact minimizer over `x ≥ 0`.
    pub fn minimizer(&self) -> &DVector<f64> {
        &self.minimizer
    }

    /// Extreme eigenvalues of `Q`.
    pub fn spectrum(&self) -> (f64, f64) {
        (self.eig_min, self.eig_max)
    }

    pub fn to_json(&self) -> Result<String> {
        let file = QuadraticFile {
            q: (0..self.q.nrows())
                .map(|i| self.q.row(i).iter().copied().collect())
                .collect(),
            c: self.c.iter().copied().collect(),
        };
        Ok(serde_json::to_string_pretty(&file)?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let f: QuadraticFile = serde_json::from_str(text)?;
        let n = f.c.len();
        if f.q.len() != n || f.q.iter().any(|r| r.len() != n) {
            return param("Q must be n x n with n = len(c)");
        }
        let flat: Vec<f64> = f.q.into_iter().flatten().collect();
        Self::new(DMatrix::from_row_slice(n, n, &flat), DVector::from_vec(f.c))
    }
}

/// Tries every free set `F` (with `x_i = 0` off `F`) and keeps the KKT point.
fn enumerate_active_sets(q: &DMatrix<f64>, c: &DVector<f64>) -> Result<DVector<f64>> {
    let n = c.len();
    let qc = q * c;
    let tol = 1e-12 * (1.0 + qc.amax());
    let mut best: Option<(f64, DVector<f64>)> = None;
    for mask in 0u32..(1u32 << n) {
        let free: Vec<usize> = (0..n).filter(|i| mask & (1 << i) != 0).collect();
        let mut x = DVector::zeros(n);
        if !free.is_empty() {
            let sub = linalg::principal_submatrix(q, &free);
            let rhs = DVector::from_iterator(free.len(), free.iter().map(|&i| qc[i]));
            let Some(chol) = sub.cholesky() else { continue };
            let y = chol.solve(&rhs);
            if y.iter().any(|&v| v < 0.0) {
                continue;
            }
            for (k, &i) in free.iter().enumerate() {
                x[i] = y[k];
            }
        }
        let g = q * (&x - c);
        let kkt = (0..n).all(|i| mask & (1 << i) != 0 || g[i] >= -tol);
        if kkt {
            let d = &x - c;
            let f = 0.5 * d.dot(&(q * &d));
            if best.as_ref().is_none_or(|(fb, _)| f < *fb) {
                best = Some((f, x));
            }
        }
    }
    best.map(|(_, x)| x)
        .ok_or_else(|| Error::Internal("active-set enumeration found no KKT point".into()))
}

/// Projected gradient at step `1/L` to a tight tolerance, followed by an exact
/// solve on the identified free set when that solve is KKT-consistent.
fn projected_gradient_reference(q: &DMatrix<f64>, c: &DVector<f64>, lipschitz: f64) -> Result<DVector<f64>> {
    let n = c.len();
    let step = 1.0 / lipschitz;
    let mut x = DVector::zeros(n);
    for _ in 0..1_000_000 {
        let g = q * (&x - c);
        let next = (&x - &g * step).map(|v| v.max(0.0));
        let moved = (&next - &x).norm();
        x = next;
        if moved <= 1e-14 * (1.0 + x.norm()) {
            break;
        }
    }
    let free: Vec<usize> = (0..n).filter(|&i| x[i] > 0.0).collect();
    if !free.is_empty() {
        let qc = q * c;
        let sub = linalg::principal_submatrix(q, &free);
        let rhs = DVector::from_iterator(free.len(), free.iter().map(|&i| qc[i]));
        if let Some(chol) = sub.cholesky() {
            let y = chol.solve(&rhs);
            if y.iter().all(|&v| v >= 0.0) {
                let mut polished = DVector::zeros(n);
                for (k, &i) in free.iter().enumerate() {
                    polished[i] = y[k];
                }
                let g = q * (&polished - c);
                let tol = 1e-10 * (1.0 + qc.amax());
                if (0..n).all(|i| polished[i] > 0.0 || g[i] >= -tol) {
                    x = polished;
                }
            }
        }
    }
    Ok(x)
}

/// Seeded convex quadratic with `Q = U·diag(λ)·Uᵀ`, `U` a random orthogonal
/// matrix and `λ` geometrically spaced on `[1, cond]`; `c` is standard normal
/// with at least one entry of each sign when `n ≥ 2`.
pub fn make_quadratic_box(n: usize, cond: f64, seed: u64) -> Result<QuadraticBox> {
    if n == 0 {
        return param("n must be at least 1");
    }
    if !(cond >= 1.0) || !cond.is_finite() {
        return param(format!("cond must be >= 1, got {cond}"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gauss: DMatrix<f64> = DMatrix::from_fn(n, n, |_, _| StandardNormal.sample(&mut rng));
    let u = gauss.qr().q();
    let eigs = DVector::from_fn(n, |i, _| {
        if n == 1 {
            cond
        } else {
            cond.powf(i as f64 / (n - 1) as f64)
        }
    });
    let q = &u * DMatrix::from_diagonal(&eigs) * u.transpose();
    let mut c: DVector<f64> = DVector::from_fn(n, |_, _| StandardNormal.sample(&mut rng));
    if n >= 2 {
        if c.iter().all(|&v| v >= 0.0) {
            c[0] = -c[0].abs().max(0.5);
        } else if c.iter().all(|&v| v <= 0.0) {
            c[0] = c[0].abs().max(0.5);
        }
    }
    let mut qb = QuadraticBox::new(q, c)?;
    qb.lipschitz = qb.eig_max.max(cond);
    Ok(qb)
}

impl Objective for QuadraticBox {
    fn dim(&self) -> usize {
        self.c.len()
    }

    fn constants(&self) -> Constants {
        Constants {
            lipschitz: Some(self.lipschitz),
            lower_bound: Some(self.f_low),
            gradient_bound: None,
        }
    }

    fn value(&self, x: &DVector<f64>) -> Result<f64> {
        check_dim(x, self.dim())?;
        let d = x - &self.c;
        Ok(0.5 * d.dot(&(&self.q * &d)))
    }

    fn gradient(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(x, self.dim())?;
        Ok(&self.q * (x - &self.c))
    }

    fn has_hessian(&self) -> bool {
        true
    }

    fn constant_hessian(&self) -> bool {
        true
    }

    fn hessian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        check_dim(x, self.dim())?;
        Ok(self.q.clone())
    }

    fn decrease(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<f64> {
        check_dim(x, self.dim())?;
        check_dim(y, self.dim())?;
        let g = &self.q * (x - &self.c);
        let d = y - x;
        Ok(-g.dot(&d) - 0.5 * d.dot(&(&self.q * &d)))
    }
}

// ---------------------------------------------------------------------------
// Nonconvex test function
// ---------------------------------------------------------------------------

/// `f(x) = ½‖x − c‖² + a·Σᵢ cos(ω·xᵢ)`.
///
/// The Hessian is `diag(1 − a·ω²·cos(ω·xᵢ))`, so `L = 1 + a·ω²` holds
/// everywhere, and the function is nonconvex whenever `a·ω² > 1`. Since
/// `cos ≥ −1`, `f ≥ −a·n` is a valid lower bound.
#[derive(Debug, Clone)]
pub struct NonconvexCosine {
    c: DVector<f64>,
    amplitude: f64,
    frequency: f64,
}

/// Default ripple used by [`make_nonconvex`]: `a·ω² = 2`, `L = 3`.
pub const NONCONVEX_AMPLITUDE: f64 = 0.5;
pub const NONCONVEX_FREQUENCY: f64 = 2.0;

impl NonconvexCosine {
    pub fn new(c: DVector<f64>, amplitude: f64, frequency: f64) -> Result<Self> {
        if c.is_empty() {
            return param("n must be at least 1");
        }
        if !(amplitude >= 0.0) || !(frequency > 0.0) {
            return param("amplitude must be >= 0 and frequency > 0");
        }
        Ok(Self {
            c,
            amplitude,
            frequency,
        })
    }
}

pub fn make_nonconvex(n: usize, seed: u64) -> Result<NonconvexCosine> {
    if n == 0 {
        return param("n must be at least 1");
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let c = DVector::from_fn(n, |_, _| 2.0 * Distribution::<f64>::sample(&StandardNormal, &mut rng));
    NonconvexCosine::new(c, NONCONVEX_AMPLITUDE, NONCONVEX_FREQUENCY)
}

impl Objective for NonconvexCosine {
    fn dim(&self) -> usize {
        self.c.len()
    }

    fn constants(&self) -> Constants {
        Constants {
            lipschitz: Some(1.0 + self.amplitude * self.frequency * self.frequency),
            lower_bound: Some(-self.amplitude * self.c.len() as f64),
            gradient_bound: None,
        }
    }

    fn value(&self, x: &DVector<f64>) -> Result<f64> {
        check_dim(x, self.dim())?;
        let ripple: f64 = x.iter().map(|&v| (self.frequency * v).cos()).sum();
        Ok(0.5 * (x - &self.c).norm_squared() + self.amplitude * ripple)
    }

    fn gradient(&self, x: &DVector<f64>) -> Result<DVector<f64>> {
        check_dim(x, self.dim())?;
        let (a, w) = (self.amplitude, self.frequency);
        Ok(DVector::from_fn(self.dim(), |i, _| {
            x[i] - self.c[i] - a * w * (w * x[i]).sin()
        }))
    }

    fn has_hessian(&self) -> bool {
        true
    }

    fn hessian(&self, x: &DVector<f64>) -> Result<DMatrix<f64>> {
        check_dim(x, self.dim())?;
        let (a, w) = (self.amplitude, self.frequency);
        let d = x.map(|v| 1.0 - a * w * w * (w * v).cos());
        Ok(DMatrix::from_diagonal(&d))
    }

    fn decrease(&self, x: &DVector<f64>, y: &DVector<f64>) -> Result<f64> {
        check_dim(x, self.dim())?;
        check_dim(y, self.dim())?;
        let d = y - x;
        let smooth = -(x - &self.c).dot(&d) - 0.5 * d.norm_squared();
        // cos A − cos B = −2 sin((A+B)/2) sin((A−B)/2)
        let w = self.frequency;
        let ripple: f64 = x
            .iter()
            .zip(y.iter())
            .map(|(&xi, &yi)| -2.0 * (0.5 * w * (xi + yi)).sin() * (0.5 * w * (xi - yi)).sin())
            .sum();
        Ok(smooth + self.amplitude * ripple)
    }
}
