//! The step metric `D_k` and the index partition it must respect.
//!
//! Both iterations require `D_k[i, j] = 0` for `i ∈ I⁺, j ≠ i`. The metrics
//! here are built as "diagonal on I⁺, full on I⁻": coordinates in the plus
//! set get a scalar, and the minus block gets an SPD matrix (or its inverse).
//!
//! Eigenvalues of the applied `D_k` are kept inside `[lambda_min, lambda_max]`.
//! For the Newton kind this is done by enlarging the ridge when the block is
//! too flat (or indefinite), and by spectral clipping when it is too steep.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, param, Error, Result};
use crate::linalg;

/// Free/fixed split of `{0, …, n−1}`: the plus set `I⁺` (near-active
/// coordinates on which the metric must act diagonally) and its complement.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IndexPartition {
    mask: Vec<bool>,
    plus: Vec<usize>,
    minus: Vec<usize>,
}

impl IndexPartition {
    /// Partition from a membership mask; `mask[i]` is true for `i ∈ I⁺`.
    pub fn from_mask(mask: Vec<bool>) -> Self {
        let plus = (0..mask.len()).filter(|&i| mask[i]).collect();
        let minus = (0..mask.len()).filter(|&i| !mask[i]).collect();
        Self { mask, plus, minus }
    }

    pub fn new(n: usize, plus: &[usize]) -> Result<Self> {
        let mut mask = vec![false; n];
        for &i in plus {
            if i >= n {
                return param(format!("index {i} out of range for dimension {n}"));
            }
            mask[i] = true;
        }
        Ok(Self::from_mask(mask))
    }

    /// Everything in `I⁻`.
    pub fn all_minus(n: usize) -> Self {
        Self::from_mask(vec![false; n])
    }

    pub fn dim(&self) -> usize {
        self.mask.len()
    }

    pub fn plus(&self) -> &[usize] {
        &self.plus
    }

    pub fn minus(&self) -> &[usize] {
        &self.minus
    }

    pub fn is_plus(&self, i: usize) -> bool {
        self.mask[i]
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind")]
pub enum MetricKind {
    Identity,
    Diagonal {
        values: Vec<f64>,
    },
    /// Inverse of the ridged Hessian: `p̄` solves `(H̄ + ridge·I) p̄ = v̄`.
    Newton {
        ridge: f64,
    },
    /// The ridged Hessian itself, `p̄ = (H̄ + ridge·I) v̄`.
    NewtonLiteral {
        ridge: f64,
    },
}

/// Recipe for `D_k` plus the eigenvalue window it must stay inside.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricSpec {
    #[serde(flatten)]
    pub kind: MetricKind,
    pub lambda_min: f64,
    pub lambda_max: f64,
}

pub const DEFAULT_LAMBDA_MIN: f64 = 1e-8;
pub const DEFAULT_LAMBDA_MAX: f64 = 1e8;

impl MetricSpec {
    pub fn new(kind: MetricKind) -> Self {
        Self {
            kind,
            lambda_min: DEFAULT_LAMBDA_MIN,
            lambda_max: DEFAULT_LAMBDA_MAX,
        }
    }

    pub fn identity() -> Self {
        Self::new(MetricKind::Identity)
    }

    pub fn diagonal(values: Vec<f64>) -> Self {
        Self::new(MetricKind::Diagonal { values })
    }

    pub fn newton(ridge: f64) -> Self {
        Self::new(MetricKind::Newton { ridge })
    }

    pub fn newton_literal(ridge: f64) -> Self {
        Self::new(MetricKind::NewtonLiteral { ridge })
    }

    pub fn needs_hessian(&self) -> bool {
        matches!(self.kind, MetricKind::Newton { .. } | MetricKind::NewtonLiteral { .. })
    }

    pub fn name(&self) -> &'static str {
        match self.kind {
            MetricKind::Identity => "identity",
            MetricKind::Diagonal { .. } => "diagonal",
            MetricKind::Newton { .. } => "newton",
            MetricKind::NewtonLiteral { .. } => "newton-literal",
        }
    }

    pub fn validate(&self, n: usize) -> Result<()> {
        if !(self.lambda_min > 0.0) || !(self.lambda_max >= self.lambda_min) {
            return param(format!(
                "metric window requires 0 < lambda_min <= lambda_max, got [{}, {}]",
                self.lambda_min, self.lambda_max
            ));
        }
        match &self.kind {
            MetricKind::Identity => {
                if self.lambda_min > 1.0 || self.lambda_max < 1.0 {
                    return param("identity metric lies outside the eigenvalue window");
                }
            }
            MetricKind::Diagonal { values } => {
                if values.len() != n {
                    return param(format!("diagonal metric has {} entries, expected {n}", values.len()));
                }
                if values.iter().any(|&d| !(d > 0.0) || !d.is_finite()) {
                    return param("diagonal metric entries must be positive and finite");
                }
            }
            MetricKind::Newton { ridge } | MetricKind::NewtonLiteral { ridge } => {
                if !(*ridge >= 0.0) || !ridge.is_finite() {
                    return param(format!("ridge must be nonnegative, got {ridge}"));
                }
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
enum BlockOp {
    Identity,
    /// Scale the minus block coordinate-wise.
    Scale(Vec<f64>),
    /// Solve with a Cholesky factor of the ridged block.
    Solve(Cholesky<f64, Dyn>),
    /// Multiply by an explicit SPD matrix.
    Multiply(DMatrix<f64>),
}

/// `D_k` for one (Hessian, partition) pair, ready to apply repeatedly.
#[derive(Debug, Clone)]
pub struct PreparedMetric {
    partition: IndexPartition,
    plus_scale: Vec<f64>,
    block: BlockOp,
    /// Symmetric matrix whose spectrum (or inverse spectrum) is the minus
    /// block's; kept for `bounds`.
    block_matrix: Option<DMatrix<f64>>,
    block_inverted: bool,
}

fn clamp(v: f64, lo: f64, hi: f64) -> f64 {
    v.max(lo).min(hi)
}

impl PreparedMetric {
    pub fn new(spec: &MetricSpec, hessian: Option<&DMatrix<f64>>, part: &IndexPartition) -> Result<Self> {
        let n = part.dim();
        spec.validate(n)?;
        let (lo, hi) = (spec.lambda_min, spec.lambda_max);
        match &spec.kind {
            MetricKind::Identity => Ok(Self {
                partition: part.clone(),
                plus_scale: vec![1.0; part.plus().len()],
                block: BlockOp::Identity,
                block_matrix: None,
                block_inverted: false,
            }),
            MetricKind::Diagonal { values } => {
                let d: Vec<f64> = values.iter().map(|&v| clamp(v, lo, hi)).collect();
                Ok(Self {
                    partition: part.clone(),
                    plus_scale: part.plus().iter().map(|&i| d[i]).collect(),
                    block: BlockOp::Scale(part.minus().iter().map(|&i| d[i]).collect()),
                    block_matrix: None,
                    block_inverted: false,
                })
            }
            MetricKind::Newton { ridge } => {
                let h = require_hessian(hessian, n)?;
                let plus_scale = part
                    .plus()
                    .iter()
                    .map(|&i| 1.0 / clamp(h[(i, i)] + ridge, 1.0 / hi, 1.0 / lo))
                    .collect();
                let sub = linalg::principal_submatrix(h, part.minus());
                let (block, ridged) = inverse_block(sub, *ridge, 1.0 / hi, 1.0 / lo)?;
                Ok(Self {
                    partition: part.clone(),
                    plus_scale,
                    block,
                    block_matrix: Some(ridged),
                    block_inverted: true,
                })
            }
            MetricKind::NewtonLiteral { ridge } => {
                let h = require_hessian(hessian, n)?;
                let plus_scale = part.plus().iter().map(|&i| clamp(h[(i, i)] + ridge, lo, hi)).collect();
                let sub = linalg::principal_submatrix(h, part.minus());
                let ridged = window_block(sub, *ridge, lo, hi);
                Ok(Self {
                    partition: part.clone(),
                    plus_scale,
                    block: BlockOp::Multiply(ridged.clone()),
                    block_matrix: Some(ridged),
                    block_inverted: false,
                })
            }
        }
    }

    pub fn partition(&self) -> &IndexPartition {
        &self.partition
    }

    /// `p = D_k v`.
    pub fn apply(&self, v: &DVector<f64>) -> Result<DVector<f64>> {
        let n = self.partition.dim();
        if v.len() != n {
            return param(format!("vector has dimension {}, expected {n}", v.len()));
        }
        ensure_finite(v.as_slice(), "metric input")?;
        let mut p = DVector::zeros(n);
        for (k, &i) in self.partition.plus().iter().enumerate() {
            p[i] = self.plus_scale[k] * v[i];
        }
        let minus = self.partition.minus();
        if minus.is_empty() {
            return Ok(p);
        }
        let vbar = DVector::from_iterator(minus.len(), minus.iter().map(|&i| v[i]));
        let pbar = match &self.block {
            BlockOp::Identity => vbar,
            BlockOp::Scale(d) => DVector::from_fn(minus.len(), |k, _| d[k] * vbar[k]),
            BlockOp::Solve(chol) => chol.solve(&vbar),
            BlockOp::Multiply(m) => m * vbar,
        };
        ensure_finite(pbar.as_slice(), "metric output")?;
        for (k, &i) in minus.iter().enumerate() {
            p[i] = pbar[k];
        }
        Ok(p)
    }

    /// Extreme eigenvalues `(λ_min, λ_max)` of the applied `D_k`.
    pub fn bounds(&self) -> (f64, f64) {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for &s in &self.plus_scale {
            lo = lo.min(s);
            hi = hi.max(s);
        }
        if !self.partition.minus().is_empty() {
            let (blo, bhi) = match (&self.block, &self.block_matrix) {
                (BlockOp::Identity, _) => (1.0, 1.0),
                (BlockOp::Scale(d), _) => (
                    d.iter().copied().fold(f64::INFINITY, f64::min),
                    d.iter().copied().fold(f64::NEG_INFINITY, f64::max),
                ),
                (_, Some(m)) => {
                    let (mlo, mhi) = linalg::symmetric_extremes(m);
                    if self.block_inverted {
                        (1.0 / mhi, 1.0 / mlo)
                    } else {
                        (mlo, mhi)
                    }
                }
                (_, None) => unreachable!("dense block without its matrix"),
            };
            lo = lo.min(blo);
            hi = hi.max(bhi);
        }
        (lo, hi)
    }
}

fn require_hessian(hessian: Option<&DMatrix<f64>>, n: usize) -> Result<&DMatrix<f64>> {
    let h = hessian.ok_or_else(|| Error::Parameter("newton metric requires a Hessian".into()))?;
    if h.shape() != (n, n) {
        return param(format!("Hessian is {}x{}, expected {n}x{n}", h.nrows(), h.ncols()));
    }
    ensure_finite(h.as_slice(), "Hessian")?;
    Ok(h)
}

fn add_ridge(mut m: DMatrix<f64>, ridge: f64) -> DMatrix<f64> {
    for i in 0..m.nrows() {
        m[(i, i)] += ridge;
    }
    m
}

/// Ridged block `H̄ + r·I` with spectrum in `[floor, cap]`, returned together
/// with the operator applying its inverse.
///
/// The ridge is enlarged until the smallest eigenvalue reaches `floor`; if the
/// largest then exceeds `cap`, eigenvalues are clipped explicitly.
fn inverse_block(sub: DMatrix<f64>, ridge: f64, floor: f64, cap: f64) -> Result<(BlockOp, DMatrix<f64>)> {
    let dim = sub.nrows();
    if dim == 0 {
        return Ok((BlockOp::Identity, sub));
    }
    let probe = add_ridge(sub.clone(), ridge - floor);
    let ridge = if probe.cholesky().is_some() {
        ridge
    } else {
        let (mu_min, _) = linalg::symmetric_extremes(&sub);
        let needed = floor - mu_min;
        ridge.max(needed + 1e-12 * needed.abs().max(floor))
    };
    let ridged = add_ridge(sub, ridge);
    if linalg::gershgorin_upper(&ridged) > cap {
        let (_, top) = linalg::symmetric_extremes(&ridged);
        if top > cap {
            let clipped = clip_spectrum(&ridged, floor, cap);
            let inv = invert_spd(&clipped)?;
            return Ok((BlockOp::Multiply(inv), clipped));
        }
    }
    match ridged.clone().cholesky() {
        Some(chol) => Ok((BlockOp::Solve(chol), ridged)),
        None => Err(Error::Internal(format!(
            "Cholesky failed on ridged {dim}x{dim} block (ridge {ridge:e}, diag range [{:e}, {:e}])",
            ridged.diagonal().min(),
            ridged.diagonal().max()
        ))),
    }
}

/// `H̄ + r·I` with spectrum forced into `[lo, hi]`.
fn window_block(sub: DMatrix<f64>, ridge: f64, lo: f64, hi: f64) -> DMatrix<f64> {
    if sub.nrows() == 0 {
        return sub;
    }
    let ridged = add_ridge(sub, ridge);
    let (mlo, mhi) = linalg::symmetric_extremes(&ridged);
    if mlo >= lo && mhi <= hi {
        ridged
    } else {
        clip_spectrum(&ridged, lo, hi)
    }
}

fn clip_spectrum(m: &DMatrix<f64>, lo: f64, hi: f64) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m.clone());
    // Rebuilding V·diag·Vᵀ perturbs eigenvalues by about ε‖m‖; keep the
    // floor clear of that so the result still has spectrum ≥ lo.
    let slack = 16.0 * f64::EPSILON * m.nrows() as f64 * eig.eigenvalues.amax().min(hi);
    let d = eig.eigenvalues.map(|v| clamp(v, (lo + slack).min(hi), hi));
    let v = &eig.eigenvectors;
    let out = v * DMatrix::from_diagonal(&d) * v.transpose();
    (&out + out.transpose()) * 0.5
}

fn invert_spd(m: &DMatrix<f64>) -> Result<DMatrix<f64>> {
    let chol = m
        .clone()
        .cholesky()
        .ok_or_else(|| Error::Internal("Cholesky failed on clipped block".into()))?;
    let inv = chol.inverse();
    Ok((&inv + inv.transpose()) * 0.5)
}

/// `p = D_k v` for a one-off application.
pub fn apply_metric(
    spec: &MetricSpec,
    hessian: Option<&DMatrix<f64>>,
    part: &IndexPartition,
    v: &DVector<f64>,
) -> Result<DVector<f64>> {
    PreparedMetric::new(spec, hessian, part)?.apply(v)
}

/// Extreme eigenvalues of the `D_k` that [`apply_metric`] would apply.
pub fn metric_bounds(spec: &MetricSpec, hessian: Option<&DMatrix<f64>>, part: &IndexPartition) -> Result<(f64, f64)> {
    Ok(PreparedMetric::new(spec, hessian, part)?.bounds())
}

/// Per-run metric state. Re-prepares `D_k` whenever the partition changes, or
/// on every call when the Hessian depends on `x`.
#[derive(Debug)]
pub struct MetricWorkspace {
    spec: MetricSpec,
    constant_hessian: bool,
    cached: Option<PreparedMetric>,
    hessian: Option<DMatrix<f64>>,
}

impl MetricWorkspace {
    pub fn new(spec: MetricSpec, constant_hessian: bool) -> Self {
        Self {
            spec,
            constant_hessian,
            cached: None,
            hessian: None,
        }
    }

    pub fn spec(&self) -> &MetricSpec {
        &self.spec
    }

    /// Returns the prepared metric for `part`. `hessian` is only invoked when
    /// the metric needs one and no reusable factorization exists.
    pub fn prepare(
        &mut self,
        part: &IndexPartition,
        hessian: impl FnOnce() -> Result<DMatrix<f64>>,
    ) -> Result<&PreparedMetric> {
        let reuse = self
            .cached
            .as_ref()
            .is_some_and(|c| c.partition() == part && (self.constant_hessian || !self.spec.needs_hessian()));
        if !reuse {
            if self.spec.needs_hessian() && (self.hessian.is_none() || !self.constant_hessian) {
                self.hessian = Some(hessian()?);
            }
            self.cached = Some(PreparedMetric::new(&self.spec, self.hessian.as_ref(), part)?);
        }
        Ok(self.cached.as_ref().expect("prepared above"))
    }
}
