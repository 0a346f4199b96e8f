//! Two-metric projection for `min f(x) s.t. x ≥ 0`.
//!
//! Each iteration computes the projected-gradient gauge
//! `ω_k = ‖x_k − P(x_k − M g_k)‖`, the window `ε_k = min{ε, ω_k}` and the
//! near-active set `I⁺ = {i : 0 ≤ x_i ≤ ε_k, g_i > 0}`, then takes
//! `x_{k+1} = P(x_k − α_k p_k)` with `α_k = β^{m_k}` chosen by the
//! generalized Armijo rule
//!
//! ```text
//! f(x_k) − f(x_k(α)) ≥ σ { α Σ_{i∉I⁺} g_i p_i + Σ_{i∈I⁺} g_i (x_i − x_i(α)) }.
//! ```
//!
//! The classic variant uses `p_k = D_k g_k`; the scaled variant uses
//! `p_k = S_k D_k S_k g_k` with `S_k[i,i] = min{x_i, 1}` when `g_i > 0`,
//! which admits the explicit bound of [`iteration_bound`].

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, param, Error, Result};
use crate::metric::{IndexPartition, MetricSpec, MetricWorkspace};
use crate::oracle::Objective;
use crate::report::{BoundRecord, BoundReport, SolverConfig, Status, Stopwatch, TraceRecord};

/// Euclidean projection onto the nonnegative orthant.
pub fn project_nonneg(x: &DVector<f64>) -> Result<DVector<f64>> {
    ensure_finite(x.as_slice(), "projection input")?;
    Ok(x.map(|v| v.max(0.0)))
}

fn check_feasible(x: &DVector<f64>) -> Result<()> {
    ensure_finite(x.as_slice(), "point")?;
    if let Some(i) = x.iter().position(|&v| v < 0.0) {
        return param(format!("point is infeasible: x[{i}] = {} < 0", x[i]));
    }
    Ok(())
}

fn check_pair(x: &DVector<f64>, g: &DVector<f64>) -> Result<()> {
    if x.len() != g.len() {
        return param(format!("x has {} entries but g has {}", x.len(), g.len()));
    }
    check_feasible(x)?;
    ensure_finite(g.as_slice(), "gradient")
}

/// Diagonal of `S`: `min{x_i, 1}` where `g_i > 0`, `1` elsewhere.
pub fn scaling_matrix(x: &DVector<f64>, g: &DVector<f64>) -> Result<DVector<f64>> {
    check_pair(x, g)?;
    Ok(DVector::from_fn(
        x.len(),
        |i, _| {
            if g[i] > 0.0 {
                x[i].min(1.0)
            } else {
                1.0
            }
        },
    ))
}

/// Witnesses of the ε-approximate first-order test.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Eps1oCheck {
    pub is_eps_1o: bool,
    /// ‖S g‖ with `S` from [`scaling_matrix`].
    pub scaled_norm: f64,
    pub min_gradient: f64,
}

/// `x` is ε-1o iff `‖S g‖ ≤ ε` and every `g_i ≥ −ε`.
pub fn eps_1o_check(x: &DVector<f64>, g: &DVector<f64>, eps: f64) -> Result<Eps1oCheck> {
    if !(eps > 0.0) {
        return param(format!("epsilon must be positive, got {eps}"));
    }
    let s = scaling_matrix(x, g)?;
    let scaled_norm = s.component_mul(g).norm();
    let min_gradient = g.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(Eps1oCheck {
        is_eps_1o: scaled_norm <= eps && min_gradient >= -eps,
        scaled_norm,
        min_gradient,
    })
}

/// `‖x − P(x − M g)‖` for a positive diagonal `M` (identity when `None`).
pub fn omega_measure(x: &DVector<f64>, g: &DVector<f64>, m: Option<&[f64]>) -> Result<f64> {
    check_pair(x, g)?;
    if let Some(m) = m {
        if m.len() != x.len() {
            return param(format!("M has {} entries, expected {}", m.len(), x.len()));
        }
        if m.iter().any(|&v| !(v > 0.0)) {
            return param("M must have strictly positive diagonal");
        }
    }
    let mut sq = 0.0;
    for i in 0..x.len() {
        let mi = m.map_or(1.0, |m| m[i]);
        let d = x[i] - (x[i] - mi * g[i]).max(0.0);
        sq += d * d;
    }
    Ok(sq.sqrt())
}

/// `I⁺ = {i : 0 ≤ x_i ≤ ε_k, g_i > 0}` (closed window), `I⁻` its complement.
pub fn partition_bound(x: &DVector<f64>, g: &DVector<f64>, eps_k: f64) -> Result<IndexPartition> {
    check_pair(x, g)?;
    if !(eps_k >= 0.0) {
        return param(format!("eps_k must be nonnegative, got {eps_k}"));
    }
    Ok(IndexPartition::from_mask(
        (0..x.len()).map(|i| x[i] <= eps_k && g[i] > 0.0).collect(),
    ))
}

/// Raw residual of the exact first-order conditions for `x ≥ 0`:
/// `max{ max_{x_i>0} |g_i|, max(0, −min_i g_i) }`.
pub fn stationarity_residual(x: &DVector<f64>, g: &DVector<f64>) -> f64 {
    let free = (0..x.len())
        .filter(|&i| x[i] > 0.0)
        .map(|i| g[i].abs())
        .fold(0.0, f64::max);
    let neg = g.iter().map(|&v| -v).fold(0.0, f64::max);
    free.max(neg)
}

/// Accepted backtracking step.
#[derive(Debug, Clone, PartialEq)]
pub struct LineSearchStep {
    pub m: usize,
    pub alpha: f64,
    pub x_next: DVector<f64>,
    /// f(x) − f(x_next).
    pub decrease: f64,
    /// Right-hand side of the acceptance test at the accepted step.
    pub rhs: f64,
}

/// Smallest `m ∈ {0, …, max_backtracks}` passing the generalized Armijo test.
pub fn linesearch_bound(
    oracle: &dyn Objective,
    x: &DVector<f64>,
    g: &DVector<f64>,
    p: &DVector<f64>,
    part: &IndexPartition,
    cfg: &SolverConfig,
) -> Result<LineSearchStep> {
    cfg.validate()?;
    check_pair(x, g)?;
    ensure_finite(p.as_slice(), "search direction")?;
    let free_term: f64 = part.minus().iter().map(|&i| g[i] * p[i]).sum();
    let mut last_rhs = 0.0;
    for m in 0..=cfg.max_backtracks {
        let alpha = cfg.beta.powi(m as i32);
        let x_next = project_nonneg(&(x - p * alpha))?;
        let fixed_term: f64 = part.plus().iter().map(|&i| g[i] * (x[i] - x_next[i])).sum();
        let rhs = cfg.sigma * (alpha * free_term + fixed_term);
        let decrease = oracle.decrease(x, &x_next)?;
        if !decrease.is_finite() {
            return Err(Error::Numeric(format!("objective not finite at trial step {m}")));
        }
        if decrease >= rhs {
            return Ok(LineSearchStep {
                m,
                alpha,
                x_next,
                decrease,
                rhs,
            });
        }
        last_rhs = rhs;
    }
    Err(Error::BacktrackCap {
        backtracks: cfg.max_backtracks,
        model_decrease: last_rhs,
    })
}

/// Tolerance and projected-gradient scaling.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationarityConfig {
    pub epsilon: f64,
    /// Diagonal of `M` in `ω_k`; identity when `None`.
    pub m_diag: Option<Vec<f64>>,
}

impl StationarityConfig {
    pub fn new(epsilon: f64) -> Self {
        Self { epsilon, m_diag: None }
    }

    fn validate(&self, n: usize) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return param(format!("epsilon must be positive, got {}", self.epsilon));
        }
        if let Some(m) = &self.m_diag {
            if m.len() != n || m.iter().any(|&v| !(v > 0.0)) {
                return param("M must be a positive diagonal of length n");
            }
        }
        Ok(())
    }
}

impl Default for StationarityConfig {
    fn default() -> Self {
        Self::new(1e-6)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Variant {
    Classic,
    Scaled,
}

impl Variant {
    pub fn name(&self) -> &'static str {
        match self {
            Variant::Classic => "classic",
            Variant::Scaled => "scaled",
        }
    }
}

/// Classic two-metric projection, `p_k = D_k g_k`.
pub fn solve_bound_classic(
    oracle: &dyn Objective,
    x0: &DVector<f64>,
    scfg: &StationarityConfig,
    cfg: &SolverConfig,
    metric: &MetricSpec,
) -> Result<BoundReport> {
    solve_bound(Variant::Classic, oracle, x0, scfg, cfg, metric)
}

/// Scaled two-metric projection, `p_k = S_k D_k S_k g_k`.
pub fn solve_bound_scaled(
    oracle: &dyn Objective,
    x0: &DVector<f64>,
    scfg: &StationarityConfig,
    cfg: &SolverConfig,
    metric: &MetricSpec,
) -> Result<BoundReport> {
    solve_bound(Variant::Scaled, oracle, x0, scfg, cfg, metric)
}

pub fn solve_bound(
    variant: Variant,
    oracle: &dyn Objective,
    x0: &DVector<f64>,
    scfg: &StationarityConfig,
    cfg: &SolverConfig,
    metric: &MetricSpec,
) -> Result<BoundReport> {
    let n = oracle.dim();
    if x0.len() != n {
        return param(format!("x0 has dimension {}, expected {n}", x0.len()));
    }
    check_feasible(x0)?;
    cfg.validate()?;
    scfg.validate(n)?;
    metric.validate(n)?;
    if metric.needs_hessian() && !oracle.has_hessian() {
        return param("metric requires a Hessian but the objective has none");
    }

    let clock = Stopwatch::new(cfg.record_time);
    let mut ws = MetricWorkspace::new(metric.clone(), oracle.constant_hessian());
    let mut x = x0.clone();
    let mut trace = Vec::new();
    let mut last_g: Option<DVector<f64>>;
    let mut message = None;
    let eps = scfg.epsilon;

    let status = loop {
        let k = trace.len();
        let (f, g) = match (oracle.value(&x), oracle.gradient(&x)) {
            (Ok(f), Ok(g)) if f.is_finite() && g.iter().all(|v| v.is_finite()) => (f, g),
            _ => {
                message = Some(format!("objective or gradient not finite at iteration {k}"));
                last_g = None;
                break Status::NumericError;
            }
        };
        let omega = omega_measure(&x, &g, scfg.m_diag.as_deref())?;
        let eps_k = eps.min(omega);
        let part = partition_bound(&x, &g, eps_k)?;
        let s = match variant {
            Variant::Classic => DVector::from_fn(n, |i, _| if part.is_plus(i) { x[i].min(1.0) } else { 1.0 }),
            Variant::Scaled => scaling_matrix(&x, &g)?,
        };
        let sg = s.component_mul(&g);
        let mut rec = BoundRecord {
            k,
            f,
            scaled_grad_norm: sg.norm(),
            eps_k,
            omega_k: omega,
            n_plus: part.plus().len(),
            m_k: None,
            alpha_k: None,
            time_s: clock.elapsed(),
            grad_norm: g.norm(),
            decrease: None,
            accepted_rhs: None,
            metric_bounds: None,
        };
        last_g = Some(g.clone());
        if rec.scaled_grad_norm <= eps {
            trace.push(rec);
            break Status::Converged;
        }
        if k >= cfg.max_iterations {
            trace.push(rec);
            break Status::IterationCap;
        }

        let prepared = match ws.prepare(&part, || oracle.hessian(&x)) {
            Ok(p) => p,
            Err(e) => {
                message = Some(e.to_string());
                trace.push(rec);
                break Status::NumericError;
            }
        };
        let direction = match variant {
            Variant::Classic => prepared.apply(&g),
            Variant::Scaled => prepared.apply(&sg).map(|d| s.component_mul(&d)),
        };
        let p = match direction {
            Ok(p) => p,
            Err(e) => {
                message = Some(e.to_string());
                trace.push(rec);
                break Status::NumericError;
            }
        };
        if variant == Variant::Scaled {
            rec.metric_bounds = Some(prepared.bounds());
        }
        if p.iter().all(|&v| v == 0.0) {
            message = Some(format!(
                "zero step at iteration {k} with scaled gradient norm {:e}",
                rec.scaled_grad_norm
            ));
            trace.push(rec);
            break Status::NumericError;
        }
        match linesearch_bound(oracle, &x, &g, &p, &part, cfg) {
            Ok(step) => {
                rec.m_k = Some(step.m);
                rec.alpha_k = Some(step.alpha);
                rec.decrease = Some(step.decrease);
                rec.accepted_rhs = Some(step.rhs);
                trace.push(rec);
                x = step.x_next;
            }
            Err(Error::BacktrackCap { .. }) => {
                message = Some(format!("backtracking cap reached at iteration {k}"));
                trace.push(rec);
                break Status::BacktrackCap;
            }
            Err(e) => {
                message = Some(e.to_string());
                trace.push(rec);
                break Status::NumericError;
            }
        }
    };

    let certificate = match &last_g {
        Some(g) if g.len() == n => Some(eps_1o_check(&x, g, eps)?),
        _ => None,
    };
    let last = trace.last();
    Ok(BoundReport {
        method: format!("{}-{}", variant.name(), metric.name()),
        status,
        iterations: trace.iter().filter(|r| r.m_k.is_some()).count(),
        x: x.iter().copied().collect(),
        final_value: last.map_or(f64::NAN, |r| r.objective()),
        final_residual: last.map_or(f64::NAN, |r| r.residual()),
        certificate,
        message,
        trace,
    })
}

/// Constants entering the scaled method's complexity certificate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ComplexityConstants {
    pub f0: f64,
    pub f_low: f64,
    pub lambda_min: f64,
    pub lambda_max: f64,
    /// Gradient-norm bound `G`.
    pub grad_bound: f64,
    pub lipschitz: f64,
    pub sigma: f64,
    pub beta: f64,
    pub epsilon: f64,
}

impl ComplexityConstants {
    fn validate(&self) -> Result<()> {
        let positive = [
            ("lambda_min", self.lambda_min),
            ("lambda_max", self.lambda_max),
            ("G", self.grad_bound),
            ("L", self.lipschitz),
        ];
        for (name, v) in positive {
            if !(v > 0.0) || !v.is_finite() {
                return param(format!("{name} must be positive and finite, got {v}"));
            }
        }
        if self.lambda_max < self.lambda_min {
            return param("lambda_max must be at least lambda_min");
        }
        if !(self.sigma > 0.0 && self.sigma < 1.0) || !(self.beta > 0.0 && self.beta < 1.0) {
            return param("sigma and beta must lie in (0, 1)");
        }
        if !(self.epsilon > 0.0 && self.epsilon < 1.0) {
            return param(format!("epsilon must lie in (0, 1), got {}", self.epsilon));
        }
        if !(self.f0 >= self.f_low) {
            return param("f0 must be at least f_low");
        }
        Ok(())
    }

    /// Step floor `ᾱ = min{1/(λ_max G), 2(1−σ)/(L λ_max)}`.
    pub fn step_floor(&self) -> f64 {
        (1.0 / (self.lambda_max * self.grad_bound)).min(2.0 * (1.0 - self.sigma) / (self.lipschitz * self.lambda_max))
    }

    /// Guaranteed per-step decrease `σ·min{ᾱβλ_min/4, 1/2}·ε²`.
    pub fn decrease_floor(&self) -> f64 {
        self.sigma * (self.step_floor() * self.beta * self.lambda_min / 4.0).min(0.5) * self.epsilon * self.epsilon
    }

    /// Upper bound `⌈log_β ᾱ⌉ + 1` on the backtracking exponent.
    pub fn backtrack_bound(&self) -> usize {
        let e = (self.step_floor().ln() / self.beta.ln()).ceil().max(0.0);
        e as usize + 1
    }

    /// Constants for a finished scaled run: `G` is the largest observed
    /// gradient norm and the λ window spans every applied metric.
    pub fn from_trace(
        report: &BoundReport,
        lipschitz: f64,
        f_low: f64,
        cfg: &SolverConfig,
        epsilon: f64,
    ) -> Result<Self> {
        let first = report
            .trace
            .first()
            .ok_or_else(|| Error::Parameter("empty trace".into()))?;
        let grad_bound = report.trace.iter().map(|r| r.grad_norm).fold(0.0, f64::max);
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for (a, b) in report.trace.iter().filter_map(|r| r.metric_bounds) {
            lo = lo.min(a);
            hi = hi.max(b);
        }
        if !lo.is_finite() {
            // No step taken; any window works.
            (lo, hi) = (1.0, 1.0);
        }
        Ok(Self {
            f0: first.f,
            f_low,
            lambda_min: lo,
            lambda_max: hi,
            grad_bound: grad_bound.max(f64::MIN_POSITIVE),
            lipschitz,
            sigma: cfg.sigma,
            beta: cfg.beta,
            epsilon,
        })
    }
}

/// `⌈(f0 − f_low)·max{4λ_max G, 2Lλ_max/(1−σ), 2βλ_min} / (σβλ_min ε²)⌉`.
///
/// Saturates at `u64::MAX`.
pub fn iteration_bound(c: &ComplexityConstants) -> Result<u64> {
    c.validate()?;
    let numer = (c.f0 - c.f_low)
        * (4.0 * c.lambda_max * c.grad_bound)
            .max(2.0 * c.lipschitz * c.lambda_max / (1.0 - c.sigma))
            .max(2.0 * c.beta * c.lambda_min);
    let denom = c.sigma * c.beta * c.lambda_min * c.epsilon * c.epsilon;
    let k = (numer / denom).ceil();
    Ok(if k >= u64::MAX as f64 { u64::MAX } else { k as u64 })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::QuadraticBox;
    use nalgebra::DMatrix;

    fn v(xs: &[f64]) -> DVector<f64> {
        DVector::from_row_slice(xs)
    }

    /// f(x) = ½(x − c)², one dimension.
    fn shifted(c: f64) -> QuadraticBox {
        QuadraticBox::new(DMatrix::from_element(1, 1, 1.0), v(&[c])).unwrap()
    }

    /// f(x) = x on x ≥ 0.
    struct Linear;

    impl Objective for Linear {
        fn dim(&self) -> usize {
            1
        }
        fn constants(&self) -> crate::oracle::Constants {
            crate::oracle::Constants {
                lipschitz: Some(1e-12),
                lower_bound: Some(0.0),
                gradient_bound: Some(1.0),
            }
        }
        fn value(&self, x: &DVector<f64>) -> Result<f64> {
            Ok(x[0])
        }
        fn gradient(&self, _x: &DVector<f64>) -> Result<DVector<f64>> {
            Ok(v(&[1.0]))
        }
    }

    #[test]
    fn projection_cases() {
        assert_eq!(project_nonneg(&v(&[1.0, -2.0, 0.0])).unwrap(), v(&[1.0, 0.0, 0.0]));
        assert_eq!(project_nonneg(&v(&[-5.0])).unwrap(), v(&[0.0]));
        let x = v(&[0.3, 2.0]);
        assert_eq!(project_nonneg(&x).unwrap(), x);
        assert!(matches!(project_nonneg(&v(&[f64::NAN])), Err(Error::Numeric(_))));
    }

    #[test]
    fn scaling_matrix_cases() {
        assert_eq!(
            scaling_matrix(&v(&[0.5, 0.0]), &v(&[2.0, 1.0])).unwrap(),
            v(&[0.5, 0.0])
        );
        assert_eq!(
            scaling_matrix(&v(&[2.0, 3.0]), &v(&[-1.0, 0.0])).unwrap(),
            v(&[1.0, 1.0])
        );
        let s = scaling_matrix(&v(&[0.25]), &v(&[4.0])).unwrap();
        assert_eq!(s, v(&[0.25]));
        assert_eq!(s.component_mul(&v(&[4.0])).norm(), 1.0);
    }

    #[test]
    fn eps_1o_cases() {
        let c = eps_1o_check(&v(&[1.0, 0.0]), &v(&[0.0, 5.0]), 0.1).unwrap();
        assert!(c.is_eps_1o);
        assert_eq!((c.scaled_norm, c.min_gradient), (0.0, 0.0));

        let c = eps_1o_check(&v(&[0.5, 0.0]), &v(&[2.0, 1.0]), 0.5).unwrap();
        assert!(!c.is_eps_1o);
        assert_eq!(c.scaled_norm, 1.0);

        let c = eps_1o_check(&v(&[0.0, 3.0]), &v(&[-1.0, 0.0]), 0.5).unwrap();
        assert!(!c.is_eps_1o);
        assert_eq!(c.min_gradient, -1.0);

        assert!(matches!(
            eps_1o_check(&v(&[-1.0]), &v(&[0.0]), 0.1),
            Err(Error::Parameter(_))
        ));
    }

    #[test]
    fn omega_cases() {
        assert_eq!(omega_measure(&v(&[1.0, 0.0]), &v(&[0.0, 0.0]), None).unwrap(), 0.0);
        let w = omega_measure(&v(&[1.0, 0.0]), &v(&[1.0, -1.0]), None).unwrap();
        assert!((w - 2f64.sqrt()).abs() < 1e-15);
        let g = v(&[0.01, -0.02]);
        let w = omega_measure(&v(&[3.0, 4.0]), &g, None).unwrap();
        assert!((w - g.norm()).abs() < 1e-15);
    }

    #[test]
    fn partition_cases() {
        let p = partition_bound(&v(&[0.0, 0.5, 2.0]), &v(&[1.0, 1.0, 1.0]), 0.5).unwrap();
        assert_eq!((p.plus(), p.minus()), (&[0, 1][..], &[2][..]));
        let p = partition_bound(&v(&[0.0, 0.1]), &v(&[-1.0, 0.0]), 1.0).unwrap();
        assert!(p.plus().is_empty());
        let p = partition_bound(&v(&[0.0]), &v(&[1.0]), 0.0).unwrap();
        assert_eq!(p.plus(), &[0]);
    }

    #[test]
    fn linesearch_takes_full_step() {
        let f = shifted(1.0);
        let (x, g) = (v(&[0.0]), v(&[-1.0]));
        let cfg = SolverConfig::default();
        let step = linesearch_bound(&f, &x, &g, &g, &IndexPartition::all_minus(1), &cfg).unwrap();
        assert_eq!((step.m, step.alpha), (0, 1.0));
        assert_eq!(step.x_next, v(&[1.0]));
    }

    #[test]
    fn linesearch_zero_direction() {
        let f = shifted(1.0);
        let x = v(&[2.0]);
        let step = linesearch_bound(
            &f,
            &x,
            &v(&[1.0]),
            &v(&[0.0]),
            &IndexPartition::all_minus(1),
            &SolverConfig::default(),
        )
        .unwrap();
        assert_eq!(step.m, 0);
        assert_eq!(step.x_next, x);
        assert_eq!((step.decrease, step.rhs), (0.0, 0.0));
    }

    #[test]
    fn linesearch_backtracks_three_times() {
        let f = shifted(0.0);
        let cfg = SolverConfig {
            sigma: 0.9,
            ..Default::default()
        };
        let (x, g) = (v(&[4.0]), v(&[4.0]));
        let step = linesearch_bound(&f, &x, &g, &g, &IndexPartition::all_minus(1), &cfg).unwrap();
        assert_eq!(step.m, 3);
        assert_eq!(step.x_next, v(&[3.5]));
    }

    #[test]
    fn linesearch_cap_is_an_error() {
        // Ascent direction: no step can satisfy the test.
        let f = shifted(0.0);
        let cfg = SolverConfig {
            max_backtracks: 5,
            ..Default::default()
        };
        let r = linesearch_bound(
            &f,
            &v(&[4.0]),
            &v(&[4.0]),
            &v(&[-4.0]),
            &IndexPartition::all_minus(1),
            &cfg,
        );
        assert!(matches!(r, Err(Error::BacktrackCap { backtracks: 5, .. })));
    }

    #[test]
    fn classic_stops_immediately_at_stationary_start() {
        let f = shifted(-2.0);
        let rep = solve_bound_classic(
            &f,
            &v(&[0.0]),
            &StationarityConfig::new(1e-8),
            &SolverConfig::default(),
            &MetricSpec::identity(),
        )
        .unwrap();
        assert_eq!(rep.status, Status::Converged);
        assert_eq!(rep.iterations, 0);
        assert!(rep.certificate.unwrap().is_eps_1o);
    }

    #[test]
    fn classic_converges_to_interior_minimizer() {
        let f = shifted(1.0);
        let rep = solve_bound_classic(
            &f,
            &v(&[0.0]),
            &StationarityConfig::new(1e-8),
            &SolverConfig::default(),
            &MetricSpec::identity(),
        )
        .unwrap();
        assert!(rep.converged());
        assert!((rep.x[0] - 1.0).abs() <= 1e-8);
    }

    #[test]
    fn classic_finds_separable_constrained_minimizer() {
        let f = QuadraticBox::new(DMatrix::identity(2, 2), v(&[-1.0, 1.0])).unwrap();
        let rep = solve_bound_classic(
            &f,
            &v(&[1.0, 1.0]),
            &StationarityConfig::new(1e-8),
            &SolverConfig::default(),
            &MetricSpec::identity(),
        )
        .unwrap();
        assert!(rep.converged());
        assert!((rep.point() - v(&[0.0, 1.0])).amax() < 1e-6);
    }

    #[test]
    fn scaled_matches_classic_when_scaling_inactive() {
        // All gradient components nonpositive: S = I.
        let f = QuadraticBox::new(DMatrix::identity(2, 2), v(&[3.0, 2.0])).unwrap();
        let x0 = v(&[1.0, 0.5]);
        let cfg = SolverConfig {
            max_iterations: 1,
            ..Default::default()
        };
        let scfg = StationarityConfig::new(1e-8);
        let a = solve_bound_classic(&f, &x0, &scfg, &cfg, &MetricSpec::identity()).unwrap();
        let b = solve_bound_scaled(&f, &x0, &scfg, &cfg, &MetricSpec::identity()).unwrap();
        assert_eq!(a.x, b.x);
        assert_eq!(a.trace[0].m_k, b.trace[0].m_k);
    }

    #[test]
    fn scaled_converges_in_one_dimension() {
        let rep = solve_bound_scaled(
            &shifted(1.0),
            &v(&[0.0]),
            &StationarityConfig::new(1e-8),
            &SolverConfig::default(),
            &MetricSpec::identity(),
        )
        .unwrap();
        assert!(rep.converged());
        assert!((rep.x[0] - 1.0).abs() <= 1e-8);
    }

    #[test]
    fn scaled_on_linear_objective_follows_quadratic_shrinkage() {
        let t = 0.3;
        let rep = solve_bound_scaled(
            &Linear,
            &v(&[t]),
            &StationarityConfig::new(1e-3),
            &SolverConfig::default(),
            &MetricSpec::identity(),
        )
        .unwrap();
        assert!(rep.converged(), "{:?}", rep.status);
        // Each accepted step removes α_k·x_k² (or x_k itself once it clamps).
        for w in rep.trace.windows(2) {
            let (a, b) = (&w[0], &w[1]);
            let xk = a.f;
            let alpha = a.alpha_k.unwrap();
            let expected = (xk - alpha * xk * xk).max(0.0);
            assert!((b.f - expected).abs() < 1e-15);
        }
        assert!(rep.x[0] * 1.0 <= 1e-3);
        assert!(rep.certificate.unwrap().is_eps_1o);
    }

    #[test]
    fn iteration_bound_direct_evaluation() {
        let c = ComplexityConstants {
            f0: 1.0,
            f_low: 0.0,
            lambda_min: 1.0,
            lambda_max: 1.0,
            grad_bound: 1.0,
            lipschitz: 1.0,
            sigma: 0.5,
            beta: 0.5,
            epsilon: 0.5,
        };
        assert_eq!(iteration_bound(&c).unwrap(), 64);
        let half = ComplexityConstants { epsilon: 0.25, ..c };
        assert_eq!(iteration_bound(&half).unwrap(), 256);
        let flat = ComplexityConstants { f0: 0.0, ..c };
        assert_eq!(iteration_bound(&flat).unwrap(), 0);
        let bad = ComplexityConstants { epsilon: 1.0, ..c };
        assert!(iteration_bound(&bad).is_err());
        let bad = ComplexityConstants { lambda_min: 0.0, ..c };
        assert!(iteration_bound(&bad).is_err());
    }

    #[test]
    fn stationarity_residual_cases() {
        assert_eq!(stationarity_residual(&v(&[1.0, 0.0]), &v(&[0.0, 3.0])), 0.0);
        assert_eq!(stationarity_residual(&v(&[1.0, 0.0]), &v(&[0.5, -0.2])), 0.5);
        assert_eq!(stationarity_residual(&v(&[0.0]), &v(&[-0.7])), 0.7);
    }
}
