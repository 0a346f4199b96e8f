//! Two-metric adaptive projection for `min ψ(x) = f(x) + γ‖x‖₁`.
//!
//! At `x_k` every coordinate is assigned an orthant:
//!
//! | case                                  | shift ω_i | projection      |
//! |---------------------------------------|-----------|-----------------|
//! | `x_i > 0`, or `x_i = 0` and `g_i ≤ −γ` | `+γ`      | `max{y_i, 0}`   |
//! | `x_i < 0`, or `x_i = 0` and `g_i ≥ γ`  | `−γ`      | `min{y_i, 0}`   |
//! | `x_i = 0` and `|g_i| < γ`              | `0`       | `0`             |
//!
//! The last row is the plus set `I⁺`. The step is
//! `x_{k+1} = P_k(x_k − α_k D_k (g_k + ω_k))`, with `α_k = β^{m_k}` the first
//! trial satisfying `ψ(x_k) − ψ(x_k(α)) ≥ σ α (ḡ + ω̄)ᵀ p̄` (bars: restriction
//! to `I⁻`).

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::bound::LineSearchStep;
use crate::error::{ensure_finite, param, Error, Result};
use crate::metric::{apply_metric, IndexPartition, MetricSpec, MetricWorkspace};
use crate::oracle::{lasso_oracle, LassoInstance, Objective};
use crate::report::{L1Record, L1Report, SolverConfig, Status, Stopwatch, TraceRecord};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Orthant {
    Positive,
    Negative,
    /// Pinned at zero (the plus set).
    Zero,
}

/// Orthant assignment of an iterate.
#[derive(Debug, Clone, PartialEq)]
pub struct L1State {
    pub x: DVector<f64>,
    pub g: DVector<f64>,
    pub gamma: f64,
    pub orthant: Vec<Orthant>,
    pub partition: IndexPartition,
    /// Sign shift ω ∈ {γ, −γ, 0}ⁿ.
    pub shift: DVector<f64>,
}

impl L1State {
    /// `ḡ + ω̄` embedded in `R^n` (zero on the plus set).
    pub fn shifted_gradient(&self) -> DVector<f64> {
        &self.g + &self.shift
    }
}

pub fn l1_classify(x: &DVector<f64>, g: &DVector<f64>, gamma: f64) -> Result<L1State> {
    if !(gamma > 0.0) || !gamma.is_finite() {
        return param(format!("gamma must be positive, got {gamma}"));
    }
    if x.len() != g.len() {
        return param(format!("x has {} entries but g has {}", x.len(), g.len()));
    }
    ensure_finite(x.as_slice(), "point")?;
    ensure_finite(g.as_slice(), "gradient")?;
    let orthant: Vec<Orthant> = (0..x.len())
        .map(|i| {
            if x[i] > 0.0 || (x[i] == 0.0 && g[i] <= -gamma) {
                Orthant::Positive
            } else if x[i] < 0.0 || (x[i] == 0.0 && g[i] >= gamma) {
                Orthant::Negative
            } else {
                Orthant::Zero
            }
        })
        .collect();
    let shift = DVector::from_fn(x.len(), |i, _| match orthant[i] {
        Orthant::Positive => gamma,
        Orthant::Negative => -gamma,
        Orthant::Zero => 0.0,
    });
    let partition = IndexPartition::from_mask(orthant.iter().map(|&o| o == Orthant::Zero).collect());
    Ok(L1State {
        x: x.clone(),
        g: g.clone(),
        gamma,
        orthant,
        partition,
        shift,
    })
}

/// Orthant-respecting projection `P_k`.
pub fn l1_project(state: &L1State, y: &DVector<f64>) -> DVector<f64> {
    DVector::from_fn(y.len(), |i, _| match state.orthant[i] {
        Orthant::Positive => y[i].max(0.0),
        Orthant::Negative => y[i].min(0.0),
        Orthant::Zero => 0.0,
    })
}

/// Norm of the minimum-norm element of `∇f(x) + γ∂‖x‖₁`.
pub fn l1_residual(x: &DVector<f64>, g: &DVector<f64>, gamma: f64) -> f64 {
    let mut sq = 0.0;
    for i in 0..x.len() {
        let r = if x[i] > 0.0 {
            g[i] + gamma
        } else if x[i] < 0.0 {
            g[i] - gamma
        } else {
            g[i].signum() * (g[i].abs() - gamma).max(0.0)
        };
        sq += r * r;
    }
    sq.sqrt()
}

pub fn l1_norm(x: &DVector<f64>) -> f64 {
    x.iter().map(|v| v.abs()).sum()
}

/// `p = D_k (g + ω)` for a one-off application.
pub fn l1_step_direction(state: &L1State, metric: &MetricSpec, hessian: Option<&DMatrix<f64>>) -> Result<DVector<f64>> {
    apply_metric(metric, hessian, &state.partition, &state.shifted_gradient())
}

/// `(ḡ + ω̄)ᵀ p̄`.
pub fn model_decrease(state: &L1State, p: &DVector<f64>) -> f64 {
    state
        .partition
        .minus()
        .iter()
        .map(|&i| (state.g[i] + state.shift[i]) * p[i])
        .sum()
}

/// `ψ(x) − ψ(y)` using the objective's cancellation-free decrease.
pub fn psi_decrease(oracle: &dyn Objective, gamma: f64, x: &DVector<f64>, y: &DVector<f64>) -> Result<f64> {
    let smooth = oracle.decrease(x, y)?;
    let l1: f64 = x.iter().zip(y.iter()).map(|(a, b)| a.abs() - b.abs()).sum();
    Ok(smooth + gamma * l1)
}

pub fn linesearch_l1(
    oracle: &dyn Objective,
    state: &L1State,
    p: &DVector<f64>,
    cfg: &SolverConfig,
) -> Result<LineSearchStep> {
    cfg.validate()?;
    ensure_finite(p.as_slice(), "search direction")?;
    let model = model_decrease(state, p);
    let x = &state.x;
    let mut last_rhs = 0.0;
    for m in 0..=cfg.max_backtracks {
        let alpha = cfg.beta.powi(m as i32);
        let x_next = l1_project(state, &(x - p * alpha));
        let rhs = cfg.sigma * alpha * model;
        let decrease = psi_decrease(oracle, state.gamma, x, &x_next)?;
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

/// Loop state shared by single-stage and continuation runs.
struct StageRun<'a> {
    oracle: &'a dyn Objective,
    cfg: &'a SolverConfig,
    ws: MetricWorkspace,
    clock: Stopwatch,
    trace: Vec<L1Record>,
    steps: usize,
    message: Option<String>,
}

impl StageRun<'_> {
    fn run(&mut self, x0: DVector<f64>, gamma: f64, tol: f64, stage: usize) -> (DVector<f64>, Status) {
        let mut x = x0;
        let mut stage_steps = 0;
        loop {
            let k = self.steps;
            let (f, g) = match (self.oracle.value(&x), self.oracle.gradient(&x)) {
                (Ok(f), Ok(g)) if f.is_finite() && g.iter().all(|v| v.is_finite()) => (f, g),
                _ => {
                    self.message = Some(format!("objective or gradient not finite at iteration {k}"));
                    return (x, Status::NumericError);
                }
            };
            let state = match l1_classify(&x, &g, gamma) {
                Ok(s) => s,
                Err(e) => {
                    self.message = Some(e.to_string());
                    return (x, Status::NumericError);
                }
            };
            let residual = l1_residual(&x, &g, gamma);
            let mut rec = L1Record {
                k,
                stage,
                gamma,
                psi: f + gamma * l1_norm(&x),
                residual,
                n_plus: state.partition.plus().len(),
                support_size: x.iter().filter(|&&v| v != 0.0).count(),
                m_k: None,
                alpha_k: None,
                time_s: self.clock.elapsed(),
                decrease: None,
                model_decrease: None,
            };
            if residual <= tol {
                self.trace.push(rec);
                return (x, Status::Converged);
            }
            if stage_steps >= self.cfg.max_iterations {
                self.trace.push(rec);
                return (x, Status::IterationCap);
            }
            let oracle = self.oracle;
            let p = match self
                .ws
                .prepare(&state.partition, || oracle.hessian(&x))
                .and_then(|pm| pm.apply(&state.shifted_gradient()))
            {
                Ok(p) => p,
                Err(e) => {
                    self.message = Some(e.to_string());
                    self.trace.push(rec);
                    return (x, Status::NumericError);
                }
            };
            rec.model_decrease = Some(model_decrease(&state, &p));
            if p.iter().all(|&v| v == 0.0) {
                self.message = Some(format!("zero step at iteration {k} with residual {residual:e}"));
                self.trace.push(rec);
                return (x, Status::NumericError);
            }
            match linesearch_l1(self.oracle, &state, &p, self.cfg) {
                Ok(step) => {
                    rec.m_k = Some(step.m);
                    rec.alpha_k = Some(step.alpha);
                    rec.decrease = Some(step.decrease);
                    self.trace.push(rec);
                    x = step.x_next;
                    self.steps += 1;
                    stage_steps += 1;
                }
                Err(Error::BacktrackCap { .. }) => {
                    self.message = Some(format!("backtracking cap reached at iteration {k}"));
                    self.trace.push(rec);
                    return (x, Status::BacktrackCap);
                }
                Err(e) => {
                    self.message = Some(e.to_string());
                    self.trace.push(rec);
                    return (x, Status::NumericError);
                }
            }
        }
    }

    fn finish(self, method: String, x: DVector<f64>, status: Status) -> L1Report {
        let last = self.trace.last();
        L1Report {
            method,
            status,
            iterations: self.steps,
            x: x.iter().copied().collect(),
            final_value: last.map_or(f64::NAN, |r| r.objective()),
            final_residual: last.map_or(f64::NAN, |r| r.residual()),
            certificate: None,
            message: self.message,
            trace: self.trace,
        }
    }
}

fn check_l1_inputs(
    oracle: &dyn Objective,
    x0: &DVector<f64>,
    gamma: f64,
    tol: f64,
    cfg: &SolverConfig,
    metric: &MetricSpec,
) -> Result<()> {
    let n = oracle.dim();
    if x0.len() != n {
        return param(format!("x0 has dimension {}, expected {n}", x0.len()));
    }
    ensure_finite(x0.as_slice(), "x0")?;
    if !(gamma > 0.0) || !gamma.is_finite() {
        return param(format!("gamma must be positive, got {gamma}"));
    }
    if !(tol >= 0.0) {
        return param(format!("tolerance must be nonnegative, got {tol}"));
    }
    cfg.validate()?;
    metric.validate(n)?;
    if metric.needs_hessian() && !oracle.has_hessian() {
        return param("metric requires a Hessian but the objective has none");
    }
    Ok(())
}

/// Two-metric adaptive projection at a fixed γ, stopping once
/// [`l1_residual`] ≤ `tol`.
pub fn solve_l1(
    oracle: &dyn Objective,
    x0: &DVector<f64>,
    gamma: f64,
    tol: f64,
    cfg: &SolverConfig,
    metric: &MetricSpec,
) -> Result<L1Report> {
    check_l1_inputs(oracle, x0, gamma, tol, cfg, metric)?;
    let mut run = StageRun {
        oracle,
        cfg,
        ws: MetricWorkspace::new(metric.clone(), oracle.constant_hessian()),
        clock: Stopwatch::new(cfg.record_time),
        trace: Vec::new(),
        steps: 0,
        message: None,
    };
    let (x, status) = run.run(x0.clone(), gamma, tol, 0);
    Ok(run.finish(format!("adaptive-{}", metric.name()), x, status))
}

/// Regularization schedule `γ_{s+1} = max{η γ_s, γ}` starting at `γ₀`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ContinuationConfig {
    pub gamma_start: f64,
    pub gamma_target: f64,
    pub reduction: f64,
    /// Intermediate stages stop at `max(stage_tol_factor·γ_s, tol)`.
    pub stage_tol_factor: f64,
    /// Residual tolerance of the final stage.
    pub tol: f64,
    pub max_stages: usize,
}

/// Default reduction factor between stages.
pub const DEFAULT_REDUCTION: f64 = 0.5;

impl ContinuationConfig {
    /// Path from `γ₀ = max{½‖Aᵀb‖_∞, γ}` down to the instance's γ.
    pub fn for_instance(inst: &LassoInstance, tol: f64) -> Self {
        Self {
            gamma_start: (0.5 * inst.gamma_max()).max(inst.gamma),
            gamma_target: inst.gamma,
            reduction: DEFAULT_REDUCTION,
            stage_tol_factor: 0.1,
            tol,
            max_stages: 100,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gamma_target > 0.0) || !(self.gamma_start >= self.gamma_target) {
            return param("continuation requires gamma_start >= gamma_target > 0");
        }
        if !(self.reduction > 0.0 && self.reduction < 1.0) {
            return param(format!("reduction must lie in (0, 1), got {}", self.reduction));
        }
        if !(self.tol >= 0.0) || !(self.stage_tol_factor >= 0.0) {
            return param("tolerances must be nonnegative");
        }
        if self.max_stages == 0 {
            return param("max_stages must be at least 1");
        }
        Ok(())
    }

    /// The γ values visited, final stage last.
    pub fn schedule(&self) -> Vec<f64> {
        let mut out = vec![self.gamma_start];
        let mut g = self.gamma_start;
        while g > self.gamma_target && out.len() < self.max_stages {
            g = (self.reduction * g).max(self.gamma_target);
            out.push(g);
        }
        out
    }
}

/// Warm-started adaptive projection along a decreasing γ path, from `x = 0`.
///
/// The returned trace concatenates the stages (the `stage` column marks
/// them); a stage's stopping iterate is recorded once, at the start of the
/// next stage.
pub fn solve_lasso_continuation(
    inst: &LassoInstance,
    ccfg: &ContinuationConfig,
    cfg: &SolverConfig,
    metric: &MetricSpec,
) -> Result<L1Report> {
    let oracle = lasso_oracle(inst)?;
    let x0 = DVector::zeros(inst.cols());
    solve_l1_continuation(&oracle, &x0, ccfg, cfg, metric)
}

/// [`solve_lasso_continuation`] for an arbitrary smooth part and start.
pub fn solve_l1_continuation(
    oracle: &dyn Objective,
    x0: &DVector<f64>,
    ccfg: &ContinuationConfig,
    cfg: &SolverConfig,
    metric: &MetricSpec,
) -> Result<L1Report> {
    ccfg.validate()?;
    check_l1_inputs(oracle, x0, ccfg.gamma_target, ccfg.tol, cfg, metric)?;
    let mut run = StageRun {
        oracle,
        cfg,
        ws: MetricWorkspace::new(metric.clone(), oracle.constant_hessian()),
        clock: Stopwatch::new(cfg.record_time),
        trace: Vec::new(),
        steps: 0,
        message: None,
    };
    let method = format!("adaptive-continuation-{}", metric.name());
    let mut x = x0.clone();
    let mut gamma = ccfg.gamma_start;
    for stage in 0..ccfg.max_stages {
        let last = gamma <= ccfg.gamma_target;
        let tol = if last {
            ccfg.tol
        } else {
            (ccfg.stage_tol_factor * gamma).max(ccfg.tol)
        };
        let (next, status) = run.run(x, gamma, tol, stage);
        x = next;
        if status != Status::Converged || last {
            return Ok(run.finish(method, x, status));
        }
        run.trace.pop();
        gamma = (ccfg.reduction * gamma).max(ccfg.gamma_target);
    }
    run.message = Some(format!("stage cap of {} reached before gamma_target", ccfg.max_stages));
    Ok(run.finish(method, x, Status::IterationCap))
}
