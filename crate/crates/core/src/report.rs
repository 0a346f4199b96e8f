//! Solver configuration, run status and per-iteration traces.

use std::io::Write;
use std::path::Path;
use std::time::Instant;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::bound::Eps1oCheck;
use crate::error::{param, Result};

/// Line-search and loop parameters shared by every iterative solver.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Step acceptance parameter σ ∈ (0, 1).
    pub sigma: f64,
    /// Backtracking factor β ∈ (0, 1); trial steps are β^m.
    pub beta: f64,
    pub max_iterations: usize,
    /// Largest backtracking exponent m tried per iteration.
    pub max_backtracks: usize,
    /// When false every `time_s` is written as 0 so traces are reproducible
    /// byte for byte.
    pub record_time: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            sigma: 0.1,
            beta: 0.5,
            max_iterations: 100_000,
            max_backtracks: 60,
            record_time: true,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.sigma > 0.0 && self.sigma < 1.0) {
            return param(format!("sigma must lie in (0, 1), got {}", self.sigma));
        }
        if !(self.beta > 0.0 && self.beta < 1.0) {
            return param(format!("beta must lie in (0, 1), got {}", self.beta));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Converged,
    IterationCap,
    BacktrackCap,
    NumericError,
}

impl Status {
    pub fn as_str(&self) -> &'static str {
        match self {
            Status::Converged => "converged",
            Status::IterationCap => "iteration_cap",
            Status::BacktrackCap => "backtrack_cap",
            Status::NumericError => "numeric_error",
        }
    }
}

/// Trace entry of the bound-constrained solvers. Entry `k` describes iterate
/// `x_k` and, unless it is the last entry, the step taken from it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundRecord {
    pub k: usize,
    pub f: f64,
    /// ‖S_k g_k‖ with the solver's stopping-test scaling.
    pub scaled_grad_norm: f64,
    pub eps_k: f64,
    pub omega_k: f64,
    pub n_plus: usize,
    pub m_k: Option<usize>,
    pub alpha_k: Option<f64>,
    pub time_s: f64,
    /// ‖g_k‖.
    pub grad_norm: f64,
    /// Accepted f(x_k) − f(x_{k+1}).
    pub decrease: Option<f64>,
    /// Right-hand side of the accepted acceptance test (σ times model decrease).
    pub accepted_rhs: Option<f64>,
    /// Eigenvalue bounds of the D_k applied at this step.
    pub metric_bounds: Option<(f64, f64)>,
}

/// Trace entry of the l1 solvers and of the LASSO baselines.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct L1Record {
    pub k: usize,
    pub stage: usize,
    pub gamma: f64,
    pub psi: f64,
    pub residual: f64,
    pub n_plus: usize,
    pub support_size: usize,
    pub m_k: Option<usize>,
    pub alpha_k: Option<f64>,
    pub time_s: f64,
    /// Accepted ψ(x_k) − ψ(x_{k+1}).
    pub decrease: Option<f64>,
    /// (ḡ + ω̄)ᵀp̄ at this step (adaptive projection only).
    pub model_decrease: Option<f64>,
}

#[derive(Serialize)]
struct BoundCsvRow {
    k: usize,
    f: f64,
    scaled_grad_norm: f64,
    eps_k: f64,
    omega_k: f64,
    n_plus: usize,
    m_k: Option<usize>,
    alpha_k: Option<f64>,
    time_s: f64,
}

#[derive(Serialize)]
struct L1CsvRow {
    k: usize,
    stage: usize,
    gamma: f64,
    psi: f64,
    residual: f64,
    n_plus: usize,
    support_size: usize,
    m_k: Option<usize>,
    alpha_k: Option<f64>,
    time_s: f64,
}

/// A trace record with a fixed CSV projection.
pub trait TraceRecord: Clone {
    /// Objective value at the record's iterate (f or ψ).
    fn objective(&self) -> f64;
    fn residual(&self) -> f64;
    fn write_row<W: Write>(&self, w: &mut csv::Writer<W>) -> Result<()>;
}

impl TraceRecord for BoundRecord {
    fn objective(&self) -> f64 {
        self.f
    }

    fn residual(&self) -> f64 {
        self.scaled_grad_norm
    }

    fn write_row<W: Write>(&self, w: &mut csv::Writer<W>) -> Result<()> {
        w.serialize(BoundCsvRow {
            k: self.k,
            f: self.f,
            scaled_grad_norm: self.scaled_grad_norm,
            eps_k: self.eps_k,
            omega_k: self.omega_k,
            n_plus: self.n_plus,
            m_k: self.m_k,
            alpha_k: self.alpha_k,
            time_s: self.time_s,
        })?;
        Ok(())
    }
}

impl TraceRecord for L1Record {
    fn objective(&self) -> f64 {
        self.psi
    }

    fn residual(&self) -> f64 {
        self.residual
    }

    fn write_row<W: Write>(&self, w: &mut csv::Writer<W>) -> Result<()> {
        w.serialize(L1CsvRow {
            k: self.k,
            stage: self.stage,
            gamma: self.gamma,
            psi: self.psi,
            residual: self.residual,
            n_plus: self.n_plus,
            support_size: self.support_size,
            m_k: self.m_k,
            alpha_k: self.alpha_k,
            time_s: self.time_s,
        })?;
        Ok(())
    }
}

/// Outcome of one solver run.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SolverReport<R> {
    pub method: String,
    pub status: Status,
    /// Number of accepted steps.
    pub iterations: usize,
    pub x: Vec<f64>,
    pub final_value: f64,
    /// Stopping residual at the final point.
    pub final_residual: f64,
    /// ε-1o certificate of the final point (bound solvers).
    pub certificate: Option<Eps1oCheck>,
    pub message: Option<String>,
    pub trace: Vec<R>,
}

pub type BoundReport = SolverReport<BoundRecord>;
pub type L1Report = SolverReport<L1Record>;

impl<R: TraceRecord + Serialize> SolverReport<R> {
    pub fn point(&self) -> DVector<f64> {
        DVector::from_column_slice(&self.x)
    }

    pub fn converged(&self) -> bool {
        self.status == Status::Converged
    }

    pub fn write_csv<W: Write>(&self, out: W) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        for rec in &self.trace {
            rec.write_row(&mut w)?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn save_csv(&self, path: &Path) -> Result<()> {
        let file = std::fs::File::create(path)?;
        self.write_csv(std::io::BufWriter::new(file))
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Wall clock that reads zero when timing is disabled.
#[derive(Debug, Clone, Copy)]
pub(crate) struct Stopwatch {
    start: Option<Instant>,
}

impl Stopwatch {
    pub(crate) fn new(enabled: bool) -> Self {
        Self {
            start: enabled.then(Instant::now),
        }
    }

    pub(crate) fn elapsed(&self) -> f64 {
        self.start.map_or(0.0, |s| s.elapsed().as_secs_f64())
    }
}
