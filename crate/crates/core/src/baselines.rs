//! Constant-step first-order reference solvers: ISTA and FISTA for
//! `f + γ‖·‖₁`, projected gradient for `x ≥ 0`.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::bound::{eps_1o_check, omega_measure, partition_bound, project_nonneg};
use crate::error::{ensure_finite, param, Result};
use crate::l1::{l1_norm, l1_residual, psi_decrease};
use crate::oracle::Objective;
use crate::report::{BoundRecord, BoundReport, L1Record, L1Report, Status, Stopwatch, TraceRecord};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BaselineConfig {
    /// Fixed step; `1/L` when `None`.
    pub step: Option<f64>,
    pub max_iterations: usize,
    /// Stopping tolerance on the residual (or ε for projected gradient).
    pub tol: f64,
    pub record_time: bool,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            step: None,
            max_iterations: 100_000,
            tol: 1e-8,
            record_time: true,
        }
    }
}

impl BaselineConfig {
    fn resolve_step(&self, oracle: &dyn Objective) -> Result<f64> {
        let step = match self.step {
            Some(s) => s,
            None => match oracle.constants().lipschitz {
                Some(l) if l > 0.0 && l.is_finite() => 1.0 / l,
                Some(l) => return param(format!("Lipschitz constant must be positive, got {l}")),
                None => return param("baseline step 1/L needs a Lipschitz constant"),
            },
        };
        if !(step > 0.0) || !step.is_finite() {
            return param(format!("step size must be positive, got {step}"));
        }
        if !(self.tol >= 0.0) {
            return param(format!("tolerance must be nonnegative, got {}", self.tol));
        }
        Ok(step)
    }
}

/// `sign(z_i) max(|z_i| − t, 0)`.
pub fn soft_threshold(z: &DVector<f64>, t: f64) -> Result<DVector<f64>> {
    if !(t >= 0.0) {
        return param(format!("threshold must be nonnegative, got {t}"));
    }
    Ok(z.map(|v| v.signum() * (v.abs() - t).max(0.0)))
}

/// `t_{k+1} = (1 + √(1 + 4t_k²)) / 2`.
pub fn fista_momentum(t: f64) -> f64 {
    0.5 * (1.0 + (1.0 + 4.0 * t * t).sqrt())
}

fn check_inputs(oracle: &dyn Objective, x0: &DVector<f64>, gamma: f64) -> Result<()> {
    if x0.len() != oracle.dim() {
        return param(format!("x0 has dimension {}, expected {}", x0.len(), oracle.dim()));
    }
    ensure_finite(x0.as_slice(), "x0")?;
    if !(gamma > 0.0) || !gamma.is_finite() {
        return param(format!("gamma must be positive, got {gamma}"));
    }
    Ok(())
}

fn eval(oracle: &dyn Objective, x: &DVector<f64>) -> Option<(f64, DVector<f64>)> {
    match (oracle.value(x), oracle.gradient(x)) {
        (Ok(f), Ok(g)) if f.is_finite() && g.iter().all(|v| v.is_finite()) => Some((f, g)),
        _ => None,
    }
}

fn l1_record(k: usize, gamma: f64, x: &DVector<f64>, f: f64, g: &DVector<f64>, time_s: f64) -> L1Record {
    L1Record {
        k,
        stage: 0,
        gamma,
        psi: f + gamma * l1_norm(x),
        residual: l1_residual(x, g, gamma),
        n_plus: (0..x.len()).filter(|&i| x[i] == 0.0 && g[i].abs() < gamma).count(),
        support_size: x.iter().filter(|&&v| v != 0.0).count(),
        m_k: None,
        alpha_k: None,
        time_s,
        decrease: None,
        model_decrease: None,
    }
}

fn finish<R: TraceRecord>(
    method: &str,
    status: Status,
    iterations: usize,
    x: &DVector<f64>,
    message: Option<String>,
    trace: Vec<R>,
) -> crate::report::SolverReport<R> {
    let last = trace.last();
    crate::report::SolverReport {
        method: method.to_string(),
        status,
        iterations,
        x: x.iter().copied().collect(),
        final_value: last.map_or(f64::NAN, |r| r.objective()),
        final_residual: last.map_or(f64::NAN, |r| r.residual()),
        certificate: None,
        message,
        trace,
    }
}

/// Proximal gradient, `x_{k+1} = soft(x_k − t∇f(x_k), γt)`.
pub fn ista_solve(oracle: &dyn Objective, gamma: f64, x0: &DVector<f64>, cfg: &BaselineConfig) -> Result<L1Report> {
    check_inputs(oracle, x0, gamma)?;
    let step = cfg.resolve_step(oracle)?;
    let clock = Stopwatch::new(cfg.record_time);
    let mut x = x0.clone();
    let mut trace = Vec::new();
    let mut k = 0;
    let status = loop {
        let Some((f, g)) = eval(oracle, &x) else {
            return Ok(finish(
                "ista",
                Status::NumericError,
                k,
                &x,
                Some(format!("non-finite objective at iteration {k}")),
                trace,
            ));
        };
        let mut rec = l1_record(k, gamma, &x, f, &g, clock.elapsed());
        if rec.residual <= cfg.tol {
            trace.push(rec);
            break Status::Converged;
        }
        if k >= cfg.max_iterations {
            trace.push(rec);
            break Status::IterationCap;
        }
        let next = soft_threshold(&(&x - &g * step), gamma * step)?;
        rec.m_k = Some(0);
        rec.alpha_k = Some(step);
        rec.decrease = Some(psi_decrease(oracle, gamma, &x, &next)?);
        trace.push(rec);
        x = next;
        k += 1;
    };
    Ok(finish("ista", status, k, &x, None, trace))
}

/// FISTA with constant step and the standard momentum sequence, no restart.
pub fn fista_solve(oracle: &dyn Objective, gamma: f64, x0: &DVector<f64>, cfg: &BaselineConfig) -> Result<L1Report> {
    check_inputs(oracle, x0, gamma)?;
    let step = cfg.resolve_step(oracle)?;
    let clock = Stopwatch::new(cfg.record_time);
    let mut x = x0.clone();
    let mut y = x0.clone();
    let mut t = 1.0;
    let mut trace = Vec::new();
    let mut k = 0;
    let status = loop {
        let Some((f, g)) = eval(oracle, &x) else {
            return Ok(finish(
                "fista",
                Status::NumericError,
                k,
                &x,
                Some(format!("non-finite objective at iteration {k}")),
                trace,
            ));
        };
        let mut rec = l1_record(k, gamma, &x, f, &g, clock.elapsed());
        if rec.residual <= cfg.tol {
            trace.push(rec);
            break Status::Converged;
        }
        if k >= cfg.max_iterations {
            trace.push(rec);
            break Status::IterationCap;
        }
        let gy = match oracle.gradient(&y) {
            Ok(gy) if gy.iter().all(|v| v.is_finite()) => gy,
            _ => {
                trace.push(rec);
                return Ok(finish(
                    "fista",
                    Status::NumericError,
                    k,
                    &x,
                    Some(format!("non-finite gradient at iteration {k}")),
                    trace,
                ));
            }
        };
        let next = soft_threshold(&(&y - &gy * step), gamma * step)?;
        let t_next = fista_momentum(t);
        y = &next + (&next - &x) * ((t - 1.0) / t_next);
        t = t_next;
        rec.m_k = Some(0);
        rec.alpha_k = Some(step);
        rec.decrease = Some(psi_decrease(oracle, gamma, &x, &next)?);
        trace.push(rec);
        x = next;
        k += 1;
    };
    Ok(finish("fista", status, k, &x, None, trace))
}

/// Fixed-step projected gradient on `x ≥ 0`, stopping once the point passes
/// [`eps_1o_check`] at `cfg.tol`.
pub fn projected_gradient_solve(
    oracle: &dyn Objective,
    x0: &DVector<f64>,
    cfg: &BaselineConfig,
) -> Result<BoundReport> {
    if x0.len() != oracle.dim() {
        return param(format!("x0 has dimension {}, expected {}", x0.len(), oracle.dim()));
    }
    ensure_finite(x0.as_slice(), "x0")?;
    if x0.iter().any(|&v| v < 0.0) {
        return param("x0 must be feasible (x0 >= 0)");
    }
    let step = cfg.resolve_step(oracle)?;
    if !(cfg.tol > 0.0) {
        return param(format!("epsilon must be positive, got {}", cfg.tol));
    }
    let clock = Stopwatch::new(cfg.record_time);
    let mut x = x0.clone();
    let mut trace = Vec::new();
    let mut k = 0;
    let mut certificate;
    let status = loop {
        let Some((f, g)) = eval(oracle, &x) else {
            let mut rep = finish("projected-gradient", Status::NumericError, k, &x, None, trace);
            rep.message = Some(format!("non-finite objective at iteration {k}"));
            return Ok(rep);
        };
        let check = eps_1o_check(&x, &g, cfg.tol)?;
        let omega = omega_measure(&x, &g, None)?;
        let eps_k = cfg.tol.min(omega);
        let mut rec = BoundRecord {
            k,
            f,
            scaled_grad_norm: check.scaled_norm,
            eps_k,
            omega_k: omega,
            n_plus: partition_bound(&x, &g, eps_k)?.plus().len(),
            m_k: None,
            alpha_k: None,
            time_s: clock.elapsed(),
            grad_norm: g.norm(),
            decrease: None,
            accepted_rhs: None,
            metric_bounds: None,
        };
        certificate = Some(check);
        if check.is_eps_1o {
            trace.push(rec);
            break Status::Converged;
        }
        if k >= cfg.max_iterations {
            trace.push(rec);
            break Status::IterationCap;
        }
        let next = project_nonneg(&(&x - &g * step))?;
        rec.m_k = Some(0);
        rec.alpha_k = Some(step);
        rec.decrease = Some(oracle.decrease(&x, &next)?);
        trace.push(rec);
        x = next;
        k += 1;
    };
    let mut rep = finish("projected-gradient", status, k, &x, None, trace);
    rep.certificate = certificate;
    Ok(rep)
}
