//! Experiment harness: solver ensembles over seeded problems, per-cell
//! traces, comparison summary and a semilog convergence plot.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use nalgebra::DVector;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::baselines::{fista_solve, ista_solve, projected_gradient_solve, BaselineConfig};
use crate::bound::{solve_bound, StationarityConfig, Variant};
use crate::error::{param, Result};
use crate::l1::{solve_l1, solve_l1_continuation, ContinuationConfig};
use crate::metric::MetricSpec;
use crate::oracle::{lasso_oracle, make_lasso, make_nonconvex, make_quadratic_box, Objective};
use crate::report::{BoundReport, L1Report, SolverConfig, Status, TraceRecord};

/// Gaps at or below this are treated as zero.
pub const GAP_FLOOR: f64 = 1e-14;
/// Number of trailing gaps used by [`estimate_convergence_order`].
pub const ORDER_WINDOW: usize = 5;
/// Slopes above this count as superlinear.
pub const SUPERLINEAR_THRESHOLD: f64 = 1.2;
pub const DEFAULT_TARGETS: [f64; 4] = [1e-2, 1e-4, 1e-6, 1e-8];
/// Environment variable capping the number of worker threads.
pub const THREADS_ENV: &str = "TWOMETRIC_THREADS";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "generator", rename_all = "snake_case")]
pub enum ProblemRecipe {
    /// Sparse recovery instance with `γ = gamma_ratio·‖Aᵀb‖_∞` unless
    /// `gamma` is given.
    Lasso {
        m: usize,
        n: usize,
        density: f64,
        #[serde(default = "default_gamma_ratio")]
        gamma_ratio: f64,
        #[serde(default)]
        gamma: Option<f64>,
        seeds: Vec<u64>,
    },
    Quadratic {
        n: usize,
        cond: f64,
        seeds: Vec<u64>,
    },
    Nonconvex {
        n: usize,
        seeds: Vec<u64>,
    },
}

fn default_gamma_ratio() -> f64 {
    0.1
}

impl ProblemRecipe {
    pub fn kind(&self) -> &'static str {
        match self {
            ProblemRecipe::Lasso { .. } => "lasso",
            ProblemRecipe::Quadratic { .. } => "quadratic",
            ProblemRecipe::Nonconvex { .. } => "nonconvex",
        }
    }

    pub fn seeds(&self) -> &[u64] {
        match self {
            ProblemRecipe::Lasso { seeds, .. }
            | ProblemRecipe::Quadratic { seeds, .. }
            | ProblemRecipe::Nonconvex { seeds, .. } => seeds,
        }
    }

    fn is_l1(&self) -> bool {
        matches!(self, ProblemRecipe::Lasso { .. })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Two-metric adaptive projection (l1 problems).
    Adaptive,
    Ista,
    Fista,
    /// Classic two-metric projection (bound problems).
    Classic,
    /// Scaled two-metric projection (bound problems).
    Scaled,
    ProjectedGradient,
}

impl Method {
    fn is_l1(self) -> bool {
        matches!(self, Method::Adaptive | Method::Ista | Method::Fista)
    }

    fn name(self) -> &'static str {
        match self {
            Method::Adaptive => "adaptive",
            Method::Ista => "ista",
            Method::Fista => "fista",
            Method::Classic => "classic",
            Method::Scaled => "scaled",
            Method::ProjectedGradient => "projected-gradient",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolverSpec {
    /// Column label and file-name component; derived from method and
    /// metric when absent.
    #[serde(default)]
    pub label: Option<String>,
    pub method: Method,
    #[serde(default)]
    pub metric: Option<MetricSpec>,
    /// Warm-started γ path (adaptive method only).
    #[serde(default)]
    pub continuation: bool,
}

impl SolverSpec {
    pub fn new(method: Method) -> Self {
        Self {
            label: None,
            method,
            metric: None,
            continuation: false,
        }
    }

    pub fn label(&self) -> String {
        if let Some(l) = &self.label {
            return l.clone();
        }
        match self.method {
            Method::Adaptive | Method::Classic | Method::Scaled => {
                let metric = self.metric.as_ref().map_or("identity", |m| m.name());
                format!("{}-{metric}", self.method.name())
            }
            m => m.name().to_string(),
        }
    }

    fn metric(&self) -> MetricSpec {
        self.metric.clone().unwrap_or_else(MetricSpec::identity)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentPlan {
    pub problems: Vec<ProblemRecipe>,
    pub solvers: Vec<SolverSpec>,
    /// Residual and gap targets reported in the summary.
    #[serde(default = "default_targets")]
    pub targets: Vec<f64>,
    /// Final stopping tolerance (residual for l1 methods, ε for bound methods).
    #[serde(default = "default_tol")]
    pub tol: f64,
    #[serde(default = "default_solver_config")]
    pub config: SolverConfig,
}

fn default_targets() -> Vec<f64> {
    DEFAULT_TARGETS.to_vec()
}

fn default_tol() -> f64 {
    1e-8
}

fn default_solver_config() -> SolverConfig {
    SolverConfig {
        record_time: false,
        ..SolverConfig::default()
    }
}

/// Ridge of the Newton metric in the built-in presets.
pub const PRESET_RIDGE: f64 = 1e-6;

impl ExperimentPlan {
    /// LASSO comparison: m = 50, n = 200, 10% support, five seeds,
    /// γ = 0.1‖Aᵀb‖_∞; adaptive Newton with continuation against FISTA and
    /// ISTA.
    pub fn figure1() -> Self {
        Self {
            problems: vec![ProblemRecipe::Lasso {
                m: 50,
                n: 200,
                density: 0.1,
                gamma_ratio: 0.1,
                gamma: None,
                seeds: (1..=5).collect(),
            }],
            solvers: vec![
                SolverSpec {
                    label: Some("adaptive-newton".into()),
                    method: Method::Adaptive,
                    metric: Some(MetricSpec::newton(PRESET_RIDGE)),
                    continuation: true,
                },
                SolverSpec::new(Method::Fista),
                SolverSpec::new(Method::Ista),
            ],
            targets: default_targets(),
            tol: default_tol(),
            config: default_solver_config(),
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "figure1" => Ok(Self::figure1()),
            other => param(format!("unknown preset '{other}' (available: figure1)")),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let plan: Self = serde_json::from_str(text)?;
        plan.validate()?;
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        if self.problems.is_empty() {
            return param("plan has no problems");
        }
        if self.solvers.is_empty() {
            return param("plan has no solvers");
        }
        self.config.validate()?;
        if !(self.tol > 0.0) {
            return param(format!("tol must be positive, got {}", self.tol));
        }
        if self.targets.iter().any(|&t| !(t > 0.0)) {
            return param("targets must be positive");
        }
        let mut names = BTreeSet::new();
        for p in &self.problems {
            let seeds = p.seeds();
            if seeds.is_empty() {
                return param(format!("{} recipe has no seeds", p.kind()));
            }
            if seeds.iter().collect::<BTreeSet<_>>().len() != seeds.len() {
                return param(format!("{} recipe has repeated seeds", p.kind()));
            }
            for &s in seeds {
                if !names.insert(problem_name(p, s)) {
                    return param(format!("problem name {} is not unique", problem_name(p, s)));
                }
            }
        }
        let mut labels = BTreeSet::new();
        for s in &self.solvers {
            if !labels.insert(s.label()) {
                return param(format!("solver label {} is not unique", s.label()));
            }
            if s.continuation && s.method != Method::Adaptive {
                return param("continuation is only available for the adaptive method");
            }
            for p in &self.problems {
                if p.is_l1() != s.method.is_l1() {
                    return param(format!("solver {} cannot run on {} problems", s.label(), p.kind()));
                }
            }
        }
        Ok(())
    }

    /// `(problem name, recipe, seed)` in plan order.
    fn instances(&self) -> Vec<(String, &ProblemRecipe, u64)> {
        self.problems
            .iter()
            .flat_map(|p| p.seeds().iter().map(move |&s| (problem_name(p, s), p, s)))
            .collect()
    }
}

fn problem_name(p: &ProblemRecipe, seed: u64) -> String {
    format!("{}_s{seed}", p.kind())
}

/// Trace of one ensemble cell.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(untagged)]
pub enum CellReport {
    L1(L1Report),
    Bound(BoundReport),
}

impl CellReport {
    pub fn status(&self) -> Status {
        match self {
            CellReport::L1(r) => r.status,
            CellReport::Bound(r) => r.status,
        }
    }

    pub fn iterations(&self) -> usize {
        match self {
            CellReport::L1(r) => r.iterations,
            CellReport::Bound(r) => r.iterations,
        }
    }

    pub fn final_value(&self) -> f64 {
        match self {
            CellReport::L1(r) => r.final_value,
            CellReport::Bound(r) => r.final_value,
        }
    }

    pub fn final_residual(&self) -> f64 {
        match self {
            CellReport::L1(r) => r.final_residual,
            CellReport::Bound(r) => r.final_residual,
        }
    }

    /// `(k, objective, residual, time_s)` per trace record.
    pub fn series(&self) -> Vec<(usize, f64, f64, f64)> {
        match self {
            CellReport::L1(r) => r
                .trace
                .iter()
                .map(|t| (t.k, t.objective(), t.residual(), t.time_s))
                .collect(),
            CellReport::Bound(r) => r
                .trace
                .iter()
                .map(|t| (t.k, t.objective(), t.residual(), t.time_s))
                .collect(),
        }
    }

    pub fn write_csv<W: std::io::Write>(&self, w: W) -> Result<()> {
        match self {
            CellReport::L1(r) => r.write_csv(w),
            CellReport::Bound(r) => r.write_csv(w),
        }
    }
}

/// Outcome of one (problem, solver) pair.
#[derive(Debug, Clone)]
pub struct Cell {
    pub problem: String,
    pub solver: String,
    pub result: std::result::Result<CellReport, String>,
}

fn run_cell(plan: &ExperimentPlan, recipe: &ProblemRecipe, seed: u64, spec: &SolverSpec) -> Result<CellReport> {
    let cfg = plan.config;
    let base = BaselineConfig {
        step: None,
        max_iterations: cfg.max_iterations,
        tol: plan.tol,
        record_time: cfg.record_time,
    };
    match recipe {
        ProblemRecipe::Lasso {
            m,
            n,
            density,
            gamma_ratio,
            gamma,
            ..
        } => {
            let raw = make_lasso(*m, *n, *density, 1.0, seed)?;
            let g = gamma.unwrap_or(gamma_ratio * raw.gamma_max());
            let inst = raw.with_gamma(g);
            let oracle = lasso_oracle(&inst)?;
            let x0 = DVector::zeros(*n);
            let rep = match spec.method {
                Method::Adaptive if spec.continuation => {
                    let c = ContinuationConfig::for_instance(&inst, plan.tol);
                    solve_l1_continuation(&oracle, &x0, &c, &cfg, &spec.metric())?
                }
                Method::Adaptive => solve_l1(&oracle, &x0, g, plan.tol, &cfg, &spec.metric())?,
                Method::Ista => ista_solve(&oracle, g, &x0, &base)?,
                Method::Fista => fista_solve(&oracle, g, &x0, &base)?,
                _ => unreachable!("validated plan"),
            };
            Ok(CellReport::L1(rep))
        }
        ProblemRecipe::Quadratic { n, cond, .. } => {
            let q = make_quadratic_box(*n, *cond, seed)?;
            run_bound_cell(&q, *n, plan, spec, &base)
        }
        ProblemRecipe::Nonconvex { n, .. } => {
            let q = make_nonconvex(*n, seed)?;
            run_bound_cell(&q, *n, plan, spec, &base)
        }
    }
}

fn run_bound_cell(
    oracle: &dyn Objective,
    n: usize,
    plan: &ExperimentPlan,
    spec: &SolverSpec,
    base: &BaselineConfig,
) -> Result<CellReport> {
    let x0 = DVector::from_element(n, 1.0);
    let scfg = StationarityConfig::new(plan.tol);
    let rep = match spec.method {
        Method::Classic => solve_bound(Variant::Classic, oracle, &x0, &scfg, &plan.config, &spec.metric())?,
        Method::Scaled => solve_bound(Variant::Scaled, oracle, &x0, &scfg, &plan.config, &spec.metric())?,
        Method::ProjectedGradient => projected_gradient_solve(oracle, &x0, base)?,
        _ => unreachable!("validated plan"),
    };
    Ok(CellReport::Bound(rep))
}

/// Worker count: `TWOMETRIC_THREADS` when set to a positive integer,
/// otherwise rayon's default.
pub fn thread_cap() -> Option<usize> {
    std::env::var(THREADS_ENV)
        .ok()?
        .trim()
        .parse()
        .ok()
        .filter(|&n: &usize| n > 0)
}

/// Slope estimate of `log gap_{k+1}` against `log gap_k`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OrderEstimate {
    Order {
        slope: f64,
    },
    /// The trailing gaps do not move.
    Stagnation,
    /// Fewer than four trailing gaps above [`GAP_FLOOR`].
    Undefined,
}

impl OrderEstimate {
    pub fn slope(&self) -> Option<f64> {
        match self {
            OrderEstimate::Order { slope } => Some(*slope),
            OrderEstimate::Stagnation => Some(0.0),
            OrderEstimate::Undefined => None,
        }
    }

    pub fn is_superlinear(&self) -> bool {
        self.slope().is_some_and(|s| s > SUPERLINEAR_THRESHOLD)
    }
}

/// Least-squares slope over the last run of at most [`ORDER_WINDOW`]
/// consecutive gaps above [`GAP_FLOOR`].
pub fn estimate_convergence_order(gaps: &[f64]) -> OrderEstimate {
    let Some(end) = gaps.iter().rposition(|&g| g > GAP_FLOOR) else {
        return OrderEstimate::Undefined;
    };
    let mut start = end;
    while start > 0 && end + 1 - start < ORDER_WINDOW && gaps[start - 1] > GAP_FLOOR {
        start -= 1;
    }
    let logs: Vec<f64> = gaps[start..=end].iter().map(|g| g.ln()).collect();
    if logs.len() < 4 {
        return OrderEstimate::Undefined;
    }
    let xs = &logs[..logs.len() - 1];
    let ys = &logs[1..];
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    if sxx <= 1e-24 * (1.0 + mx * mx) {
        return OrderEstimate::Stagnation;
    }
    OrderEstimate::Order { slope: sxy / sxx }
}

/// First trace index whose value is at or below each target.
pub fn iterations_to_targets(series: &[(usize, f64)], targets: &[f64]) -> Vec<Option<usize>> {
    targets
        .iter()
        .map(|&t| series.iter().find(|&&(_, v)| v <= t).map(|&(k, _)| k))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub solver: String,
    pub status: Option<Status>,
    pub error: Option<String>,
    pub iterations: Option<usize>,
    pub final_value: Option<f64>,
    pub final_residual: Option<f64>,
    pub wall_time_s: Option<f64>,
    /// First iteration with stopping residual ≤ each target.
    pub iterations_to_residual: Vec<Option<usize>>,
    /// First iteration with objective gap ≤ each target.
    pub iterations_to_gap: Vec<Option<usize>>,
    pub convergence_order: OrderEstimate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProblemSummary {
    pub problem: String,
    /// Best final objective across the plan's solvers.
    pub reference_value: Option<f64>,
    pub cells: Vec<CellSummary>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonSummary {
    pub targets: Vec<f64>,
    pub solvers: Vec<String>,
    pub problems: Vec<ProblemSummary>,
}

impl ComparisonSummary {
    pub fn cell(&self, problem: &str, solver: &str) -> Option<&CellSummary> {
        self.problems
            .iter()
            .find(|p| p.problem == problem)?
            .cells
            .iter()
            .find(|c| c.solver == solver)
    }

    pub fn failed_cells(&self) -> usize {
        self.problems
            .iter()
            .flat_map(|p| &p.cells)
            .filter(|c| c.error.is_some() || c.status.is_some_and(|s| s != Status::Converged))
            .count()
    }
}

/// `objective − reference` along a trace.
pub fn gap_series(report: &CellReport, reference: f64) -> Vec<(usize, f64)> {
    report.series().iter().map(|&(k, v, _, _)| (k, v - reference)).collect()
}

/// Everything produced by [`run_experiment`].
#[derive(Debug, Clone)]
pub struct ExperimentOutcome {
    pub cells: Vec<Cell>,
    pub summary: ComparisonSummary,
}

impl ExperimentOutcome {
    pub fn report(&self, problem: &str, solver: &str) -> Option<&CellReport> {
        self.cells
            .iter()
            .find(|c| c.problem == problem && c.solver == solver)?
            .result
            .as_ref()
            .ok()
    }
}

/// Solves every (problem, solver) cell, then reduces the summary.
pub fn run_cells(plan: &ExperimentPlan) -> Result<ExperimentOutcome> {
    plan.validate()?;
    let jobs: Vec<(String, &ProblemRecipe, u64, &SolverSpec)> = plan
        .instances()
        .into_iter()
        .flat_map(|(name, p, s)| plan.solvers.iter().map(move |spec| (name.clone(), p, s, spec)))
        .collect();
    let work = || -> Vec<Cell> {
        jobs.par_iter()
            .map(|(name, p, seed, spec)| Cell {
                problem: name.clone(),
                solver: spec.label(),
                result: run_cell(plan, p, *seed, spec).map_err(|e| e.to_string()),
            })
            .collect()
    };
    let cells = match thread_cap() {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| crate::error::Error::Internal(e.to_string()))?
            .install(work),
        None => work(),
    };
    let summary = summarize(plan, &cells);
    Ok(ExperimentOutcome { cells, summary })
}

fn summarize(plan: &ExperimentPlan, cells: &[Cell]) -> ComparisonSummary {
    let labels: Vec<String> = plan.solvers.iter().map(|s| s.label()).collect();
    let problems = plan
        .instances()
        .into_iter()
        .map(|(name, _, _)| {
            let row: Vec<&Cell> = cells.iter().filter(|c| c.problem == name).collect();
            let reference = row
                .iter()
                .filter_map(|c| c.result.as_ref().ok())
                .map(|r| r.final_value())
                .filter(|v| v.is_finite())
                .reduce(f64::min);
            let cells = row
                .iter()
                .map(|c| match &c.result {
                    Ok(rep) => {
                        let series = rep.series();
                        let residuals: Vec<(usize, f64)> = series.iter().map(|&(k, _, r, _)| (k, r)).collect();
                        let gaps = reference.map(|r| gap_series(rep, r)).unwrap_or_default();
                        // Relative gaps: the log-log slope is scale free, and the floor
                        // then sits at the resolution of the objective values.
                        let scale = reference.map_or(1.0, |r| r.abs().max(1.0));
                        let gap_values: Vec<f64> = gaps.iter().map(|&(_, g)| g / scale).collect();
                        CellSummary {
                            solver: c.solver.clone(),
                            status: Some(rep.status()),
                            error: None,
                            iterations: Some(rep.iterations()),
                            final_value: Some(rep.final_value()),
                            final_residual: Some(rep.final_residual()),
                            wall_time_s: series.last().map(|s| s.3),
                            iterations_to_residual: iterations_to_targets(&residuals, &plan.targets),
                            iterations_to_gap: iterations_to_targets(&gaps, &plan.targets),
                            convergence_order: estimate_convergence_order(&gap_values),
                        }
                    }
                    Err(e) => CellSummary {
                        solver: c.solver.clone(),
                        status: None,
                        error: Some(e.clone()),
                        iterations: None,
                        final_value: None,
                        final_residual: None,
                        wall_time_s: None,
                        iterations_to_residual: vec![None; plan.targets.len()],
                        iterations_to_gap: vec![None; plan.targets.len()],
                        convergence_order: OrderEstimate::Undefined,
                    },
                })
                .collect();
            ProblemSummary {
                problem: name,
                reference_value: reference,
                cells,
            }
        })
        .collect();
    ComparisonSummary {
        targets: plan.targets.clone(),
        solvers: labels,
        problems,
    }
}

/// Runs the plan and writes `<problem>_<solver>.csv`, `summary.json`,
/// `figure.svg` and `figure.dat` (gap curves of the first problem) into
/// `out_dir`.
pub fn run_experiment(plan: &ExperimentPlan, out_dir: &Path) -> Result<ExperimentOutcome> {
    let outcome = run_cells(plan)?;
    std::fs::create_dir_all(out_dir)?;
    for cell in &outcome.cells {
        if let Ok(rep) = &cell.result {
            let path = out_dir.join(format!("{}_{}.csv", cell.problem, cell.solver));
            rep.write_csv(std::io::BufWriter::new(std::fs::File::create(path)?))?;
        }
    }
    let mut json = serde_json::to_string_pretty(&outcome.summary)?;
    json.push('\n');
    std::fs::write(out_dir.join("summary.json"), json)?;

    let first = &outcome.summary.problems[0];
    let series: Vec<(String, Vec<(usize, f64)>)> = outcome
        .cells
        .iter()
        .filter(|c| c.problem == first.problem)
        .filter_map(|c| {
            let rep = c.result.as_ref().ok()?;
            Some((c.solver.clone(), gap_series(rep, first.reference_value?)))
        })
        .collect();
    if !series.is_empty() {
        emit_plot(
            &series,
            &first.problem,
            &out_dir.join("figure.svg"),
            &out_dir.join("figure.dat"),
        )?;
    }
    Ok(outcome)
}

/// Plain-text gap table: iteration, then one column per series (`NaN`
/// where a series has no record).
pub fn render_dat(series: &[(String, Vec<(usize, f64)>)]) -> String {
    let max_k = series
        .iter()
        .flat_map(|(_, s)| s.iter().map(|p| p.0))
        .max()
        .unwrap_or(0);
    let mut cols: Vec<Vec<f64>> = vec![vec![f64::NAN; max_k + 1]; series.len()];
    for (j, (_, s)) in series.iter().enumerate() {
        for &(k, g) in s {
            cols[j][k] = g;
        }
    }
    let mut out = String::from("# iteration");
    for (name, _) in series {
        out.push(' ');
        out.push_str(name);
    }
    out.push('\n');
    for k in 0..=max_k {
        let _ = write!(out, "{k}");
        for c in &cols {
            if c[k].is_nan() {
                out.push_str(" NaN");
            } else {
                let _ = write!(out, " {:.17e}", c[k]);
            }
        }
        out.push('\n');
    }
    out
}

const PALETTE: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];
/// Gaps below this are drawn at this level.
const PLOT_FLOOR: f64 = 1e-16;

/// Self-contained semilog SVG of gap against iteration, one line per series.
pub fn render_svg(series: &[(String, Vec<(usize, f64)>)], title: &str) -> String {
    let (w, h) = (720.0, 480.0);
    let (left, right, top, bottom) = (70.0, 180.0, 40.0, 50.0);
    let pw = w - left - right;
    let ph = h - top - bottom;
    let logs: Vec<Vec<(usize, f64)>> = series
        .iter()
        .map(|(_, s)| {
            s.iter()
                .filter(|p| !p.1.is_nan())
                .map(|&(k, g)| (k, g.max(PLOT_FLOOR).log10()))
                .collect()
        })
        .collect();
    let max_k = logs.iter().flatten().map(|p| p.0).max().unwrap_or(0).max(1) as f64;
    let ys: Vec<f64> = logs.iter().flatten().map(|p| p.1).collect();
    let mut y_lo = ys.iter().copied().fold(f64::INFINITY, f64::min).floor();
    let mut y_hi = ys.iter().copied().fold(f64::NEG_INFINITY, f64::max).ceil();
    if !y_lo.is_finite() || !y_hi.is_finite() {
        (y_lo, y_hi) = (-1.0, 0.0);
    }
    if y_hi <= y_lo {
        y_hi = y_lo + 1.0;
    }
    let sx = |k: f64| left + pw * k / max_k;
    let sy = |v: f64| top + ph * (y_hi - v) / (y_hi - y_lo);

    let mut s = String::new();
    let _ = writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}" font-family="sans-serif" font-size="12">"#
    );
    let _ = writeln!(s, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="24" text-anchor="middle" font-size="14">{}</text>"#,
        left + pw / 2.0,
        escape(title)
    );
    let _ = writeln!(
        s,
        r#"<rect x="{left}" y="{top}" width="{pw}" height="{ph}" fill="none" stroke="black"/>"#
    );
    let step = ((y_hi - y_lo) / 8.0).ceil().max(1.0);
    let mut v = y_lo;
    while v <= y_hi + 1e-9 {
        let y = sy(v);
        let _ = writeln!(
            s,
            r##"<line x1="{left}" y1="{y:.2}" x2="{:.2}" y2="{y:.2}" stroke="#dddddd"/>"##,
            left + pw
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}" text-anchor="end">1e{}</text>"#,
            left - 6.0,
            y + 4.0,
            v as i64
        );
        v += step;
    }
    let kstep = nice_step(max_k / 5.0);
    let mut k = 0.0;
    while k <= max_k + 1e-9 {
        let x = sx(k);
        let _ = writeln!(
            s,
            r#"<line x1="{x:.2}" y1="{:.2}" x2="{x:.2}" y2="{:.2}" stroke="black"/>"#,
            top + ph,
            top + ph + 5.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{x:.2}" y="{:.2}" text-anchor="middle">{}</text>"#,
            top + ph + 18.0,
            k as u64
        );
        k += kstep;
    }
    let _ = writeln!(
        s,
        r#"<text x="{:.2}" y="{:.2}" text-anchor="middle">iteration</text>"#,
        left + pw / 2.0,
        h - 10.0
    );
    let _ = writeln!(
        s,
        r#"<text x="18" y="{:.2}" text-anchor="middle" transform="rotate(-90 18 {:.2})">objective gap (log10)</text>"#,
        top + ph / 2.0,
        top + ph / 2.0
    );

    for (j, ((name, _), pts)) in series.iter().zip(&logs).enumerate() {
        let color = PALETTE[j % PALETTE.len()];
        if pts.len() == 1 {
            let _ = writeln!(
                s,
                r#"<circle cx="{:.2}" cy="{:.2}" r="3" fill="{color}"/>"#,
                sx(pts[0].0 as f64),
                sy(pts[0].1)
            );
        } else if !pts.is_empty() {
            let path: Vec<String> = pts
                .iter()
                .map(|&(k, v)| format!("{:.2},{:.2}", sx(k as f64), sy(v)))
                .collect();
            let _ = writeln!(
                s,
                r#"<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{}"/>"#,
                path.join(" ")
            );
        }
        let ly = top + 14.0 + 20.0 * j as f64;
        let lx = left + pw + 12.0;
        let _ = writeln!(
            s,
            r#"<line x1="{lx:.2}" y1="{ly:.2}" x2="{:.2}" y2="{ly:.2}" stroke="{color}" stroke-width="2"/>"#,
            lx + 24.0
        );
        let _ = writeln!(
            s,
            r#"<text x="{:.2}" y="{:.2}">{}</text>"#,
            lx + 30.0,
            ly + 4.0,
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn nice_step(raw: f64) -> f64 {
    if raw <= 1.0 {
        return 1.0;
    }
    let mag = 10f64.powf(raw.log10().floor());
    let r = raw / mag;
    let m = if r <= 1.0 {
        1.0
    } else if r <= 2.0 {
        2.0
    } else if r <= 5.0 {
        5.0
    } else {
        10.0
    };
    m * mag
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

/// Writes [`render_svg`] and [`render_dat`] output.
pub fn emit_plot(series: &[(String, Vec<(usize, f64)>)], title: &str, svg: &Path, dat: &Path) -> Result<()> {
    if series.is_empty() || series.iter().all(|(_, s)| s.is_empty()) {
        return param("nothing to plot: traces are empty");
    }
    std::fs::write(svg, render_svg(series, title))?;
    std::fs::write(dat, render_dat(series))?;
    Ok(())
}
