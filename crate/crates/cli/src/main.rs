//! `twometric` command-line front end.
//!
//! Exit codes: 0 converged (or check passed), 1 usage or input error,
//! 2 iteration/backtracking cap (or failed check), 3 numeric error.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fmt::Display;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DVector;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};
use twometric::bench::{run_experiment, ExperimentPlan};
use twometric::bound::{eps_1o_check, iteration_bound, solve_bound, ComplexityConstants, StationarityConfig, Variant};
use twometric::l1::{l1_norm, l1_residual, solve_l1, solve_lasso_continuation, ContinuationConfig};
use twometric::oracle::{lasso_oracle, make_lasso, make_nonconvex, make_quadratic_box, QuadraticBox};
use twometric::report::{BoundReport, L1Report};
use twometric::{Error, LassoInstance, MetricSpec, Objective, SolverConfig, Status};

#[derive(Parser)]
#[command(name = "twometric", version, about = "Two-metric projection solvers and benchmarks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Minimize a smooth function over x >= 0.
    SolveBound(SolveBoundArgs),
    /// Solve a LASSO problem with the adaptive projection method.
    SolveLasso(SolveLassoArgs),
    /// Write a generated instance as JSON.
    Gen(GenArgs),
    /// Check a point for approximate stationarity.
    Check(CheckArgs),
    /// Run a solver ensemble and write traces, summary and plot.
    Benchmark(BenchmarkArgs),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum MetricArg {
    Identity,
    Diagonal,
    Newton,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum VariantArg {
    Classic,
    Scaled,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
enum ProblemArg {
    Quadratic,
    Nonconvex,
    Lasso,
}

/// Line search, metric and output flags shared by both solvers.
#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
struct SolverFlags {
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    max_iterations: Option<usize>,
    #[arg(long)]
    max_backtracks: Option<usize>,
    #[arg(long, value_enum)]
    metric: Option<MetricArg>,
    /// Ridge added to the Hessian by the newton metric.
    #[arg(long)]
    ridge: Option<f64>,
    /// Comma-separated diagonal of the diagonal metric.
    #[arg(long, value_delimiter = ',')]
    diag: Option<Vec<f64>>,
    /// Write the per-iteration trace as CSV.
    #[arg(long)]
    trace: Option<PathBuf>,
    /// Write the final point as a JSON array.
    #[arg(long)]
    save_point: Option<PathBuf>,
}

/// Generator flags; an instance file replaces them.
#[derive(Args, Debug, Clone, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
struct ProblemFlags {
    #[arg(long, value_enum)]
    problem: Option<ProblemArg>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    m: Option<usize>,
    /// Condition number of generated quadratics.
    #[arg(long)]
    cond: Option<f64>,
    /// Fraction of nonzeros in the planted LASSO solution.
    #[arg(long)]
    density: Option<f64>,
    /// LASSO weight as a fraction of ‖Aᵀb‖∞ (default 0.1).
    #[arg(long)]
    gamma: Option<f64>,
    /// Absolute LASSO weight; overrides --gamma.
    #[arg(long)]
    gamma_abs: Option<f64>,
    /// Instance JSON written by `gen`.
    #[arg(long)]
    instance: Option<PathBuf>,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
struct SolveBoundArgs {
    /// JSON file with default values for any of the flags below.
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    variant: Option<VariantArg>,
    /// Stationarity tolerance ε.
    #[arg(long, visible_alias = "tol")]
    eps: Option<f64>,
    /// Starting point as a JSON array (default: all ones).
    #[arg(long)]
    point: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    problem: ProblemFlags,
    #[command(flatten)]
    #[serde(flatten)]
    solver: SolverFlags,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
struct SolveLassoArgs {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    /// Residual tolerance.
    #[arg(long, visible_alias = "eps")]
    tol: Option<f64>,
    /// Solve at the target weight directly.
    #[arg(long)]
    no_continuation: bool,
    /// Continuation reduction factor.
    #[arg(long)]
    reduction: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    problem: ProblemFlags,
    #[command(flatten)]
    #[serde(flatten)]
    solver: SolverFlags,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
struct GenArgs {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    /// Output file (default: stdout).
    #[arg(long)]
    out: Option<PathBuf>,
    #[command(flatten)]
    #[serde(flatten)]
    problem: ProblemFlags,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
struct CheckArgs {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    /// Point to check, as a JSON array.
    #[arg(long)]
    point: PathBuf,
    #[arg(long, visible_alias = "tol")]
    eps: Option<f64>,
    #[command(flatten)]
    #[serde(flatten)]
    problem: ProblemFlags,
}

#[derive(Args, Debug, Clone, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
struct BenchmarkArgs {
    #[arg(long)]
    #[serde(skip)]
    config: Option<PathBuf>,
    /// Built-in plan (figure1).
    #[arg(long, conflicts_with = "plan")]
    preset: Option<String>,
    /// Plan file (JSON).
    #[arg(long)]
    plan: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

/// Process outcome carrying its exit code.
struct Exit {
    code: u8,
    message: Option<String>,
}

impl Exit {
    fn usage(msg: impl Display) -> Self {
        Exit {
            code: 1,
            message: Some(msg.to_string()),
        }
    }
}

impl From<Error> for Exit {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::Numeric(_) | Error::Internal(_) => 3,
            Error::BacktrackCap { .. } => 2,
            _ => 1,
        };
        Exit {
            code,
            message: Some(e.to_string()),
        }
    }
}

type CliResult = Result<u8, Exit>;

fn status_code(s: Status) -> u8 {
    match s {
        Status::Converged => 0,
        Status::IterationCap | Status::BacktrackCap => 2,
        Status::NumericError => 3,
    }
}

/// Overlays the flags given on the command line onto the config file.
fn merge<T: Serialize + DeserializeOwned + Clone>(flags: &T, config: Option<&Path>) -> Result<T, Exit> {
    let Some(path) = config else {
        return Ok(flags.clone());
    };
    let text = std::fs::read_to_string(path).map_err(|e| Exit::usage(format!("{}: {e}", path.display())))?;
    let file: Map<String, Value> =
        serde_json::from_str(&text).map_err(|e| Exit::usage(format!("{}: {e}", path.display())))?;
    let Value::Object(cli) = serde_json::to_value(flags).map_err(Exit::usage)? else {
        unreachable!("argument structs serialize to objects")
    };
    let mut merged = Map::new();
    for (k, v) in file {
        if !cli.contains_key(&k) {
            return Err(Exit::usage(format!("{}: unknown key '{k}'", path.display())));
        }
        merged.insert(k, v);
    }
    for (k, v) in cli {
        if !(v.is_null() || v == Value::Bool(false)) || !merged.contains_key(&k) {
            merged.insert(k, v);
        }
    }
    serde_json::from_value(Value::Object(merged)).map_err(|e| Exit::usage(format!("{}: {e}", path.display())))
}

fn read_point(path: &Path) -> Result<DVector<f64>, Exit> {
    let text = std::fs::read_to_string(path).map_err(|e| Exit::usage(format!("{}: {e}", path.display())))?;
    let v: Vec<f64> = serde_json::from_str(&text).map_err(|e| Exit::usage(format!("{}: {e}", path.display())))?;
    Ok(DVector::from_vec(v))
}

fn write_point(path: &Path, x: &[f64]) -> Result<(), Exit> {
    let json = serde_json::to_string(x).map_err(Exit::usage)?;
    std::fs::write(path, json + "\n").map_err(|e| Exit::usage(format!("{}: {e}", path.display())))
}

fn solver_config(f: &SolverFlags) -> Result<SolverConfig, Exit> {
    let d = SolverConfig::default();
    let cfg = SolverConfig {
        sigma: f.sigma.unwrap_or(d.sigma),
        beta: f.beta.unwrap_or(d.beta),
        max_iterations: f.max_iterations.unwrap_or(d.max_iterations),
        max_backtracks: f.max_backtracks.unwrap_or(d.max_backtracks),
        record_time: true,
    };
    cfg.validate()?;
    Ok(cfg)
}

fn metric_spec(f: &SolverFlags, n: usize) -> Result<MetricSpec, Exit> {
    let spec = match f.metric.unwrap_or(MetricArg::Identity) {
        MetricArg::Identity => MetricSpec::identity(),
        MetricArg::Newton => MetricSpec::newton(f.ridge.unwrap_or(1e-6)),
        MetricArg::Diagonal => MetricSpec::diagonal(
            f.diag
                .clone()
                .ok_or_else(|| Exit::usage("--metric diagonal needs --diag"))?,
        ),
    };
    spec.validate(n)?;
    Ok(spec)
}

/// Instance file kind, told apart by its keys.
fn file_kind(text: &str) -> Result<ProblemArg, Exit> {
    let v: Map<String, Value> = serde_json::from_str(text).map_err(Exit::usage)?;
    if v.contains_key("A") {
        Ok(ProblemArg::Lasso)
    } else if v.contains_key("q") {
        Ok(ProblemArg::Quadratic)
    } else {
        Err(Exit::usage("instance file is neither a LASSO nor a quadratic instance"))
    }
}

enum Problem {
    Bound(Box<dyn Objective>),
    Lasso(LassoInstance),
}

fn load_problem(p: &ProblemFlags, default: ProblemArg) -> Result<Problem, Exit> {
    if let Some(path) = &p.instance {
        let text = std::fs::read_to_string(path).map_err(|e| Exit::usage(format!("{}: {e}", path.display())))?;
        let kind = file_kind(&text)?;
        if let Some(want) = p.problem {
            if want != kind {
                return Err(Exit::usage(format!(
                    "{} holds a {kind:?} instance, not {want:?}",
                    path.display()
                )));
            }
        }
        return Ok(match kind {
            ProblemArg::Lasso => {
                let inst = LassoInstance::from_json(&text)?;
                match (p.gamma_abs, p.gamma) {
                    (Some(g), _) => Problem::Lasso(inst.with_gamma(g)),
                    (None, Some(r)) => Problem::Lasso(inst.with_gamma(r * inst.gamma_max())),
                    (None, None) => Problem::Lasso(inst),
                }
            }
            _ => Problem::Bound(Box::new(QuadraticBox::from_json(&text)?)),
        });
    }
    let seed = p.seed.unwrap_or(0);
    Ok(match p.problem.unwrap_or(default) {
        ProblemArg::Quadratic => Problem::Bound(Box::new(make_quadratic_box(
            p.n.unwrap_or(20),
            p.cond.unwrap_or(10.0),
            seed,
        )?)),
        ProblemArg::Nonconvex => Problem::Bound(Box::new(make_nonconvex(p.n.unwrap_or(20), seed)?)),
        ProblemArg::Lasso => {
            let raw = make_lasso(
                p.m.unwrap_or(50),
                p.n.unwrap_or(200),
                p.density.unwrap_or(0.1),
                1.0,
                seed,
            )?;
            let g = p.gamma_abs.unwrap_or(p.gamma.unwrap_or(0.1) * raw.gamma_max());
            Problem::Lasso(raw.with_gamma(g))
        }
    })
}

fn finish<R>(report: &twometric::SolverReport<R>, flags: &SolverFlags) -> Result<(), Exit>
where
    R: twometric::report::TraceRecord + Serialize,
{
    if let Some(path) = &flags.trace {
        report.save_csv(path)?;
    }
    if let Some(path) = &flags.save_point {
        write_point(path, &report.x)?;
    }
    if let Some(msg) = &report.message {
        println!("message: {msg}");
    }
    Ok(())
}

fn solve_bound_cmd(args: SolveBoundArgs) -> CliResult {
    let args = merge(&args, args.config.as_deref())?;
    let Problem::Bound(f) = load_problem(&args.problem, ProblemArg::Quadratic)? else {
        return Err(Exit::usage("solve-bound needs a quadratic or nonconvex problem"));
    };
    let eps = args.eps.unwrap_or(1e-6);
    if eps >= 1.0 {
        eprintln!("warning: eps = {eps} is not below 1; the complexity bound does not apply");
    }
    let cfg = solver_config(&args.solver)?;
    let metric = metric_spec(&args.solver, f.dim())?;
    let variant = match args.variant.unwrap_or(VariantArg::Classic) {
        VariantArg::Classic => Variant::Classic,
        VariantArg::Scaled => Variant::Scaled,
    };
    let x0 = match &args.point {
        Some(p) => read_point(p)?,
        None => DVector::from_element(f.dim(), 1.0),
    };
    let rep: BoundReport = solve_bound(variant, f.as_ref(), &x0, &StationarityConfig::new(eps), &cfg, &metric)?;
    println!("method: {}", rep.method);
    println!("status: {}", rep.status.as_str());
    println!("iterations: {}", rep.iterations);
    println!("f: {:e}", rep.final_value);
    println!("residual: {:e}", rep.final_residual);
    if let Some(c) = &rep.certificate {
        println!(
            "eps-1o: {} (|Sg| = {:e}, min g = {:e})",
            c.is_eps_1o, c.scaled_norm, c.min_gradient
        );
    }
    if variant == Variant::Scaled {
        let k = f.constants();
        match (k.lipschitz, k.lower_bound) {
            (Some(l), Some(f_low)) => {
                match ComplexityConstants::from_trace(&rep, l, f_low, &cfg, eps).and_then(|c| iteration_bound(&c)) {
                    Ok(b) => println!("iteration bound: {b}"),
                    Err(e) => println!("iteration bound: unavailable ({e})"),
                }
            }
            _ => println!("iteration bound: unavailable (L or f_low unknown)"),
        }
    }
    finish(&rep, &args.solver)?;
    Ok(status_code(rep.status))
}

fn solve_lasso_cmd(args: SolveLassoArgs) -> CliResult {
    let args = merge(&args, args.config.as_deref())?;
    let Problem::Lasso(inst) = load_problem(&args.problem, ProblemArg::Lasso)? else {
        return Err(Exit::usage("solve-lasso needs a LASSO problem"));
    };
    let tol = args.tol.unwrap_or(1e-8);
    let cfg = solver_config(&args.solver)?;
    let metric = metric_spec(&args.solver, inst.cols())?;
    let rep: L1Report = if args.no_continuation {
        let f = lasso_oracle(&inst)?;
        solve_l1(&f, &DVector::zeros(inst.cols()), inst.gamma, tol, &cfg, &metric)?
    } else {
        let mut c = ContinuationConfig::for_instance(&inst, tol);
        if let Some(r) = args.reduction {
            c.reduction = r;
        }
        solve_lasso_continuation(&inst, &c, &cfg, &metric)?
    };
    let x = rep.point();
    println!("method: {}", rep.method);
    println!("status: {}", rep.status.as_str());
    println!("iterations: {}", rep.iterations);
    println!("stages: {}", rep.trace.last().map_or(0, |r| r.stage + 1));
    println!("gamma: {:e}", inst.gamma);
    println!("psi: {:e}", rep.final_value);
    println!("residual: {:e}", rep.final_residual);
    println!("support: {}", x.iter().filter(|&&v| v != 0.0).count());
    finish(&rep, &args.solver)?;
    Ok(status_code(rep.status))
}

fn gen_cmd(args: GenArgs) -> CliResult {
    let args = merge(&args, args.config.as_deref())?;
    if args.problem.instance.is_some() {
        return Err(Exit::usage("gen takes generator flags, not --instance"));
    }
    let json = match args.problem.problem {
        Some(ProblemArg::Lasso) | None => match load_problem(&args.problem, ProblemArg::Lasso)? {
            Problem::Lasso(inst) => inst.to_json()?,
            Problem::Bound(_) => unreachable!(),
        },
        Some(ProblemArg::Quadratic) => {
            let p = &args.problem;
            make_quadratic_box(p.n.unwrap_or(20), p.cond.unwrap_or(10.0), p.seed.unwrap_or(0))?.to_json()?
        }
        Some(ProblemArg::Nonconvex) => {
            return Err(Exit::usage(
                "nonconvex problems have no instance file; pass --problem nonconvex --n --seed instead",
            ))
        }
    };
    match &args.out {
        Some(path) => std::fs::write(path, json + "\n").map_err(|e| Exit::usage(format!("{}: {e}", path.display())))?,
        None => println!("{json}"),
    }
    Ok(0)
}

fn check_cmd(args: CheckArgs) -> CliResult {
    let args = merge(&args, args.config.as_deref())?;
    let x = read_point(&args.point)?;
    let eps = args.eps.unwrap_or(1e-6);
    if !(eps > 0.0) {
        return Err(Exit::usage(format!("eps must be positive, got {eps}")));
    }
    let pass = match load_problem(&args.problem, ProblemArg::Quadratic)? {
        Problem::Bound(f) => {
            if x.len() != f.dim() {
                return Err(Exit::usage(format!(
                    "point has {} entries, problem has {}",
                    x.len(),
                    f.dim()
                )));
            }
            if let Some(i) = x.iter().position(|&v| !(v >= 0.0)) {
                return Err(Exit::usage(format!("point is infeasible: x[{i}] = {}", x[i])));
            }
            let g = f.gradient(&x)?;
            let c = eps_1o_check(&x, &g, eps)?;
            println!("mode: bound");
            println!("f: {:e}", f.value(&x)?);
            println!("scaled gradient norm: {:e}", c.scaled_norm);
            println!("min gradient: {:e}", c.min_gradient);
            println!("eps-1o: {}", c.is_eps_1o);
            c.is_eps_1o
        }
        Problem::Lasso(inst) => {
            if x.len() != inst.cols() {
                return Err(Exit::usage(format!(
                    "point has {} entries, problem has {}",
                    x.len(),
                    inst.cols()
                )));
            }
            let f = lasso_oracle(&inst)?;
            let r = l1_residual(&x, &f.gradient(&x)?, inst.gamma);
            println!("mode: l1");
            println!("psi: {:e}", f.value(&x)? + inst.gamma * l1_norm(&x));
            println!("residual: {r:e}");
            println!("stationary: {}", r <= eps);
            r <= eps
        }
    };
    Ok(if pass { 0 } else { 2 })
}

fn benchmark_cmd(args: BenchmarkArgs) -> CliResult {
    let args = merge(&args, args.config.as_deref())?;
    let plan = match (&args.preset, &args.plan) {
        (Some(_), Some(_)) => return Err(Exit::usage("give either --preset or --plan")),
        (_, Some(path)) => {
            let text = std::fs::read_to_string(path).map_err(|e| Exit::usage(format!("{}: {e}", path.display())))?;
            ExperimentPlan::from_json(&text)?
        }
        (name, None) => ExperimentPlan::preset(name.as_deref().unwrap_or("figure1"))?,
    };
    let out = args.out.unwrap_or_else(|| PathBuf::from("results"));
    let outcome = run_experiment(&plan, &out)?;
    let mut code = 0;
    for p in &outcome.summary.problems {
        for c in &p.cells {
            match (&c.status, &c.error) {
                (Some(s), _) => {
                    println!(
                        "{} {}: {} after {} iterations, order {}",
                        p.problem,
                        c.solver,
                        s.as_str(),
                        c.iterations.unwrap_or(0),
                        c.convergence_order.slope().map_or("-".into(), |v| format!("{v:.2}"))
                    );
                    code = code.max(status_code(*s).min(2));
                }
                (None, e) => {
                    println!(
                        "{} {}: failed: {}",
                        p.problem,
                        c.solver,
                        e.as_deref().unwrap_or("unknown error")
                    );
                    code = 2;
                }
            }
        }
    }
    println!("wrote {}", out.display());
    Ok(code)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::SolveBound(a) => solve_bound_cmd(a),
        Command::SolveLasso(a) => solve_lasso_cmd(a),
        Command::Gen(a) => gen_cmd(a),
        Command::Check(a) => check_cmd(a),
        Command::Benchmark(a) => benchmark_cmd(a),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(Exit { code, message }) => {
            if let Some(m) = message {
                eprintln!("error: {m}");
            }
            ExitCode::from(code)
        }
    }
}
