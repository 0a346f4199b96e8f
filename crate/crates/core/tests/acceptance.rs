//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.

mod common;

use std::time::Instant;

use common::{directional_fd_error, lasso_1d, prox_by_grid, random_spd, rng, uniform_vec};
use nalgebra::{DMatrix, DVector};
use rand::Rng;
use twometric::baselines::{fista_solve, ista_solve, soft_threshold, BaselineConfig};
use twometric::bench::{
    run_cells, run_experiment, CellReport, ExperimentOutcome, ExperimentPlan, Method, ProblemRecipe, SolverSpec,
};
use twometric::bound::{
    iteration_bound, solve_bound, stationarity_residual, ComplexityConstants, StationarityConfig, Variant,
};
use twometric::l1::{l1_classify, l1_norm, l1_project, l1_residual, model_decrease, solve_l1};
use twometric::metric::{apply_metric, metric_bounds};
use twometric::oracle::{lasso_oracle, make_lasso, make_nonconvex, make_quadratic_box, LassoOracle};
use twometric::report::BoundReport;
use twometric::{MetricSpec, Objective, SolverConfig};

type Check = Result<String, String>;

fn no_clock() -> SolverConfig {
    SolverConfig {
        record_time: false,
        ..SolverConfig::default()
    }
}

fn ensure(ok: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if ok {
        Ok(())
    } else {
        Err(msg())
    }
}

// 1. Adaptive Newton against FISTA and ISTA on the LASSO preset.
fn lasso_comparison(outcome: &ExperimentOutcome, elapsed: f64) -> Check {
    let s = &outcome.summary;
    let at = |t: f64| {
        s.targets
            .iter()
            .position(|&x| x == t)
            .ok_or(format!("target {t} missing"))
    };
    let (t4, t8) = (at(1e-4)?, at(1e-8)?);
    let mut superlinear = 0;
    let mut detail = Vec::new();
    for p in &s.problems {
        let cell = |name: &str| s.cell(&p.problem, name).ok_or(format!("{} {name}: no cell", p.problem));
        let ours = cell("adaptive-newton")?.iterations_to_gap[t8]
            .ok_or(format!("{}: adaptive never reached 1e-8", p.problem))?;
        for base in ["fista", "ista"] {
            // A baseline that never reaches 1e-4 is beaten by any finite count.
            if let Some(theirs) = cell(base)?.iterations_to_gap[t4] {
                ensure(ours < theirs, || {
                    format!("{}: adaptive {ours} >= {base} {theirs}", p.problem)
                })?;
            }
        }
        let order = &cell("adaptive-newton")?.convergence_order;
        if order.is_superlinear() {
            superlinear += 1;
        }
        detail.push(format!(
            "{}: {ours} steps, order {:.2}",
            p.problem,
            order.slope().unwrap_or(f64::NAN)
        ));
    }
    ensure(superlinear >= 4, || format!("order > 1.2 on {superlinear}/5 seeds"))?;
    ensure(elapsed <= 60.0, || format!("runtime {elapsed:.1}s"))?;
    Ok(format!("{} ({elapsed:.2}s)", detail.join(" ")))
}

struct ScaledRun {
    seed: u64,
    report: BoundReport,
    constants: ComplexityConstants,
}

fn scaled_runs() -> Vec<ScaledRun> {
    (0..20u64)
        .map(|seed| {
            let n = 5 + 2 * seed as usize;
            let q = make_quadratic_box(n, 10.0, seed).unwrap();
            let cfg = no_clock();
            let report = solve_bound(
                Variant::Scaled,
                &q,
                &DVector::from_element(n, 1.0),
                &StationarityConfig::new(1e-2),
                &cfg,
                &MetricSpec::identity(),
            )
            .unwrap();
            let k = q.constants();
            let constants =
                ComplexityConstants::from_trace(&report, k.lipschitz.unwrap(), k.lower_bound.unwrap(), &cfg, 1e-2)
                    .unwrap();
            ScaledRun {
                seed,
                report,
                constants,
            }
        })
        .collect()
}

// 2. Iteration counts within the certified bound.
fn complexity_bound(runs: &[ScaledRun]) -> Check {
    let mut worst: f64 = 0.0;
    for r in runs {
        ensure(r.report.converged(), || {
            format!("seed {}: {:?}", r.seed, r.report.status)
        })?;
        let bound = iteration_bound(&r.constants).map_err(|e| e.to_string())?;
        ensure(r.report.iterations as u64 <= bound, || {
            format!("seed {}: {} > {bound}", r.seed, r.report.iterations)
        })?;
        worst = worst.max(r.report.iterations as f64 / bound as f64);
    }
    Ok(format!("20/20, largest count/bound ratio {worst:.2e}"))
}

// 3. Guaranteed decrease on every accepted scaled step.
fn decrease_floor(runs: &[ScaledRun]) -> Check {
    let mut steps = 0;
    for r in runs {
        let floor = r.constants.decrease_floor();
        for rec in &r.report.trace {
            if let Some(d) = rec.decrease {
                steps += 1;
                ensure(rec.scaled_grad_norm > 1e-2, || {
                    format!("seed {} k {}: step taken below eps", r.seed, rec.k)
                })?;
                ensure(d >= floor * (1.0 - 1e-9), || {
                    format!("seed {} k {}: {d:e} < {floor:e}", r.seed, rec.k)
                })?;
            }
        }
    }
    Ok(format!("{steps} steps"))
}

fn mixed_point(r: &mut impl Rng, n: usize) -> DVector<f64> {
    DVector::from_fn(n, |_, _| match r.random_range(0..3) {
        0 => 0.0,
        1 => r.random_range(0.1..3.0),
        _ => -r.random_range(0.1..3.0),
    })
}

fn critical_gradient(r: &mut impl Rng, x: &DVector<f64>, gamma: f64) -> DVector<f64> {
    DVector::from_fn(x.len(), |i, _| {
        if x[i] > 0.0 {
            -gamma
        } else if x[i] < 0.0 {
            gamma
        } else {
            match r.random_range(0..4) {
                0 => gamma,
                1 => -gamma,
                _ => r.random_range(-gamma..gamma),
            }
        }
    })
}

fn psi(f: &dyn Objective, gamma: f64, x: &DVector<f64>) -> f64 {
    f.value(x).unwrap() + gamma * l1_norm(x)
}

// 4. Fixed points, sufficient decrease and model decrease of the adaptive step.
fn adaptive_step_suites() -> Check {
    const STATES: u64 = 200;
    for seed in 0..STATES {
        let mut r = rng(10_000 + seed);
        let n = r.random_range(1..8);
        let gamma = r.random_range(0.1..2.0);
        let spec = if seed % 2 == 0 {
            MetricSpec::newton(1e-3)
        } else {
            MetricSpec::identity()
        };
        let h = random_spd(&mut r, n, 0.5, 10.0);

        // Zero residual: every step size returns the same point.
        let x = mixed_point(&mut r, n);
        let g = critical_gradient(&mut r, &x, gamma);
        ensure(l1_residual(&x, &g, gamma) == 0.0, || {
            format!("state {seed}: residual not zero")
        })?;
        let state = l1_classify(&x, &g, gamma).unwrap();
        let p = apply_metric(&spec, Some(&h), &state.partition, &state.shifted_gradient()).unwrap();
        for alpha in [1e-3, 1.0, 1e3] {
            ensure(l1_project(&state, &(&x - &p * alpha)) == x, || {
                format!("fixed point {seed}: moved at alpha {alpha}")
            })?;
        }

        // Positive residual: no step size returns the same point.
        let g = uniform_vec(&mut r, n, -3.0, 3.0);
        if l1_residual(&x, &g, gamma) > 1e-8 {
            let state = l1_classify(&x, &g, gamma).unwrap();
            let p = apply_metric(&spec, Some(&h), &state.partition, &state.shifted_gradient()).unwrap();
            for j in 0..=20 {
                let alpha = 0.5f64.powi(j);
                ensure(l1_project(&state, &(&x - &p * alpha)) != x, || {
                    format!("fixed point {seed}: stuck at alpha {alpha}")
                })?;
            }
        }
    }

    for seed in 0..STATES {
        let mut r = rng(20_000 + seed);
        let n = r.random_range(1..=2);
        let gamma = r.random_range(0.05..1.0);
        let sigma = r.random_range(0.05..0.95);
        let a = DMatrix::from_fn(n + 1, n, |_, _| r.random_range(-2.0..2.0));
        let b = uniform_vec(&mut r, n + 1, -3.0, 3.0);
        let f = LassoOracle::new(a, b).unwrap();
        let x = mixed_point(&mut r, n);
        let state = l1_classify(&x, &f.gradient(&x).unwrap(), gamma).unwrap();
        let spec = MetricSpec::newton(1e-2);
        let h = f.hessian(&x).unwrap();
        let p = apply_metric(&spec, Some(&h), &state.partition, &state.shifted_gradient()).unwrap();
        let (_, lmax) = metric_bounds(&spec, Some(&h), &state.partition).unwrap();
        let alpha_max = 2.0 * (1.0 - sigma) / (f.constants().lipschitz.unwrap() * lmax);
        let model = model_decrease(&state, &p);
        for j in 0..=30 {
            let alpha = alpha_max * 0.5f64.powi(j);
            let y = l1_project(&state, &(&x - &p * alpha));
            let same_sign = (0..n).all(|i| x[i] == 0.0 || x[i].signum() == y[i].signum() && y[i] != 0.0);
            if !same_sign {
                continue;
            }
            let dec = psi(&f, gamma, &x) - psi(&f, gamma, &y);
            let slack = 1e-12 * psi(&f, gamma, &x).abs().max(1.0);
            ensure(dec >= sigma * alpha * model - slack, || {
                format!("decrease {seed}: alpha {alpha}: {dec} < {}", sigma * alpha * model)
            })?;
        }
    }

    for seed in 0..STATES {
        let mut r = rng(30_000 + seed);
        let n = r.random_range(1..8);
        let gamma = r.random_range(0.1..2.0);
        let x = mixed_point(&mut r, n);
        let g = if r.random_bool(0.3) {
            critical_gradient(&mut r, &x, gamma)
        } else {
            uniform_vec(&mut r, n, -3.0, 3.0)
        };
        let h = random_spd(&mut r, n, 0.01, 50.0);
        let state = l1_classify(&x, &g, gamma).unwrap();
        let spec = if seed % 2 == 0 {
            MetricSpec::newton_literal(1e-3)
        } else {
            MetricSpec::newton(1e-3)
        };
        let p = apply_metric(&spec, Some(&h), &state.partition, &state.shifted_gradient()).unwrap();
        let model = model_decrease(&state, &p);
        ensure(model >= 0.0, || format!("model {seed}: {model} < 0"))?;
        let off: f64 = state
            .partition
            .minus()
            .iter()
            .map(|&i| (g[i] + state.shift[i]).powi(2))
            .sum();
        ensure(off == 0.0 || model > 0.0, || {
            format!("model {seed}: zero off criticality")
        })?;
    }
    Ok(format!("3 x {STATES} states"))
}

fn descending(label: &str, decreases: impl Iterator<Item = Option<f64>>, steps: &mut usize) -> Result<(), String> {
    for (k, d) in decreases.enumerate() {
        if let Some(d) = d {
            *steps += 1;
            ensure(d > 0.0, || format!("{label} step {k}: decrease {d:e}"))?;
        }
    }
    Ok(())
}

// 5. Strict objective decrease on every accepted step.
fn monotone_descent(lasso: &ExperimentOutcome) -> Check {
    let bound = ExperimentPlan {
        problems: vec![
            ProblemRecipe::Quadratic {
                n: 20,
                cond: 100.0,
                seeds: (0..5).collect(),
            },
            ProblemRecipe::Nonconvex {
                n: 20,
                seeds: (0..5).collect(),
            },
        ],
        solvers: vec![
            SolverSpec::new(Method::Classic),
            SolverSpec::new(Method::Scaled),
            SolverSpec {
                label: Some("classic-newton".into()),
                metric: Some(MetricSpec::newton(1e-3)),
                ..SolverSpec::new(Method::Classic)
            },
            SolverSpec {
                label: Some("scaled-newton".into()),
                metric: Some(MetricSpec::newton(1e-3)),
                ..SolverSpec::new(Method::Scaled)
            },
        ],
        tol: 1e-3,
        ..ExperimentPlan::figure1()
    };
    let bound = run_cells(&bound).map_err(|e| e.to_string())?;
    let mut steps = 0;
    let mut traces = 0;
    for cell in bound.cells.iter().chain(&lasso.cells) {
        if cell.solver == "fista" {
            continue;
        }
        let label = format!("{} {}", cell.problem, cell.solver);
        match cell.result.as_ref().map_err(|e| format!("{label}: {e}"))? {
            CellReport::Bound(r) => descending(&label, r.trace.iter().map(|t| t.decrease), &mut steps)?,
            CellReport::L1(r) => descending(&label, r.trace.iter().map(|t| t.decrease), &mut steps)?,
        }
        traces += 1;
    }
    Ok(format!("{traces} traces, {steps} steps"))
}

// 6. Shrinking tolerances give shrinking stationarity residuals.
fn shrinking_tolerance() -> Check {
    let q = make_quadratic_box(10, 10.0, 3).unwrap();
    let x0 = DVector::from_element(10, 1.0);
    let mut prev = f64::INFINITY;
    let mut seen = Vec::new();
    for j in 1..=6 {
        let eps = 10f64.powi(-j);
        let rep = solve_bound(
            Variant::Classic,
            &q,
            &x0,
            &StationarityConfig::new(eps),
            &no_clock(),
            &MetricSpec::identity(),
        )
        .map_err(|e| e.to_string())?;
        ensure(rep.converged(), || format!("eps {eps}: {:?}", rep.status))?;
        let x = rep.point();
        let r = stationarity_residual(&x, &q.gradient(&x).unwrap());
        ensure(r <= 2.0 * eps, || format!("eps {eps}: residual {r:e}"))?;
        ensure(r <= 2.0 * prev, || format!("eps {eps}: residual {r:e} after {prev:e}"))?;
        prev = r;
        seen.push(format!("{r:.1e}"));
    }
    Ok(seen.join(" "))
}

// 7. Independent solvers and reference computations agree.
fn oracle_agreement() -> Check {
    let base = BaselineConfig {
        record_time: false,
        ..Default::default()
    };
    let mut worst: f64 = 0.0;
    for seed in 0..10 {
        let inst = make_lasso(20, 50, 0.1, 1.0, seed).unwrap();
        let inst = inst.with_gamma(0.1 * inst.gamma_max());
        let f = lasso_oracle(&inst).unwrap();
        let x0 = DVector::zeros(50);
        let a =
            solve_l1(&f, &x0, inst.gamma, 1e-8, &no_clock(), &MetricSpec::newton(1e-6)).map_err(|e| e.to_string())?;
        let b = fista_solve(&f, inst.gamma, &x0, &base).map_err(|e| e.to_string())?;
        let c = ista_solve(&f, inst.gamma, &x0, &base).map_err(|e| e.to_string())?;
        for other in [&b, &c] {
            let rel = (a.final_value - other.final_value).abs() / a.final_value.abs().max(1.0);
            ensure(rel <= 1e-6, || format!("seed {seed} {}: {rel:e}", other.method))?;
            worst = worst.max(rel);
        }
    }

    let mut r = rng(2024);
    let grid = 200_000;
    for _ in 0..1000 {
        let z: f64 = r.random_range(-5.0..5.0);
        let t: f64 = r.random_range(0.0..3.0);
        let radius = z.abs() + 1.0;
        let want = prox_by_grid(z, t, radius, grid);
        let got = soft_threshold(&DVector::from_element(1, z), t).unwrap()[0];
        ensure((got - want).abs() <= 4.0 * radius / grid as f64, || {
            format!("prox z {z} t {t}: {got} vs {want}")
        })?;
        let closed = lasso_1d(1.0, z, t);
        ensure((got - closed).abs() <= 1e-12 * closed.abs().max(1.0), || {
            format!("prox z {z} t {t}: {got} vs {closed}")
        })?;
    }

    let oracles: Vec<(Box<dyn Objective>, f64, f64)> = vec![
        (
            Box::new(lasso_oracle(&make_lasso(8, 5, 0.4, 0.1, 3).unwrap()).unwrap()),
            -2.0,
            2.0,
        ),
        (Box::new(make_quadratic_box(6, 30.0, 5).unwrap()), 0.0, 3.0),
        (Box::new(make_nonconvex(4, 6).unwrap()), 0.0, 3.0),
    ];
    let mut fd_worst: f64 = 0.0;
    for (i, (f, lo, hi)) in oracles.iter().enumerate() {
        let mut r = rng(100 + i as u64);
        for _ in 0..100 {
            let x = uniform_vec(&mut r, f.dim(), *lo, *hi);
            let d = uniform_vec(&mut r, f.dim(), -1.0, 1.0);
            let err = directional_fd_error(f.as_ref(), &x, &d, 1e-5);
            ensure(err <= 1e-6, || format!("oracle {i}: fd error {err:e}"))?;
            fd_worst = fd_worst.max(err);
        }
    }
    Ok(format!("psi spread {worst:.1e}, fd error {fd_worst:.1e}"))
}

// 8. The preset writes identical bytes on every run.
fn determinism() -> Check {
    let plan = ExperimentPlan::figure1();
    let a = tempfile::tempdir().map_err(|e| e.to_string())?;
    let b = tempfile::tempdir().map_err(|e| e.to_string())?;
    run_experiment(&plan, a.path()).map_err(|e| e.to_string())?;
    run_experiment(&plan, b.path()).map_err(|e| e.to_string())?;
    let mut names: Vec<_> = std::fs::read_dir(a.path())
        .map_err(|e| e.to_string())?
        .map(|e| e.unwrap().file_name())
        .collect();
    names.sort();
    for name in &names {
        let x = std::fs::read(a.path().join(name)).map_err(|e| e.to_string())?;
        let y = std::fs::read(b.path().join(name)).map_err(|e| format!("{name:?}: {e}"))?;
        ensure(x == y, || format!("{name:?} differs"))?;
    }
    let count = std::fs::read_dir(b.path()).map_err(|e| e.to_string())?.count();
    ensure(count == names.len(), || format!("{count} files vs {}", names.len()))?;
    Ok(format!("{} files", names.len()))
}

fn main() {
    let start = Instant::now();
    let lasso = run_cells(&ExperimentPlan::figure1());
    let elapsed = start.elapsed().as_secs_f64();
    let runs = scaled_runs();

    let results: Vec<(&str, Check)> = vec![
        (
            "lasso comparison",
            lasso
                .as_ref()
                .map_err(|e| e.to_string())
                .and_then(|o| lasso_comparison(o, elapsed)),
        ),
        ("complexity bound", complexity_bound(&runs)),
        ("per-step decrease", decrease_floor(&runs)),
        ("adaptive step properties", adaptive_step_suites()),
        (
            "monotone descent",
            lasso.as_ref().map_err(|e| e.to_string()).and_then(monotone_descent),
        ),
        ("shrinking tolerance", shrinking_tolerance()),
        ("oracle agreement", oracle_agreement()),
        ("determinism", determinism()),
    ];

    let mut failed = 0;
    for (i, (name, res)) in results.iter().enumerate() {
        match res {
            Ok(msg) => println!("PASS criterion {}: {name}: {msg}", i + 1),
            Err(msg) => {
                failed += 1;
                println!("FAIL criterion {}: {name}: {msg}", i + 1);
            }
        }
    }
    println!("{}/{} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
