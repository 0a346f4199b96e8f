mod common;

use common::{lasso_1d, prox_by_grid, rng};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;
use rand::Rng;
use twometric::baselines::{fista_solve, ista_solve, projected_gradient_solve, soft_threshold, BaselineConfig};
use twometric::oracle::{lasso_oracle, make_lasso, make_quadratic_box, LassoOracle};
use twometric::Objective;

fn cfg(tol: f64) -> BaselineConfig {
    BaselineConfig {
        tol,
        record_time: false,
        ..Default::default()
    }
}

#[test]
fn soft_threshold_matches_grid_prox() {
    let mut r = rng(2024);
    let grid = 200_000;
    for _ in 0..1000 {
        let z: f64 = r.random_range(-5.0..5.0);
        let t: f64 = r.random_range(0.0..3.0);
        let radius = z.abs() + 1.0;
        let want = prox_by_grid(z, t, radius, grid);
        let got = soft_threshold(&DVector::from_element(1, z), t).unwrap()[0];
        assert!(
            (got - want).abs() <= 2.0 * 2.0 * radius / grid as f64,
            "z {z} t {t}: {got} vs {want}"
        );
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn ista_and_fista_solve_one_d(a in 0.5f64..3.0, b in -4.0f64..4.0, gamma in 0.05f64..2.0) {
        let f = LassoOracle::new(DMatrix::from_element(1, 1, a), DVector::from_element(1, b)).unwrap();
        let want = lasso_1d(a, b, gamma);
        for rep in [ista_solve(&f, gamma, &DVector::zeros(1), &cfg(1e-12)).unwrap(), fista_solve(&f, gamma, &DVector::zeros(1), &cfg(1e-12)).unwrap()] {
            prop_assert!(rep.converged());
            prop_assert!((rep.x[0] - want).abs() <= 1e-10 * want.abs().max(1.0));
        }
    }

    #[test]
    fn ista_objective_never_increases(seed in 0u64..500) {
        let inst = make_lasso(12, 30, 0.1, 1.0, seed).unwrap();
        let inst = inst.with_gamma(0.1 * inst.gamma_max());
        let f = lasso_oracle(&inst).unwrap();
        let rep = ista_solve(&f, inst.gamma, &DVector::zeros(30), &cfg(1e-8)).unwrap();
        for rec in rep.trace.iter().filter_map(|r| r.decrease) {
            prop_assert!(rec >= 0.0);
        }
    }
}

#[test]
fn fista_needs_no_more_iterations_than_ista() {
    for seed in 0..10 {
        let inst = make_lasso(50, 200, 0.1, 1.0, seed).unwrap();
        let inst = inst.with_gamma(0.1 * inst.gamma_max());
        let f = lasso_oracle(&inst).unwrap();
        let x0 = DVector::zeros(200);
        let i = ista_solve(&f, inst.gamma, &x0, &cfg(1e-6)).unwrap();
        let fi = fista_solve(&f, inst.gamma, &x0, &cfg(1e-6)).unwrap();
        assert!(i.converged() && fi.converged());
        assert!(
            fi.iterations <= i.iterations,
            "seed {seed}: fista {} > ista {}",
            fi.iterations,
            i.iterations
        );
    }
}

#[test]
fn projected_gradient_agrees_with_reference_minimizer() {
    for seed in 0..5 {
        let q = make_quadratic_box(8, 20.0, seed).unwrap();
        let rep = projected_gradient_solve(&q, &DVector::from_element(8, 1.0), &cfg(1e-9)).unwrap();
        assert!(rep.converged());
        let f_low = q.constants().lower_bound.unwrap();
        assert!((rep.final_value - f_low).abs() <= 1e-8 * f_low.abs().max(1.0));
        assert!(rep.certificate.unwrap().is_eps_1o);
    }
}
