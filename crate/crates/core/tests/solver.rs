//! Time stepping: residuals of computed steps, solvability for every element
//! pair and storage coefficient, run bookkeeping, the trapezoidal variant and
//! a regression fixture.

mod common;

use std::collections::HashMap;

use biot_core::sparse::relative_residual;
use biot_core::verification::{
    rates::FIELD_NAMES, run_single, temporal_order_study, ConvergenceConfig, DtRule, LoadProblem, ManufacturedCase,
};
use biot_core::{
    BiotProblem, BiotSolver, DirectSolver, ElementPair, MaterialParams, Side, TimeGrid, TimeScheme,
};
use common::*;
use rand::Rng;

const PAIRS: [ElementPair; 2] = [ElementPair::One, ElementPair::Two];

fn table3_params() -> MaterialParams {
    MaterialParams { mu: 10.0, lambda: 10.0, s0: 1.0, ..Default::default() }
}

#[test]
fn one_step_satisfies_the_discrete_equations() {
    for pair in PAIRS {
        let sp = spaces(4, pair);
        let case = ManufacturedCase::new(table3_params());
        let solver = BiotSolver::new(&sp, &case, 1.0 / 16.0, TimeScheme::BackwardEuler).unwrap();
        let prev = solver.initial_state(0.0).unwrap();
        let next = solver.step(&prev).unwrap();
        assert!((next.time - 1.0 / 16.0).abs() < 1e-15);
        assert!(solver.step_residual(&prev, &next) <= 1e-9);
        let r = backward_euler_residuals(&sp, &case.params, &case, &prev, &next, &[]);
        assert!(r.iter().all(|&v| v <= 1e-9), "{pair:?}: {r:?}");
    }
}

#[test]
fn steps_with_essential_conditions_satisfy_unconstrained_rows() {
    for pair in PAIRS {
        let sp = spaces(4, pair);
        let problem = LoadProblem::with_lambda(1e4);
        let solver = BiotSolver::new(&sp, &problem, 1.0 / 16.0, TimeScheme::BackwardEuler).unwrap();
        let prev = biot_core::DiscreteState::zeros(&sp, 0.0);
        let s1 = solver.step(&prev).unwrap();
        let s2 = solver.step(&s1).unwrap();
        let ess = solver.essential_dofs();
        assert!(!ess.is_empty());
        let x = s2.to_monolithic();
        assert!(ess.iter().all(|&d| x[d] == 0.0));
        let r = backward_euler_residuals(&sp, &problem.params, &problem, &s1, &s2, ess);
        assert!(r.iter().all(|&v| v <= 1e-9), "{pair:?}: {r:?}");
    }
}

#[test]
fn stepping_matrix_is_nonsingular_for_null_data() {
    let mut rng = rng(21);
    for pair in PAIRS {
        for n in [1, 2, 4] {
            for s0 in [0.0, 1.0] {
                let sp = spaces(n, pair);
                let params = MaterialParams { mu: 10.0, lambda: 10.0, s0, ..Default::default() };
                let problems: [Box<dyn BiotProblem>; 2] = [
                    Box::new(ManufacturedCase::new(params)),
                    Box::new(LoadProblem { params }),
                ];
                for problem in &problems {
                    let solver = BiotSolver::new(&sp, problem.as_ref(), 0.1, TimeScheme::BackwardEuler).unwrap();
                    let lu = DirectSolver::factorize(solver.matrix()).unwrap();
                    let b: Vec<f64> = (0..sp.total_dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
                    let x = lu.solve(&b);
                    let res = relative_residual(solver.matrix(), &x, &b);
                    assert!(res <= 1e-10, "{pair:?} n={n} s0={s0}: {res:e}");
                }
            }
        }
    }
}

#[test]
fn repeated_solves_are_bitwise_identical() {
    let sp = spaces(4, ElementPair::Two);
    let case = ManufacturedCase::new(table3_params());
    let solver = BiotSolver::new(&sp, &case, 0.01, TimeScheme::BackwardEuler).unwrap();
    let lu = DirectSolver::factorize(solver.matrix()).unwrap();
    let b: Vec<f64> = (0..sp.total_dim()).map(|i| (i as f64).sin()).collect();
    assert_eq!(lu.solve(&b), lu.solve(&b));
}

#[test]
fn single_step_run_equals_step() {
    let sp = spaces(4, ElementPair::One);
    let case = ManufacturedCase::new(table3_params());
    let grid = TimeGrid::new(0.0, 0.25, 1).unwrap();
    let solver = BiotSolver::new(&sp, &case, grid.dt(), TimeScheme::BackwardEuler).unwrap();
    let init = solver.initial_state(0.0).unwrap();
    let by_step = solver.step(&init).unwrap();
    let by_run = solver.run(init, &grid, |_| {}).unwrap();
    assert_eq!(by_step, by_run);
}

#[test]
fn h2_rule_on_quarter_mesh_takes_sixteen_steps() {
    let sp = spaces(4, ElementPair::One);
    let case = ManufacturedCase::new(table3_params());
    let grid = DtRule::H2.grid(4, 1.0).unwrap();
    assert_eq!(grid.steps, 16);
    let solver = BiotSolver::new(&sp, &case, grid.dt(), TimeScheme::BackwardEuler).unwrap();
    let mut times = Vec::new();
    let last = solver.run(solver.initial_state(0.0).unwrap(), &grid, |s| times.push(s.time)).unwrap();
    assert_eq!(times.len(), 16);
    assert_eq!(last.time, 1.0);
    assert!(times.windows(2).all(|w| w[1] > w[0]));
}

#[test]
fn mismatched_grid_is_rejected() {
    let sp = spaces(2, ElementPair::One);
    let case = ManufacturedCase::new(table3_params());
    let solver = BiotSolver::new(&sp, &case, 0.1, TimeScheme::BackwardEuler).unwrap();
    let grid = TimeGrid::new(0.0, 1.0, 20).unwrap();
    assert!(solver.run(solver.initial_state(0.0).unwrap(), &grid, |_| {}).is_err());
}

#[test]
fn initial_stress_converges_under_refinement() {
    let case = ManufacturedCase::new(table3_params());
    let errors: Vec<f64> = [4, 8, 16]
        .iter()
        .map(|&n| {
            let sp = spaces(n, ElementPair::One);
            let solver = BiotSolver::new(&sp, &case, 0.1, TimeScheme::BackwardEuler).unwrap();
            let init = solver.initial_state(0.0).unwrap();
            sp.sigma.l2_error(&init.sigma, |x, out| {
                let s = case.stress(0.0, x);
                out.copy_from_slice(&[s[0][0], s[0][1], s[1][0], s[1][1]]);
            })
        })
        .collect();
    for w in errors.windows(2) {
        assert!((w[0] / w[1]).log2() >= 1.0, "{errors:?}");
    }
}

#[test]
fn initial_pressure_is_the_cell_mean() {
    let sp = spaces(3, ElementPair::One);
    let case = ManufacturedCase::new(table3_params());
    let solver = BiotSolver::new(&sp, &case, 0.1, TimeScheme::BackwardEuler).unwrap();
    let init = solver.initial_state(0.0).unwrap();
    let mesh = sp.mesh();
    for c in 0..mesh.num_cells() {
        // x²y is cubic, so the 10-point rule built from vertices, edge
        // thirds and the centroid integrates it exactly
        let v = mesh.cell_vertices(c);
        let mean = cubic_mean(v, |x| x[0] * x[0] * x[1]);
        let (dofs, _) = sp.p.cell_dofs(c);
        assert!((init.p[dofs[0]] - mean).abs() < 1e-14);
    }
}

/// Mean of a cubic over a triangle via the degree-3 Lagrange interpolant:
/// weights 1/30 at the vertices, 3/40 at the edge third points and 9/20 at
/// the centroid.
fn cubic_mean(v: [[f64; 2]; 3], f: impl Fn([f64; 2]) -> f64) -> f64 {
    let at = |l: [f64; 3]| f([l[0] * v[0][0] + l[1] * v[1][0] + l[2] * v[2][0], l[0] * v[0][1] + l[1] * v[1][1] + l[2] * v[2][1]]);
    let mut sum = 0.0;
    for i in 0..3 {
        let mut l = [0.0; 3];
        l[i] = 1.0;
        sum += at(l) / 30.0;
        for j in 0..3 {
            if i != j {
                let mut l = [0.0; 3];
                l[i] = 2.0 / 3.0;
                l[j] = 1.0 / 3.0;
                sum += 3.0 / 40.0 * at(l);
            }
        }
    }
    sum + 9.0 / 20.0 * at([1.0 / 3.0; 3])
}

#[test]
fn trapezoidal_stepping_keeps_zero_data_at_zero() {
    for pair in PAIRS {
        let sp = spaces(3, pair);
        let problem = FreeDecay {
            params: MaterialParams { s0: 0.0, ..table3_params() },
            initial: zero_fields,
            free_sides: vec![Side::Top],
        };
        let grid = TimeGrid::new(0.0, 1.0, 6).unwrap();
        let solver = BiotSolver::new(&sp, &problem, grid.dt(), TimeScheme::CrankNicolson).unwrap();
        let mut worst = 0.0f64;
        solver.run(solver.initial_state(0.0).unwrap(), &grid, |s| worst = worst.max(max_abs_state(s))).unwrap();
        assert_eq!(worst, 0.0);
    }
}

#[test]
fn trapezoidal_stepping_keeps_algebraic_rows_satisfied() {
    for pair in PAIRS {
        let sp = spaces(4, pair);
        let case = ManufacturedCase::new(table3_params());
        let grid = TimeGrid::new(0.0, 1.0, 10).unwrap();
        let solver = BiotSolver::new(&sp, &case, grid.dt(), TimeScheme::CrankNicolson).unwrap();
        let mut levels = Vec::new();
        let last = solver.run(solver.initial_state(0.0).unwrap(), &grid, |s| levels.push(s.clone())).unwrap();
        assert_eq!(levels.len(), grid.steps + 1);
        assert!((last.time - 1.0).abs() < 1e-14);
        for s in [&levels[0], &levels[1], &last] {
            let r = algebraic_residuals(&sp, &case.params, &case, s);
            assert!(r.iter().all(|&v| v <= 1e-9), "{pair:?} t={}: {r:?}", s.time);
        }
    }
}

#[test]
fn trapezoidal_stepping_is_second_order_in_time() {
    // coarser steps leave the stiff pressure modes barely damped, so the
    // asymptotic regime starts near Δt = 1/64 on this mesh
    let study = temporal_order_study(ElementPair::One, 4, table3_params(), &[1.0 / 64.0, 1.0 / 128.0, 1.0 / 256.0], 1.0, TimeScheme::CrankNicolson)
        .unwrap();
    for r in &study.rates {
        assert!((r - 2.0).abs() <= 0.3, "{:?}", study);
    }
}

#[test]
fn backward_euler_is_first_order_in_time() {
    let study = temporal_order_study(ElementPair::One, 4, table3_params(), &[1.0 / 8.0, 1.0 / 16.0, 1.0 / 32.0], 1.0, TimeScheme::BackwardEuler)
        .unwrap();
    for r in &study.rates {
        assert!((r - 1.0).abs() <= 0.2, "{:?}", study);
    }
}

#[test]
fn element_one_errors_match_regression_fixture() {
    let text = include_str!("fixtures/element1_n8.txt");
    let fixture: HashMap<&str, f64> = text
        .lines()
        .filter(|l| !l.starts_with('#') && !l.is_empty())
        .map(|l| {
            let (k, v) = l.split_once('=').unwrap();
            (k, v.parse().unwrap())
        })
        .collect();
    let run = run_single(&ConvergenceConfig::new(ElementPair::One, table3_params(), DtRule::H2, vec![]), 8).unwrap();
    assert_eq!(run.steps, 64);
    for (name, value) in FIELD_NAMES.iter().zip(run.errors.as_array()) {
        let expected = fixture[name];
        assert!((value - expected).abs() <= 1e-10 * expected, "{name}: {value:e} vs {expected:e}");
    }
}

#[test]
fn max_over_steps_bounds_final_time_errors() {
    let mut config = ConvergenceConfig::new(ElementPair::One, table3_params(), DtRule::H2, vec![]);
    let last = run_single(&config, 4).unwrap().errors.as_array();
    config.max_over_steps = true;
    let worst = run_single(&config, 4).unwrap().errors.as_array();
    assert!(worst.iter().zip(&last).all(|(w, l)| w >= l));
}
