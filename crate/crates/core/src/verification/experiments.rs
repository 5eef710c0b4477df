//! Experiment drivers: mesh refinement studies with the manufactured case,
//! the λ sweep on the fixed-load problem and a time-step refinement study.

use std::fmt::Write as _;
use std::sync::Arc;

use thiserror::Error;

use crate::assembly::{ElementPair, MixedSpaces};
use crate::mesh::{Diagonal, Mesh};
use crate::problem::{BiotProblem, MaterialParams};
use crate::solver::{BiotError, BiotSolver, DiscreteState, TimeGrid, TimeScheme};
use crate::verification::errors::{relative_error_on_fine, FieldErrors};
use crate::verification::loaded::LoadProblem;
use crate::verification::manufactured::ManufacturedCase;
use crate::verification::rates::{convergence_rate, sci3, RateError, RateTable};

/// Time-step choice as a function of the mesh size.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DtRule {
    H2,
    H3,
    Fixed(f64),
}

impl DtRule {
    pub fn dt(&self, n: usize) -> f64 {
        let h = 1.0 / n as f64;
        match *self {
            DtRule::H2 => h * h,
            DtRule::H3 => h * h * h,
            DtRule::Fixed(dt) => dt,
        }
    }

    pub fn grid(&self, n: usize, t_final: f64) -> Result<TimeGrid, BiotError> {
        TimeGrid::with_max_step(0.0, t_final, self.dt(n))
    }
}

impl std::fmt::Display for DtRule {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            DtRule::H2 => write!(f, "h2"),
            DtRule::H3 => write!(f, "h3"),
            DtRule::Fixed(dt) => write!(f, "{dt}"),
        }
    }
}

impl std::str::FromStr for DtRule {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, String> {
        match s {
            "h2" => Ok(DtRule::H2),
            "h3" => Ok(DtRule::H3),
            other => match other.parse::<f64>() {
                Ok(v) if v > 0.0 && v.is_finite() => Ok(DtRule::Fixed(v)),
                _ => Err(format!("time step rule must be h2, h3 or a positive number, got {other:?}")),
            },
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceConfig {
    pub pair: ElementPair,
    pub params: MaterialParams,
    pub dt_rule: DtRule,
    pub refinements: Vec<usize>,
    pub t_final: f64,
    pub diagonal: Diagonal,
    pub scheme: TimeScheme,
    /// Report the largest error over all time levels instead of the error at
    /// the final time.
    pub max_over_steps: bool,
}

impl ConvergenceConfig {
    /// Final time 1, forward diagonals, backward Euler, final-time errors.
    pub fn new(pair: ElementPair, params: MaterialParams, dt_rule: DtRule, refinements: Vec<usize>) -> Self {
        ConvergenceConfig {
            pair,
            params,
            dt_rule,
            refinements,
            t_final: 1.0,
            diagonal: Diagonal::Forward,
            scheme: TimeScheme::BackwardEuler,
            max_over_steps: false,
        }
    }
}

/// Outcome of one manufactured-solution run.
#[derive(Debug, Clone, PartialEq)]
pub struct SingleRun {
    pub n: usize,
    pub dofs: usize,
    pub steps: usize,
    pub errors: FieldErrors,
}

fn spaces_for(n: usize, diagonal: Diagonal, pair: ElementPair) -> Result<MixedSpaces, BiotError> {
    let mesh = Arc::new(Mesh::structured(n, diagonal)?);
    Ok(MixedSpaces::new(mesh, pair)?)
}

/// Solves the manufactured case on an `n × n` mesh and measures all errors.
pub fn run_single(config: &ConvergenceConfig, n: usize) -> Result<SingleRun, BiotError> {
    let spaces = spaces_for(n, config.diagonal, config.pair)?;
    let params = config.params;
    let case = ManufacturedCase::new(params);
    let grid = config.dt_rule.grid(n, config.t_final)?;
    let solver = BiotSolver::new(&spaces, &case, grid.dt(), config.scheme)?;
    let init = solver.initial_state(0.0)?;
    let mut worst = [0.0f64; 6];
    let last = solver.run(init, &grid, |state| {
        if config.max_over_steps {
            let e = FieldErrors::compute(&spaces, &params, state, &case).as_array();
            for (w, v) in worst.iter_mut().zip(e) {
                *w = w.max(v);
            }
        }
    })?;
    let errors = if config.max_over_steps {
        FieldErrors::from_array(worst)
    } else {
        FieldErrors::compute(&spaces, &params, &last, &case)
    };
    Ok(SingleRun { n, dofs: spaces.total_dim(), steps: grid.steps, errors })
}

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Solve(#[from] BiotError),
    #[error(transparent)]
    Rate(#[from] RateError),
}

/// Runs every refinement and tabulates errors and rates. `on_run` sees each
/// finished run (progress reporting).
pub fn run_convergence_experiment(
    config: &ConvergenceConfig,
    mut on_run: impl FnMut(&SingleRun),
) -> Result<RateTable, ExperimentError> {
    let mut entries = Vec::with_capacity(config.refinements.len());
    for &n in &config.refinements {
        let run = run_single(config, n)?;
        on_run(&run);
        entries.push((n, run.errors));
    }
    Ok(RateTable::from_errors(&entries)?)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LockingConfig {
    pub lambdas: Vec<f64>,
    pub refinements: Vec<usize>,
    pub reference: usize,
    pub mu: f64,
    pub s0: f64,
    pub kappa: f64,
    pub alpha: f64,
    pub t_final: f64,
    pub dt_rule: DtRule,
    pub diagonal: Diagonal,
}

impl Default for LockingConfig {
    fn default() -> Self {
        LockingConfig {
            lambdas: vec![1e1, 1e4, 1e7, 1e10],
            refinements: vec![4, 8, 16, 32],
            reference: 64,
            mu: 10.0,
            s0: 1e-3,
            kappa: 1.0,
            alpha: 1.0,
            t_final: 1.0,
            dt_rule: DtRule::H2,
            diagonal: Diagonal::Forward,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LockingRow {
    pub lambda: f64,
    pub one_over_h: usize,
    /// Relative errors of `σ`, `u`, `z`.
    pub relative: [f64; 3],
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct LockingTable {
    pub rows: Vec<LockingRow>,
}

impl LockingTable {
    pub fn csv_header() -> &'static str {
        "lambda,one_over_h,rel_sigma,rate_sigma,rel_u,rate_u,rel_z,rate_z"
    }

    fn rates(&self, k: usize) -> Option<[f64; 3]> {
        let row = &self.rows[k];
        let prev = self.rows[..k].iter().rev().find(|r| r.lambda == row.lambda)?;
        let mut out = [0.0; 3];
        for f in 0..3 {
            out[f] = convergence_rate(&[prev.relative[f], row.relative[f]]).ok()?[0];
        }
        Some(out)
    }

    pub fn to_csv(&self) -> String {
        let mut out = format!("{}\n", Self::csv_header());
        for (k, row) in self.rows.iter().enumerate() {
            let rates = self.rates(k);
            let _ = write!(out, "{:e},{}", row.lambda, row.one_over_h);
            for f in 0..3 {
                let r = rates.map(|r| format!("{:e}", r[f])).unwrap_or_default();
                let _ = write!(out, ",{:e},{}", row.relative[f], r);
            }
            out.push('\n');
        }
        out
    }

    pub fn to_markdown(&self) -> String {
        let mut out = String::from("| λ | 1/h | σ rel. error | rate | u rel. error | rate | z rel. error | rate |\n|---|---|---|---|---|---|---|---|\n");
        for (k, row) in self.rows.iter().enumerate() {
            let rates = self.rates(k);
            let _ = write!(out, "| {} | {} |", sci3(row.lambda), row.one_over_h);
            for f in 0..3 {
                let r = rates.map(|r| format!("{:.2}", r[f])).unwrap_or_else(|| "--".into());
                let _ = write!(out, " {} | {} |", sci3(row.relative[f]), r);
            }
            out.push('\n');
        }
        out
    }

    pub fn get(&self, lambda: f64, one_over_h: usize) -> Option<&LockingRow> {
        self.rows.iter().find(|r| r.lambda == lambda && r.one_over_h == one_over_h)
    }
}

fn solve_load_problem(
    problem: &LoadProblem,
    n: usize,
    config: &LockingConfig,
) -> Result<(MixedSpaces, DiscreteState), BiotError> {
    let spaces = spaces_for(n, config.diagonal, ElementPair::One)?;
    let grid = config.dt_rule.grid(n, config.t_final)?;
    let state = {
        let solver = BiotSolver::new(&spaces, problem, grid.dt(), TimeScheme::BackwardEuler)?;
        let init = DiscreteState::zeros(&spaces, 0.0);
        solver.run(init, &grid, |_| {})?
    };
    Ok((spaces, state))
}

/// Relative errors of `σ`, `u`, `z` at the final time against the solution
/// on the reference mesh, for every `λ` and refinement.
pub fn run_locking_experiment(config: &LockingConfig, mut on_row: impl FnMut(&LockingRow)) -> Result<LockingTable, BiotError> {
    let mut rows = Vec::new();
    for &lambda in &config.lambdas {
        let problem = LoadProblem {
            params: MaterialParams { mu: config.mu, lambda, alpha: config.alpha, s0: config.s0, kappa: config.kappa },
        };
        let (fine, reference) = solve_load_problem(&problem, config.reference, config)?;
        for &n in &config.refinements {
            let (coarse, state) = solve_load_problem(&problem, n, config)?;
            let relative = [
                relative_error_on_fine(&coarse.sigma, &state.sigma, &fine.sigma, &reference.sigma),
                relative_error_on_fine(&coarse.u, &state.u, &fine.u, &reference.u),
                relative_error_on_fine(&coarse.z, &state.z, &fine.z, &reference.z),
            ];
            let row = LockingRow { lambda, one_over_h: n, relative };
            on_row(&row);
            rows.push(row);
        }
    }
    Ok(LockingTable { rows })
}

/// Differences between solutions with decreasing steps and a run with an
/// eight times smaller step, all on the same mesh and with the same scheme.
#[derive(Debug, Clone, PartialEq)]
pub struct TemporalStudy {
    pub steps: Vec<f64>,
    /// `(Σ_fields ‖x_Δt − x_ref‖²)^{1/2}` at the final time.
    pub errors: Vec<f64>,
    pub rates: Vec<f64>,
}

pub fn temporal_order_study(
    pair: ElementPair,
    n: usize,
    params: MaterialParams,
    steps: &[f64],
    t_final: f64,
    scheme: TimeScheme,
) -> Result<TemporalStudy, ExperimentError> {
    let spaces = spaces_for(n, Diagonal::Forward, pair)?;
    let case = ManufacturedCase::new(params);
    let solve = |dt: f64| -> Result<DiscreteState, BiotError> {
        let grid = TimeGrid::with_max_step(0.0, t_final, dt)?;
        let solver = BiotSolver::new(&spaces, &case, grid.dt(), scheme)?;
        solver.run(solver.initial_state(0.0)?, &grid, |_| {})
    };
    let finest = steps.iter().copied().fold(f64::INFINITY, f64::min);
    let reference = solve(finest / 8.0)?;
    let mut errors = Vec::with_capacity(steps.len());
    for &dt in steps {
        let s = solve(dt)?;
        let diff = |space: &crate::space::FunctionSpace, a: &[f64], b: &[f64]| {
            let d: Vec<f64> = a.iter().zip(b).map(|(x, y)| x - y).collect();
            space.l2_error(&d, |_, out| out.iter_mut().for_each(|v| *v = 0.0)).powi(2)
        };
        let e = diff(&spaces.sigma, &s.sigma, &reference.sigma)
            + diff(&spaces.u, &s.u, &reference.u)
            + diff(&spaces.gamma, &s.gamma, &reference.gamma)
            + diff(&spaces.z, &s.z, &reference.z)
            + diff(&spaces.p, &s.p, &reference.p);
        errors.push(e.sqrt());
    }
    let rates = convergence_rate(&errors)?;
    Ok(TemporalStudy { steps: steps.to_vec(), errors, rates })
}

/// Convenience for problems that do not need the manufactured solution.
pub fn final_state(
    problem: &dyn BiotProblem,
    spaces: &MixedSpaces,
    grid: &TimeGrid,
    initial: Option<DiscreteState>,
) -> Result<DiscreteState, BiotError> {
    let solver = BiotSolver::new(spaces, problem, grid.dt(), TimeScheme::BackwardEuler)?;
    let init = match initial {
        Some(s) => s,
        None => solver.initial_state(grid.t0)?,
    };
    solver.run(init, grid, |_| {})
}
