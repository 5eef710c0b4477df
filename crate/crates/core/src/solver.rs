//! Monolithic time stepping for the five-field Biot system.
//!
//! Each step solves
//!
//! ```text
//! [ A    B_u  B_γ  0      A_p ] [σ]   [⟨u₀, τn⟩                       ]
//! [ B_uᵀ 0    0    0      0   ] [u]   [−(f, v)                        ]
//! [ B_γᵀ 0    0    0      0   ] [γ] = [0                              ]
//! [ 0    0    0   −θΔt M −θΔt B] [z]   [−θΔt ⟨p₀, w·n⟩                ]
//! [ A_pᵀ 0    0   −θΔt Bᵀ M_p ] [p]   [Δt (g, q) + A_pᵀσ⁻ + M_p p⁻ + …]
//! ```
//!
//! where `θ = 1` gives backward Euler. The Darcy row is scaled by `−θΔt` so the
//! matrix is symmetric. The matrix is factored once per step size.

use thiserror::Error;

use crate::assembly::{assemble_blocks, assemble_loads, essential_values, BlockSystem, EssentialDofs, LoadTerms, MixedSpaces};
use crate::element::FeError;
use crate::mesh::{BoundaryPartition, MeshError};
use crate::problem::{BiotProblem, MaterialParams, ParamError};
use crate::sparse::{relative_residual, CsrMatrix, DirectSolver, SolverError, TripletBuilder};

#[derive(Debug, Error)]
pub enum BiotError {
    #[error(transparent)]
    Param(#[from] ParamError),
    #[error(transparent)]
    Mesh(#[from] MeshError),
    #[error(transparent)]
    Element(#[from] FeError),
    #[error(transparent)]
    Solver(#[from] SolverError),
    #[error("invalid time grid: {0}")]
    TimeGrid(String),
}

/// Uniform time levels `t₀ + iΔt`, `i = 0..=steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    pub t0: f64,
    pub t_final: f64,
    pub steps: usize,
}

impl TimeGrid {
    pub fn new(t0: f64, t_final: f64, steps: usize) -> Result<Self, BiotError> {
        if steps == 0 || !(t_final > t0) || !t_final.is_finite() {
            return Err(BiotError::TimeGrid(format!("[{t0}, {t_final}] with {steps} steps")));
        }
        Ok(TimeGrid { t0, t_final, steps })
    }

    /// Smallest number of uniform steps not larger than `dt`.
    pub fn with_max_step(t0: f64, t_final: f64, dt: f64) -> Result<Self, BiotError> {
        if !(dt > 0.0) {
            return Err(BiotError::TimeGrid(format!("step {dt}")));
        }
        let steps = ((t_final - t0) / dt - 1e-9).ceil().max(1.0) as usize;
        Self::new(t0, t_final, steps)
    }

    pub fn dt(&self) -> f64 {
        (self.t_final - self.t0) / self.steps as f64
    }

    pub fn time(&self, i: usize) -> f64 {
        if i == self.steps {
            self.t_final
        } else {
            self.t0 + i as f64 * self.dt()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum TimeScheme {
    #[default]
    BackwardEuler,
    /// Trapezoidal rule after one small backward Euler step of size `Δt²`.
    CrankNicolson,
}

/// Coefficient vectors of all five fields at one time level.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteState {
    pub time: f64,
    pub sigma: Vec<f64>,
    pub u: Vec<f64>,
    pub gamma: Vec<f64>,
    pub z: Vec<f64>,
    pub p: Vec<f64>,
}

impl DiscreteState {
    pub fn zeros(spaces: &MixedSpaces, time: f64) -> Self {
        let [ds, du, dg, dz, dp] = spaces.dims();
        DiscreteState { time, sigma: vec![0.0; ds], u: vec![0.0; du], gamma: vec![0.0; dg], z: vec![0.0; dz], p: vec![0.0; dp] }
    }

    pub fn to_monolithic(&self) -> Vec<f64> {
        [&self.sigma, &self.u, &self.gamma, &self.z, &self.p].iter().flat_map(|v| v.iter().copied()).collect()
    }

    pub fn from_monolithic(spaces: &MixedSpaces, time: f64, x: &[f64]) -> Self {
        let o = spaces.offsets();
        DiscreteState {
            time,
            sigma: x[o[0]..o[1]].to_vec(),
            u: x[o[1]..o[2]].to_vec(),
            gamma: x[o[2]..o[3]].to_vec(),
            z: x[o[3]..o[4]].to_vec(),
            p: x[o[4]..o[5]].to_vec(),
        }
    }
}

/// Assembles the symmetric monolithic matrix for a `θΔt` weighting of the
/// Darcy terms.
pub fn compose_monolithic(spaces: &MixedSpaces, blocks: &BlockSystem, theta_dt: f64) -> CsrMatrix {
    let o = spaces.offsets();
    let n = o[5];
    let nnz = blocks.a_ss.nnz()
        + 2 * (blocks.b_su.nnz() + blocks.b_sg.nnz() + blocks.a_sp.nnz() + blocks.b_zp.nnz())
        + blocks.m_z.nnz()
        + blocks.m_pp.nnz();
    let mut t = TripletBuilder::with_capacity(n, n, nnz);
    t.add_block(o[0], o[0], &blocks.a_ss, 1.0);
    t.add_block(o[0], o[1], &blocks.b_su, 1.0);
    t.add_block_transposed(o[1], o[0], &blocks.b_su, 1.0);
    t.add_block(o[0], o[2], &blocks.b_sg, 1.0);
    t.add_block_transposed(o[2], o[0], &blocks.b_sg, 1.0);
    t.add_block(o[0], o[4], &blocks.a_sp, 1.0);
    t.add_block_transposed(o[4], o[0], &blocks.a_sp, 1.0);
    t.add_block(o[3], o[3], &blocks.m_z, -theta_dt);
    t.add_block(o[3], o[4], &blocks.b_zp, -theta_dt);
    t.add_block_transposed(o[4], o[3], &blocks.b_zp, -theta_dt);
    t.add_block(o[4], o[4], &blocks.m_pp, 1.0);
    t.build()
}

/// Factored system for one step size.
#[derive(Debug)]
struct SteppingMatrix {
    theta_dt: f64,
    constrained: CsrMatrix,
    lifted: Vec<(usize, usize, f64)>,
    lu: DirectSolver,
}

impl SteppingMatrix {
    fn new(spaces: &MixedSpaces, blocks: &BlockSystem, essential: &[usize], theta_dt: f64) -> Result<Self, SolverError> {
        let full = compose_monolithic(spaces, blocks, theta_dt);
        let (constrained, lifted) = full.constrain_symmetric(essential);
        let lu = DirectSolver::factorize(&constrained)?;
        Ok(SteppingMatrix { theta_dt, constrained, lifted, lu })
    }
}

#[derive(Debug)]
struct Transposed {
    b_su: CsrMatrix,
    b_sg: CsrMatrix,
    a_sp: CsrMatrix,
    b_zp: CsrMatrix,
}

/// Time stepper for one problem on one set of spaces.
pub struct BiotSolver<'a> {
    spaces: &'a MixedSpaces,
    problem: &'a dyn BiotProblem,
    params: MaterialParams,
    partition: BoundaryPartition,
    blocks: BlockSystem,
    transposed: Transposed,
    essential: Vec<usize>,
    scheme: TimeScheme,
    dt: f64,
    main: SteppingMatrix,
}

impl std::fmt::Debug for BiotSolver<'_> {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("BiotSolver")
            .field("params", &self.params)
            .field("dofs", &self.spaces.total_dim())
            .field("dt", &self.dt)
            .field("scheme", &self.scheme)
            .finish_non_exhaustive()
    }
}

impl<'a> BiotSolver<'a> {
    pub fn new(spaces: &'a MixedSpaces, problem: &'a dyn BiotProblem, dt: f64, scheme: TimeScheme) -> Result<Self, BiotError> {
        let params = problem.params();
        params.validate()?;
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(BiotError::TimeGrid(format!("step {dt}")));
        }
        let partition = problem.boundary(spaces.mesh());
        partition.validate(spaces.mesh())?;
        let blocks = assemble_blocks(spaces, &params);
        let ess = EssentialDofs::new(spaces, &partition);
        let o = spaces.offsets();
        let essential: Vec<usize> =
            ess.sigma.iter().map(|d| o[0] + d).chain(ess.z.iter().map(|d| o[3] + d)).collect();
        let theta = if scheme == TimeScheme::CrankNicolson { 0.5 } else { 1.0 };
        let main = SteppingMatrix::new(spaces, &blocks, &essential, theta * dt)?;
        let transposed = Transposed {
            b_su: blocks.b_su.transpose(),
            b_sg: blocks.b_sg.transpose(),
            a_sp: blocks.a_sp.transpose(),
            b_zp: blocks.b_zp.transpose(),
        };
        Ok(BiotSolver { spaces, problem, params, partition, blocks, transposed, essential, scheme, dt, main })
    }

    pub fn spaces(&self) -> &MixedSpaces {
        self.spaces
    }
    pub fn blocks(&self) -> &BlockSystem {
        &self.blocks
    }
    pub fn params(&self) -> &MaterialParams {
        &self.params
    }
    pub fn dt(&self) -> f64 {
        self.dt
    }

    /// The constrained monolithic matrix used for every step.
    pub fn matrix(&self) -> &CsrMatrix {
        &self.main.constrained
    }

    /// Global indices of essentially constrained unknowns.
    pub fn essential_dofs(&self) -> &[usize] {
        &self.essential
    }

    /// Initial data: canonical interpolation for stress and flux, L²
    /// projection for displacement, rotation and pressure.
    pub fn initial_state(&self, t0: f64) -> Result<DiscreteState, BiotError> {
        let s = self.spaces;
        let pb = self.problem;
        let sigma = s.sigma.interpolate(|x, out| {
            let v = pb.initial(x).sigma;
            out.copy_from_slice(&[v[0][0], v[0][1], v[1][0], v[1][1]]);
        });
        let z = s.z.interpolate(|x, out| out.copy_from_slice(&pb.initial(x).z));
        let u = s.u.l2_project(6, |x, out| out.copy_from_slice(&pb.initial(x).u))?;
        let gamma = s.gamma.l2_project(6, |x, out| out[0] = pb.initial(x).gamma)?;
        let p = s.p.l2_project(6, |x, out| out[0] = pb.initial(x).p)?;
        Ok(DiscreteState { time: t0, sigma, u, gamma, z, p })
    }

    fn loads(&self, t: f64) -> (LoadTerms, Vec<(usize, f64)>) {
        let loads = assemble_loads(self.spaces, self.problem, &self.partition, t);
        let (es, ez) = essential_values(self.spaces, self.problem, &self.partition, t);
        let o = self.spaces.offsets();
        let values = es.into_iter().map(|(d, v)| (o[0] + d, v)).chain(ez.into_iter().map(|(d, v)| (o[3] + d, v))).collect();
        (loads, values)
    }

    /// Residual of the algebraic rows at a state, Darcy row unscaled.
    fn algebraic_residual(&self, state: &DiscreteState, loads: &LoadTerms) -> Vec<f64> {
        let b = &self.blocks;
        let o = self.spaces.offsets();
        let mut r = vec![0.0; o[5]];
        {
            let rs = &mut r[o[0]..o[1]];
            b.a_ss.matvec_add(&state.sigma, 1.0, rs);
            b.b_su.matvec_add(&state.u, 1.0, rs);
            b.b_sg.matvec_add(&state.gamma, 1.0, rs);
            b.a_sp.matvec_add(&state.p, 1.0, rs);
            rs.iter_mut().zip(&loads.sigma_boundary).for_each(|(x, y)| *x -= y);
        }
        self.transposed.b_su.matvec_into(&state.sigma, &mut r[o[1]..o[2]]);
        r[o[1]..o[2]].iter_mut().zip(&loads.force).for_each(|(x, y)| *x -= y);
        self.transposed.b_sg.matvec_into(&state.sigma, &mut r[o[2]..o[3]]);
        {
            let rz = &mut r[o[3]..o[4]];
            b.m_z.matvec_add(&state.z, 1.0, rz);
            b.b_zp.matvec_add(&state.p, 1.0, rz);
            rz.iter_mut().zip(&loads.z_boundary).for_each(|(x, y)| *x -= y);
        }
        r
    }

    /// Right-hand side of one step from `prev` to time `t` with step `dt`.
    fn rhs(&self, m: &SteppingMatrix, prev: &DiscreteState, prev_loads: Option<&LoadTerms>, t: f64, dt: f64) -> Vec<f64> {
        let (loads, ess) = self.loads(t);
        let o = self.spaces.offsets();
        let b = &self.blocks;
        let theta = m.theta_dt / dt;
        let mut rhs = vec![0.0; o[5]];
        rhs[o[0]..o[1]].copy_from_slice(&loads.sigma_boundary);
        rhs[o[1]..o[2]].copy_from_slice(&loads.force);
        for (x, y) in rhs[o[3]..o[4]].iter_mut().zip(&loads.z_boundary) {
            *x = -m.theta_dt * y;
        }
        {
            let rp = &mut rhs[o[4]..o[5]];
            for (x, y) in rp.iter_mut().zip(&loads.source) {
                *x = theta * dt * y;
            }
            self.transposed.a_sp.matvec_add(&prev.sigma, 1.0, rp);
            b.m_pp.matvec_add(&prev.p, 1.0, rp);
        }
        if let Some(pl) = prev_loads {
            // trapezoidal weighting of the Darcy and source terms, and the
            // algebraic rows averaged between the two levels
            let rp = &mut rhs[o[4]..o[5]];
            for (x, y) in rp.iter_mut().zip(&pl.source) {
                *x += (1.0 - theta) * dt * y;
            }
            self.transposed.b_zp.matvec_add(&prev.z, (1.0 - theta) * dt, rp);
            let r = self.algebraic_residual(prev, pl);
            for i in o[0]..o[3] {
                rhs[i] -= r[i];
            }
            for i in o[3]..o[4] {
                rhs[i] += m.theta_dt * r[i];
            }
        }
        let mut fixed = vec![f64::NAN; o[5]];
        for &(d, v) in &ess {
            fixed[d] = v;
        }
        for &(row, dof, val) in &m.lifted {
            rhs[row] -= val * fixed[dof];
        }
        for &(d, v) in &ess {
            rhs[d] = v;
        }
        rhs
    }

    fn advance(&self, m: &SteppingMatrix, prev: &DiscreteState, prev_loads: Option<&LoadTerms>, t: f64, dt: f64) -> DiscreteState {
        let mut x = self.rhs(m, prev, prev_loads, t, dt);
        m.lu.solve_in_place(&mut x);
        DiscreteState::from_monolithic(self.spaces, t, &x)
    }

    /// One backward Euler step to `prev.time + dt`.
    pub fn step(&self, prev: &DiscreteState) -> Result<DiscreteState, BiotError> {
        if self.scheme != TimeScheme::BackwardEuler {
            return Err(BiotError::TimeGrid("single steps are only available for backward Euler".into()));
        }
        Ok(self.advance(&self.main, prev, None, prev.time + self.dt, self.dt))
    }

    /// Relative residual `‖Kx − b‖/‖b‖` of the constrained backward Euler
    /// system for the step `prev → next`.
    pub fn step_residual(&self, prev: &DiscreteState, next: &DiscreteState) -> f64 {
        let b = self.rhs(&self.main, prev, None, next.time, self.dt);
        relative_residual(&self.main.constrained, &next.to_monolithic(), &b)
    }

    /// Runs from `initial` over `grid`, calling `observer` on every new level.
    /// `grid.dt()` must equal the step the solver was built with.
    pub fn run(
        &self,
        initial: DiscreteState,
        grid: &TimeGrid,
        mut observer: impl FnMut(&DiscreteState),
    ) -> Result<DiscreteState, BiotError> {
        if (grid.dt() - self.dt).abs() > 1e-12 * self.dt.max(1.0) {
            return Err(BiotError::TimeGrid(format!("grid step {} differs from solver step {}", grid.dt(), self.dt)));
        }
        match self.scheme {
            TimeScheme::BackwardEuler => {
                let mut state = initial;
                for i in 1..=grid.steps {
                    state = self.advance(&self.main, &state, None, grid.time(i), self.dt);
                    observer(&state);
                }
                Ok(state)
            }
            TimeScheme::CrankNicolson => self.run_trapezoidal(initial, grid, observer),
        }
    }

    fn run_trapezoidal(
        &self,
        initial: DiscreteState,
        grid: &TimeGrid,
        mut observer: impl FnMut(&DiscreteState),
    ) -> Result<DiscreteState, BiotError> {
        // a tiny implicit step makes the algebraic equations consistent
        let dt0 = self.dt * self.dt;
        let start = SteppingMatrix::new(self.spaces, &self.blocks, &self.essential, dt0)?;
        let mut state = self.advance(&start, &initial, None, grid.t0 + dt0, dt0);
        observer(&state);
        let dt = (grid.t_final - state.time) / grid.steps as f64;
        let m = if dt == self.dt {
            None
        } else {
            Some(SteppingMatrix::new(self.spaces, &self.blocks, &self.essential, 0.5 * dt)?)
        };
        let m = m.as_ref().unwrap_or(&self.main);
        let t1 = state.time;
        let mut prev_loads = self.loads(t1).0;
        for i in 1..=grid.steps {
            let t = if i == grid.steps { grid.t_final } else { t1 + i as f64 * dt };
            state = self.advance(m, &state, Some(&prev_loads), t, dt);
            prev_loads = self.loads(t).0;
            observer(&state);
        }
        Ok(state)
    }

    /// `σᵀAσ + 2σᵀA_p p + pᵀM_p p`, the stored energy of a state.
    pub fn energy(&self, state: &DiscreteState) -> f64 {
        let b = &self.blocks;
        b.a_ss.bilinear(&state.sigma, &state.sigma)
            + 2.0 * b.a_sp.bilinear(&state.sigma, &state.p)
            + b.m_pp.bilinear(&state.p, &state.p)
    }
}
