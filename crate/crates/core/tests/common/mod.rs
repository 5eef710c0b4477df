//! Independent oracles shared by the integration tests and the acceptance
//! suite.

#![allow(dead_code)]

use std::sync::Arc;

use biot_core::assembly::elliptic_projection_sigma;
use biot_core::quadrature::quadrature;
use biot_core::verification::ManufacturedCase;
use biot_core::{
    BiotProblem, BiotSolver, BoundaryPartition, CsrMatrix, Diagonal, DiscreteState, ElementPair, FieldValues, FunctionSpace,
    MaterialParams, Mesh, MixedSpaces, TimeScheme, TripletBuilder,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn spaces(n: usize, pair: ElementPair) -> MixedSpaces {
    let mesh = Arc::new(Mesh::structured(n, Diagonal::Forward).unwrap());
    MixedSpaces::new(mesh, pair).unwrap()
}

/// Cubic polynomial fields with random coefficients, one polynomial per
/// component. Component `2r + c` of a matrix field is entry `(r, c)`.
#[derive(Debug, Clone)]
pub struct PolyField {
    comps: Vec<[f64; 10]>,
}

const MONOMIALS: [(i32, i32); 10] = [(0, 0), (1, 0), (0, 1), (2, 0), (1, 1), (0, 2), (3, 0), (2, 1), (1, 2), (0, 3)];

impl PolyField {
    pub fn random(rng: &mut impl Rng, ncomp: usize) -> Self {
        let comps = (0..ncomp).map(|_| std::array::from_fn(|_| rng.random_range(-1.0..1.0))).collect();
        PolyField { comps }
    }

    /// Coefficients in the order 1, x, y, x², xy, y², x³, x²y, xy², y³.
    pub fn from_coefficients(comps: Vec<[f64; 10]>) -> Self {
        PolyField { comps }
    }

    pub fn value(&self, c: usize, x: [f64; 2]) -> f64 {
        MONOMIALS.iter().zip(&self.comps[c]).map(|(&(i, j), a)| a * x[0].powi(i) * x[1].powi(j)).sum()
    }

    pub fn grad(&self, c: usize, x: [f64; 2]) -> [f64; 2] {
        let mut g = [0.0; 2];
        for (&(i, j), a) in MONOMIALS.iter().zip(&self.comps[c]) {
            if i > 0 {
                g[0] += a * f64::from(i) * x[0].powi(i - 1) * x[1].powi(j);
            }
            if j > 0 {
                g[1] += a * f64::from(j) * x[0].powi(i) * x[1].powi(j - 1);
            }
        }
        g
    }

    pub fn vector(&self, x: [f64; 2]) -> [f64; 2] {
        [self.value(0, x), self.value(1, x)]
    }

    pub fn div_vector(&self, x: [f64; 2]) -> f64 {
        self.grad(0, x)[0] + self.grad(1, x)[1]
    }

    pub fn matrix(&self, x: [f64; 2]) -> [[f64; 2]; 2] {
        [[self.value(0, x), self.value(1, x)], [self.value(2, x), self.value(3, x)]]
    }

    pub fn div_matrix(&self, x: [f64; 2]) -> [f64; 2] {
        [self.grad(0, x)[0] + self.grad(1, x)[1], self.grad(2, x)[0] + self.grad(3, x)[1]]
    }
}

/// Largest pointwise difference between two discrete fields of the same
/// shape, sampled at the degree-4 quadrature points of every cell. The
/// closures evaluate a field on cell `c` at reference point `xhat`.
pub fn max_cell_difference(
    mesh: &Mesh,
    mut a: impl FnMut(usize, [f64; 2], &mut [f64]),
    mut b: impl FnMut(usize, [f64; 2], &mut [f64]),
    size: usize,
) -> f64 {
    let rule = quadrature(4).unwrap();
    let (mut va, mut vb) = (vec![0.0; size], vec![0.0; size]);
    let mut worst = 0.0f64;
    for c in 0..mesh.num_cells() {
        for &p in &rule.points {
            a(c, p, &mut va);
            b(c, p, &mut vb);
            for k in 0..size {
                worst = worst.max((va[k] - vb[k]).abs());
            }
        }
    }
    worst
}

/// `max |div I_h^W w − P_h^Q div w|` for a polynomial vector field.
pub fn flux_commuting_defect(spaces: &MixedSpaces, w: &PolyField) -> f64 {
    let interp = spaces.z.interpolate(|x, out| out.copy_from_slice(&w.vector(x)));
    let proj = spaces.p.l2_project(6, |x, out| out[0] = w.div_vector(x)).unwrap();
    max_cell_difference(
        spaces.mesh(),
        |c, p, out| spaces.z.evaluate_div(&interp, c, p, out),
        |c, p, out| spaces.p.evaluate(&proj, c, p, out),
        1,
    )
}

/// `max |div I_h^Σ σ − P_h^V div σ|` for a polynomial matrix field.
pub fn stress_commuting_defect(spaces: &MixedSpaces, sigma: &PolyField) -> f64 {
    let proj_sigma = elliptic_projection_sigma(spaces, |x| sigma.matrix(x), |x| sigma.div_matrix(x)).unwrap();
    let proj_div = spaces.u.l2_project(6, |x, out| out.copy_from_slice(&sigma.div_matrix(x))).unwrap();
    max_cell_difference(
        spaces.mesh(),
        |c, p, out| spaces.sigma.evaluate_div(&proj_sigma, c, p, out),
        |c, p, out| spaces.u.evaluate(&proj_div, c, p, out),
        2,
    )
}

/// `max_η |(I_h^Σ σ, η) − (σ, η)|` over the rotation basis, with the skew
/// matrix `η = [[0, φ], [−φ, 0]]`. Both sides are integrated here by
/// quadrature on the evaluated fields.
pub fn weak_symmetry_defect(spaces: &MixedSpaces, sigma: &PolyField) -> f64 {
    let proj = elliptic_projection_sigma(spaces, |x| sigma.matrix(x), |x| sigma.div_matrix(x)).unwrap();
    let mesh = spaces.mesh();
    let rule = quadrature(6).unwrap();
    let gamma = &spaces.gamma;
    let mut moments = vec![0.0; gamma.dim()];
    let mut s = [0.0; 4];
    for c in 0..mesh.num_cells() {
        let map = gamma.map(c);
        let jac = map.det.abs();
        let (dofs, signs) = gamma.cell_dofs(c);
        for (&p, &w) in rule.points.iter().zip(&rule.weights) {
            spaces.sigma.evaluate(&proj, c, p, &mut s);
            let x = map.to_physical(p);
            let exact = sigma.matrix(x);
            let skew_diff = (s[1] - s[2]) - (exact[0][1] - exact[1][0]);
            let basis = gamma.element().eval_basis(p).unwrap();
            for i in 0..dofs.len() {
                moments[dofs[i]] += w * jac * signs[i] * basis[i][0] * skew_diff;
            }
        }
    }
    moments.iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Evaluates a discrete field at a physical point.
pub fn eval_at(space: &FunctionSpace, coeffs: &[f64], x: [f64; 2]) -> Vec<f64> {
    let mesh = space.mesh();
    let c = mesh.locate(x).expect("point inside the mesh");
    let mut out = vec![0.0; space.value_size()];
    space.evaluate(coeffs, c, space.map(c).to_reference(x), &mut out);
    out
}

/// Sixth-order central difference of a scalar function of one variable.
pub fn fd6(f: impl Fn(f64) -> f64, s: f64, h: f64) -> f64 {
    let c = [(1.0, 3.0 / 4.0), (2.0, -3.0 / 20.0), (3.0, 1.0 / 60.0)];
    c.iter().map(|&(k, w)| w * (f(s + k * h) - f(s - k * h))).sum::<f64>() / h
}

const FD_STEP: f64 = 5e-3;

/// Partial derivative `∂f/∂x_dir` by central differences.
pub fn fd_partial(f: impl Fn([f64; 2]) -> f64, x: [f64; 2], dir: usize) -> f64 {
    fd6(
        |s| {
            let mut y = x;
            y[dir] = s;
            f(y)
        },
        x[dir],
        FD_STEP,
    )
}

/// Residuals of the four-field equations for the manufactured case at one
/// space-time point. Derivatives of the prescribed displacement and pressure
/// are taken by finite differences; the stress law is written out directly.
/// Returns the largest absolute residual.
pub fn manufactured_residual(case: &ManufacturedCase, t: f64, x: [f64; 2]) -> f64 {
    let MaterialParams { mu, lambda, alpha, s0, kappa } = case.params;
    let u = |k: usize, t: f64| move |y: [f64; 2]| case.displacement(t, y)[k];
    let grad_u = |t: f64, y: [f64; 2]| -> [[f64; 2]; 2] {
        std::array::from_fn(|k| std::array::from_fn(|d| fd_partial(u(k, t), y, d)))
    };
    let g = grad_u(t, x);
    let div_u = g[0][0] + g[1][1];
    let p = case.pressure(t, x);
    let oracle_sigma = [
        [2.0 * mu * g[0][0] + lambda * div_u - alpha * p, mu * (g[0][1] + g[1][0])],
        [mu * (g[0][1] + g[1][0]), 2.0 * mu * g[1][1] + lambda * div_u - alpha * p],
    ];
    let sigma = case.stress(t, x);
    let mut worst = 0.0f64;
    for r in 0..2 {
        for c in 0..2 {
            worst = worst.max((sigma[r][c] - oracle_sigma[r][c]).abs());
        }
    }
    worst = worst.max((case.rotation(t, x) - 0.5 * (g[0][1] - g[1][0])).abs());
    // −div σ = f
    let f = case.body_force(t, x);
    for r in 0..2 {
        let div = fd_partial(|y| case.stress(t, y)[r][0], x, 0) + fd_partial(|y| case.stress(t, y)[r][1], x, 1);
        worst = worst.max((div + f[r]).abs());
    }
    // κ⁻¹ z = ∇p
    let z = case.flux(t, x);
    for d in 0..2 {
        worst = worst.max((z[d] / kappa - fd_partial(|y| case.pressure(t, y), x, d)).abs());
    }
    // s₀ ∂ₜp + α ∂ₜ div u − div z = g
    let p_t = fd6(|s| case.pressure(s, x), t, FD_STEP);
    let divu_t = fd6(
        |s| {
            let g = grad_u(s, x);
            g[0][0] + g[1][1]
        },
        t,
        FD_STEP,
    );
    let div_z = fd_partial(|y| case.flux(t, y)[0], x, 0) + fd_partial(|y| case.flux(t, y)[1], x, 1);
    worst.max((s0 * p_t + alpha * divu_t - div_z - case.source(t, x)).abs())
}

/// Zero loads and boundary data with a prescribed initial state.
pub struct FreeDecay<F: Fn([f64; 2]) -> FieldValues> {
    pub params: MaterialParams,
    pub initial: F,
    /// Sides with traction and flux conditions; the rest carry displacement
    /// and pressure conditions.
    pub free_sides: Vec<biot_core::Side>,
}

impl<F: Fn([f64; 2]) -> FieldValues> BiotProblem for FreeDecay<F> {
    fn params(&self) -> MaterialParams {
        self.params
    }
    fn boundary(&self, mesh: &Mesh) -> BoundaryPartition {
        BoundaryPartition::by_sides(mesh, &self.free_sides, &self.free_sides)
    }
    fn body_force(&self, _t: f64, _x: [f64; 2]) -> [f64; 2] {
        [0.0; 2]
    }
    fn source(&self, _t: f64, _x: [f64; 2]) -> f64 {
        0.0
    }
    fn initial(&self, x: [f64; 2]) -> FieldValues {
        (self.initial)(x)
    }
}

pub fn zero_fields(_x: [f64; 2]) -> FieldValues {
    FieldValues::default()
}

pub fn max_abs_state(state: &DiscreteState) -> f64 {
    state.to_monolithic().iter().fold(0.0, |m, v| m.max(v.abs()))
}

/// Runs `steps` backward Euler steps with zero data and returns the largest
/// coefficient seen over all levels.
pub fn zero_data_run(pair: ElementPair, n: usize, s0: f64, steps: usize) -> f64 {
    let sp = spaces(n, pair);
    let problem = FreeDecay {
        params: MaterialParams { mu: 10.0, lambda: 10.0, s0, ..Default::default() },
        initial: zero_fields,
        free_sides: vec![biot_core::Side::Bottom, biot_core::Side::Left],
    };
    let solver = BiotSolver::new(&sp, &problem, 0.1, TimeScheme::BackwardEuler).unwrap();
    let mut state = solver.initial_state(0.0).unwrap();
    let mut worst = max_abs_state(&state);
    for _ in 0..steps {
        state = solver.step(&state).unwrap();
        worst = worst.max(max_abs_state(&state));
    }
    worst
}

/// Energies `‖σ + αpI‖²_A + s₀‖p‖²` along a zero-load run from a smooth
/// nonzero initial state.
pub fn free_decay_energies(pair: ElementPair, n: usize, s0: f64, steps: usize) -> Vec<f64> {
    let sp = spaces(n, pair);
    let params = MaterialParams { mu: 10.0, lambda: 10.0, s0, ..Default::default() };
    let case = ManufacturedCase::new(params);
    let problem = FreeDecay {
        params,
        initial: move |x| biot_core::ExactSolution::fields(&case, 0.3, x),
        free_sides: vec![biot_core::Side::Right],
    };
    let solver = BiotSolver::new(&sp, &problem, 0.05, TimeScheme::BackwardEuler).unwrap();
    let mut state = solver.initial_state(0.0).unwrap();
    let mut energies = vec![solver.energy(&state)];
    for _ in 0..steps {
        state = solver.step(&state).unwrap();
        energies.push(solver.energy(&state));
    }
    energies
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Relative residuals of the five block rows of one backward Euler step
/// `prev → next`, rebuilt from the assembled blocks and loads. Rows listed in
/// `skip` (monolithic indices of essential dofs) are left out. Each residual
/// is scaled by the largest term of its row.
pub fn backward_euler_residuals(
    sp: &MixedSpaces,
    params: &MaterialParams,
    problem: &dyn BiotProblem,
    prev: &DiscreteState,
    next: &DiscreteState,
    skip: &[usize],
) -> [f64; 5] {
    let mut rows = algebraic_rows(sp, params, problem, next);
    let blocks = biot_core::assembly::assemble_blocks(sp, params);
    let partition = problem.boundary(sp.mesh());
    let loads = biot_core::assembly::assemble_loads(sp, problem, &partition, next.time);
    let dt = next.time - prev.time;
    let ds: Vec<f64> = next.sigma.iter().zip(&prev.sigma).map(|(a, b)| (a - b) / dt).collect();
    let dp: Vec<f64> = next.p.iter().zip(&prev.p).map(|(a, b)| (a - b) / dt).collect();
    let terms = vec![
        blocks.a_sp.transpose().matvec(&ds),
        blocks.m_pp.matvec(&dp),
        blocks.b_zp.transpose().matvec(&next.z).iter().map(|v| -v).collect(),
        loads.source.iter().map(|v| -v).collect(),
    ];
    rows.push(terms);
    let o = sp.offsets();
    let mut out = [0.0; 5];
    for (k, terms) in rows.iter().enumerate() {
        let len = terms[0].len();
        let keep: Vec<usize> = (0..len).filter(|i| !skip.contains(&(o[k] + i))).collect();
        let r: Vec<f64> = keep.iter().map(|&i| terms.iter().map(|t| t[i]).sum()).collect();
        let scale = terms.iter().map(|t| norm(&keep.iter().map(|&i| t[i]).collect::<Vec<_>>())).fold(0.0, f64::max);
        out[k] = if scale > 0.0 { norm(&r) / scale } else { norm(&r) };
    }
    out
}

/// Terms of the four algebraic block rows (stress, displacement, rotation,
/// flux) at one state; each row's residual is the sum of its terms.
pub fn algebraic_rows(sp: &MixedSpaces, params: &MaterialParams, problem: &dyn BiotProblem, s: &DiscreteState) -> Vec<Vec<Vec<f64>>> {
    let b = biot_core::assembly::assemble_blocks(sp, params);
    let partition = problem.boundary(sp.mesh());
    let loads = biot_core::assembly::assemble_loads(sp, problem, &partition, s.time);
    let neg = |v: &[f64]| v.iter().map(|x| -x).collect::<Vec<f64>>();
    vec![
        vec![b.a_ss.matvec(&s.sigma), b.b_su.matvec(&s.u), b.b_sg.matvec(&s.gamma), b.a_sp.matvec(&s.p), neg(&loads.sigma_boundary)],
        vec![b.b_su.transpose().matvec(&s.sigma), neg(&loads.force)],
        // the rows of the stress enter the skew moment with opposite signs,
        // so each contributes its own term
        {
            let bs = sp.sigma.base_dim();
            let (first, second) = split_rows(&s.sigma, bs);
            vec![b.b_sg.transpose().matvec(&first), b.b_sg.transpose().matvec(&second)]
        },
        vec![b.m_z.matvec(&s.z), b.b_zp.matvec(&s.p), neg(&loads.z_boundary)],
    ]
}

fn split_rows(sigma: &[f64], bs: usize) -> (Vec<f64>, Vec<f64>) {
    let mut first = sigma.to_vec();
    let mut second = sigma.to_vec();
    first[bs..].fill(0.0);
    second[..bs].fill(0.0);
    (first, second)
}

/// Relative residual of each algebraic row at one state.
pub fn algebraic_residuals(sp: &MixedSpaces, params: &MaterialParams, problem: &dyn BiotProblem, s: &DiscreteState) -> [f64; 4] {
    let rows = algebraic_rows(sp, params, problem, s);
    let mut out = [0.0; 4];
    for (k, terms) in rows.iter().enumerate() {
        let r: Vec<f64> = (0..terms[0].len()).map(|i| terms.iter().map(|t| t[i]).sum()).collect();
        let scale = terms.iter().map(|t| norm(t)).fold(0.0, f64::max);
        out[k] = if scale > 0.0 { norm(&r) / scale } else { norm(&r) };
    }
    out
}

/// `α(Aσ, qI)` and `(div z, q)` assembled directly from the evaluated
/// bases, cell by cell.
pub fn oracle_transposed_blocks(sp: &MixedSpaces, params: &MaterialParams) -> (CsrMatrix, CsrMatrix) {
    let mesh = sp.mesh();
    let rule = quadrature(4).unwrap();
    let mut t_ps = TripletBuilder::new(sp.p.dim(), sp.sigma.dim());
    let mut d_zq = TripletBuilder::new(sp.p.dim(), sp.z.dim());
    let bs = sp.sigma.base_dim();
    for c in 0..mesh.num_cells() {
        let map = sp.sigma.map(c);
        let jac = map.det.abs();
        let (sd, ss) = sp.sigma.cell_dofs(c);
        let (zd, zs) = sp.z.cell_dofs(c);
        let (pd, ps) = sp.p.cell_dofs(c);
        for (&x, &w) in rule.points.iter().zip(&rule.weights) {
            let sv = sp.sigma.element().eval_basis(x).unwrap();
            let zdiv = sp.z.element().eval_divergence(x);
            let pv = sp.p.element().eval_basis(x).unwrap();
            for (j, &pj) in pd.iter().enumerate() {
                let q = ps[j] * pv[j][0];
                for (i, &si) in sd.iter().enumerate() {
                    let v = map.piola(sv[i]);
                    for row in 0..2 {
                        let mut tau = [[0.0; 2]; 2];
                        tau[row] = [ss[i] * v[0], ss[i] * v[1]];
                        let a = params.apply_compliance(tau);
                        t_ps.push(pj, row * bs + si, w * jac * params.alpha * (a[0][0] + a[1][1]) * q);
                    }
                }
                for (i, &zi) in zd.iter().enumerate() {
                    d_zq.push(pj, zi, w * jac * zs[i] * map.piola_div(zdiv[i]) * q);
                }
            }
        }
    }
    (t_ps.build(), d_zq.build())
}

/// Largest difference between the assembled transposed blocks and
/// [`oracle_transposed_blocks`].
pub fn transposition_defect(pair: ElementPair, params: &MaterialParams) -> f64 {
    let sp = spaces(3, pair);
    let blocks = biot_core::assembly::assemble_blocks(&sp, params);
    let (t_ps, d_zq) = oracle_transposed_blocks(&sp, params);
    blocks.a_sp.transpose().max_abs_diff(&t_ps).max(blocks.b_zp.transpose().max_abs_diff(&d_zq))
}
