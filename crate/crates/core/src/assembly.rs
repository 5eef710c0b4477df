//! Assembly of the mixed Biot blocks, time-dependent loads and boundary data.
//!
//! Unknowns are ordered `(σ, u, γ, z, p)`. The stress space is two copies of
//! an H(div) element, one per row; row `r` of a stress basis function `ψ` is
//! the vector `ψ` and the other row vanishes.

use std::sync::Arc;

use crate::element::{ElementKind, FeError};
use crate::mesh::{BoundaryPartition, Mesh};
use crate::problem::{BiotProblem, MaterialParams};
use crate::quadrature::{gauss_legendre, quadrature};
use crate::space::{FieldRole, FunctionSpace};
use crate::sparse::{CsrMatrix, DirectSolver, SolverError, TripletBuilder};

/// The two element families.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ElementPair {
    /// BDM1 stress, piecewise constant displacement and rotation, lowest
    /// order Raviart–Thomas flux, piecewise constant pressure.
    One,
    /// BDM1 stress, piecewise constant displacement, continuous linear
    /// rotation, next-to-lowest Raviart–Thomas flux, discontinuous linear
    /// pressure.
    Two,
}

impl ElementPair {
    pub fn from_index(i: u32) -> Option<Self> {
        match i {
            1 => Some(ElementPair::One),
            2 => Some(ElementPair::Two),
            _ => None,
        }
    }

    pub fn index(self) -> u32 {
        match self {
            ElementPair::One => 1,
            ElementPair::Two => 2,
        }
    }

    /// Element kinds for `(σ rows, u, γ, z, p)`.
    pub fn kinds(self) -> [ElementKind; 5] {
        match self {
            ElementPair::One => {
                [ElementKind::Bdm1, ElementKind::Dg0, ElementKind::Dg0, ElementKind::RtLo, ElementKind::Dg0]
            }
            ElementPair::Two => {
                [ElementKind::Bdm1, ElementKind::Dg0, ElementKind::Cg1, ElementKind::RtHi, ElementKind::Dg1]
            }
        }
    }
}

#[derive(Debug, Clone)]
pub struct MixedSpaces {
    pub pair: ElementPair,
    pub sigma: FunctionSpace,
    pub u: FunctionSpace,
    pub gamma: FunctionSpace,
    pub z: FunctionSpace,
    pub p: FunctionSpace,
}

impl MixedSpaces {
    pub fn new(mesh: Arc<Mesh>, pair: ElementPair) -> Result<Self, FeError> {
        let k = pair.kinds();
        Ok(MixedSpaces {
            pair,
            sigma: FunctionSpace::new(mesh.clone(), k[0], FieldRole::SigmaRow)?,
            u: FunctionSpace::new(mesh.clone(), k[1], FieldRole::Displacement)?,
            gamma: FunctionSpace::new(mesh.clone(), k[2], FieldRole::Rotation)?,
            z: FunctionSpace::new(mesh.clone(), k[3], FieldRole::Flux)?,
            p: FunctionSpace::new(mesh, k[4], FieldRole::Pressure)?,
        })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        self.sigma.mesh()
    }

    pub fn dims(&self) -> [usize; 5] {
        [self.sigma.dim(), self.u.dim(), self.gamma.dim(), self.z.dim(), self.p.dim()]
    }

    /// Block offsets into the monolithic vector; the last entry is the total.
    pub fn offsets(&self) -> [usize; 6] {
        let d = self.dims();
        let mut o = [0; 6];
        for i in 0..5 {
            o[i + 1] = o[i] + d[i];
        }
        o
    }

    pub fn total_dim(&self) -> usize {
        self.offsets()[5]
    }
}

/// Time-independent matrix blocks.
#[derive(Debug, Clone)]
pub struct BlockSystem {
    /// `(Aσ, τ)`.
    pub a_ss: CsrMatrix,
    /// `(u, div τ)`, rows σ, columns u.
    pub b_su: CsrMatrix,
    /// `(γ, τ)`, rows σ, columns γ.
    pub b_sg: CsrMatrix,
    /// `(A(αpI), τ)`, rows σ, columns p.
    pub a_sp: CsrMatrix,
    /// `(κ⁻¹ z, w)`.
    pub m_z: CsrMatrix,
    /// `(p, div w)`, rows z, columns p.
    pub b_zp: CsrMatrix,
    /// `(s₀ p, q) + (A(αpI), αqI)`.
    pub m_pp: CsrMatrix,
}

fn dot(a: [f64; 2], b: [f64; 2]) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

/// Assembles all blocks with an exact (degree 4) rule on affine cells.
pub fn assemble_blocks(spaces: &MixedSpaces, params: &MaterialParams) -> BlockSystem {
    let mesh = spaces.mesh();
    let rule = quadrature(4).expect("degree 4");
    let tab_s = spaces.sigma.element().tabulate(&rule.points);
    let tab_g = spaces.gamma.element().tabulate(&rule.points);
    let tab_z = spaces.z.element().tabulate(&rule.points);
    let tab_p = spaces.p.element().tabulate(&rule.points);
    let [ds, du, dg, dz, dp] = spaces.dims();
    let (bs, bu) = (spaces.sigma.base_dim(), spaces.u.base_dim());
    let ls = spaces.sigma.local_dim();
    let lg = spaces.gamma.local_dim();
    let lz = spaces.z.local_dim();
    let lp = spaces.p.local_dim();
    let nc = mesh.num_cells();

    let mut t_ss = TripletBuilder::with_capacity(ds, ds, nc * 4 * ls * ls);
    let mut t_su = TripletBuilder::with_capacity(ds, du, nc * 2 * ls);
    let mut t_sg = TripletBuilder::with_capacity(ds, dg, nc * 2 * ls * lg);
    let mut t_sp = TripletBuilder::with_capacity(ds, dp, nc * 2 * ls * lp);
    let mut t_z = TripletBuilder::with_capacity(dz, dz, nc * lz * lz);
    let mut t_zp = TripletBuilder::with_capacity(dz, dp, nc * lz * lp);
    let mut t_pp = TripletBuilder::with_capacity(dp, dp, nc * lp * lp);

    let s = 0.5 / params.mu;
    let c = params.trace_coefficient();
    let a_trace = params.alpha / (2.0 * params.mu + 2.0 * params.lambda);
    let pp_coeff = params.s0 + params.alpha * params.alpha / (params.mu + params.lambda);
    let kinv = 1.0 / params.kappa;

    let (mut vs, mut divs) = (Vec::new(), Vec::new());
    let (mut vg, mut dvg) = (Vec::new(), Vec::new());
    let (mut vz, mut dvz) = (Vec::new(), Vec::new());
    let (mut vp, mut dvp) = (Vec::new(), Vec::new());
    let mut comp00 = vec![0.0; ls * ls];
    let mut comp11 = vec![0.0; ls * ls];
    let mut loc_sst = vec![0.0; ls * ls];
    let mut loc_su = vec![0.0; ls];
    let mut loc_sg = vec![0.0; 2 * ls * lg];
    let mut loc_sp = vec![0.0; 2 * ls * lp];
    let mut loc_z = vec![0.0; lz * lz];
    let mut loc_zp = vec![0.0; lz * lp];
    let mut loc_pp = vec![0.0; lp * lp];

    for cell in 0..nc {
        let jac = spaces.sigma.map(cell).det.abs();
        spaces.sigma.physical_values(cell, &tab_s, &mut vs, &mut divs);
        spaces.gamma.physical_values(cell, &tab_g, &mut vg, &mut dvg);
        spaces.z.physical_values(cell, &tab_z, &mut vz, &mut dvz);
        spaces.p.physical_values(cell, &tab_p, &mut vp, &mut dvp);
        for buf in [&mut comp00, &mut comp11, &mut loc_sst, &mut loc_su, &mut loc_sg, &mut loc_sp, &mut loc_z, &mut loc_zp, &mut loc_pp] {
            buf.iter_mut().for_each(|x| *x = 0.0);
        }
        for (q, &w) in rule.weights.iter().enumerate() {
            let w = w * jac;
            let ps = &vs[q * ls..(q + 1) * ls];
            let pd = &divs[q * ls..(q + 1) * ls];
            let pg = &vg[q * lg..(q + 1) * lg];
            let pz = &vz[q * lz..(q + 1) * lz];
            let pzd = &dvz[q * lz..(q + 1) * lz];
            let pp = &vp[q * lp..(q + 1) * lp];
            for i in 0..ls {
                for j in 0..ls {
                    // componentwise products give both φ:φ' and trφ trφ'
                    comp00[i * ls + j] += w * ps[i][0] * ps[j][0];
                    comp11[i * ls + j] += w * ps[i][1] * ps[j][1];
                    loc_sst[i * ls + j] += w * ps[i][0] * ps[j][1];
                }
                loc_su[i] += w * pd[i];
                for k in 0..lg {
                    // τ₁₂ − τ₂₁: row 0 contributes ψ[1], row 1 contributes −ψ[0]
                    loc_sg[i * lg + k] += w * pg[k][0] * ps[i][1];
                    loc_sg[(ls + i) * lg + k] -= w * pg[k][0] * ps[i][0];
                }
                for k in 0..lp {
                    loc_sp[i * lp + k] += w * pp[k][0] * ps[i][0];
                    loc_sp[(ls + i) * lp + k] += w * pp[k][0] * ps[i][1];
                }
            }
            for i in 0..lz {
                for j in 0..lz {
                    loc_z[i * lz + j] += w * dot(pz[i], pz[j]);
                }
                for k in 0..lp {
                    loc_zp[i * lp + k] += w * pzd[i] * pp[k][0];
                }
            }
            for i in 0..lp {
                for j in 0..lp {
                    loc_pp[i * lp + j] += w * pp[i][0] * pp[j][0];
                }
            }
        }

        let (sd, _) = spaces.sigma.cell_dofs(cell);
        let (gd, _) = spaces.gamma.cell_dofs(cell);
        let (zd, _) = spaces.z.cell_dofs(cell);
        let (pd, _) = spaces.p.cell_dofs(cell);
        let (ud, _) = spaces.u.cell_dofs(cell);
        let ucell = ud[0];
        for r in 0..2 {
            for rp in 0..2 {
                for i in 0..ls {
                    for j in 0..ls {
                        // trφ for row r is ψ[r]
                        let trace = match (r, rp) {
                            (0, 0) => comp00[i * ls + j],
                            (1, 1) => comp11[i * ls + j],
                            (0, 1) => loc_sst[i * ls + j],
                            _ => loc_sst[j * ls + i],
                        };
                        let same = if r == rp { comp00[i * ls + j] + comp11[i * ls + j] } else { 0.0 };
                        let v = s * (same - c * trace);
                        if v != 0.0 {
                            t_ss.push(r * bs + sd[i], rp * bs + sd[j], v);
                        }
                    }
                }
            }
            for i in 0..ls {
                t_su.push(r * bs + sd[i], r * bu + ucell, loc_su[i]);
                for k in 0..lg {
                    t_sg.push(r * bs + sd[i], gd[k], loc_sg[(r * ls + i) * lg + k]);
                }
                for k in 0..lp {
                    t_sp.push(r * bs + sd[i], pd[k], a_trace * loc_sp[(r * ls + i) * lp + k]);
                }
            }
        }
        for i in 0..lz {
            for j in 0..lz {
                t_z.push(zd[i], zd[j], kinv * loc_z[i * lz + j]);
            }
            for k in 0..lp {
                t_zp.push(zd[i], pd[k], loc_zp[i * lp + k]);
            }
        }
        for i in 0..lp {
            for j in 0..lp {
                t_pp.push(pd[i], pd[j], pp_coeff * loc_pp[i * lp + j]);
            }
        }
    }

    BlockSystem {
        a_ss: t_ss.build(),
        b_su: t_su.build(),
        b_sg: t_sg.build(),
        a_sp: t_sp.build(),
        m_z: t_z.build(),
        b_zp: t_zp.build(),
        m_pp: t_pp.build(),
    }
}

/// Weakly symmetric elliptic projection of a stress field: the stress part of
/// the solution of
///
/// ```text
/// (σ̃, τ) + (ũ, div τ) + (γ̃, τ) = (σ, τ)
/// (div σ̃, v)                   = (div σ, v)
/// (σ̃, η)                       = (σ, η)
/// ```
///
/// over the stress, displacement and rotation spaces. `div_sigma` is the
/// row-wise divergence of `sigma`.
pub fn elliptic_projection_sigma(
    spaces: &MixedSpaces,
    sigma: impl Fn([f64; 2]) -> [[f64; 2]; 2],
    div_sigma: impl Fn([f64; 2]) -> [f64; 2],
) -> Result<Vec<f64>, SolverError> {
    let blocks = assemble_blocks(spaces, &MaterialParams::default());
    let mass = spaces.sigma.mass_matrix();
    let (ns, nu, ng) = (spaces.sigma.dim(), spaces.u.dim(), spaces.gamma.dim());
    let n = ns + nu + ng;
    let mut t = TripletBuilder::new(n, n);
    t.add_block(0, 0, &mass, 1.0);
    t.add_block(0, ns, &blocks.b_su, 1.0);
    t.add_block(0, ns + nu, &blocks.b_sg, 1.0);
    t.add_block_transposed(ns, 0, &blocks.b_su, 1.0);
    t.add_block_transposed(ns + nu, 0, &blocks.b_sg, 1.0);
    let mut rhs = spaces.sigma.load_vector(6, |x, out| {
        let s = sigma(x);
        out.copy_from_slice(&[s[0][0], s[0][1], s[1][0], s[1][1]]);
    });
    rhs.extend(spaces.u.load_vector(6, |x, out| out.copy_from_slice(&div_sigma(x))));
    rhs.extend(spaces.gamma.load_vector(6, |x, out| {
        let s = sigma(x);
        out[0] = s[0][1] - s[1][0];
    }));
    let mut x = DirectSolver::factorize(&t.build())?.solve(&rhs);
    x.truncate(ns);
    Ok(x)
}

/// Right-hand-side data at one time level.
#[derive(Debug, Clone)]
pub struct LoadTerms {
    /// `−(f, v)`.
    pub force: Vec<f64>,
    /// `(g, q)`.
    pub source: Vec<f64>,
    /// `⟨u₀, τn⟩` over the displacement boundary.
    pub sigma_boundary: Vec<f64>,
    /// `⟨p₀, w·n⟩` over the pressure boundary.
    pub z_boundary: Vec<f64>,
}

/// Essential dofs of the stress and flux spaces (space-local numbering).
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EssentialDofs {
    pub sigma: Vec<usize>,
    pub z: Vec<usize>,
}

impl EssentialDofs {
    pub fn new(spaces: &MixedSpaces, partition: &BoundaryPartition) -> Self {
        let bs = spaces.sigma.base_dim();
        let mut sigma = Vec::new();
        for &e in &partition.gamma_t {
            for d in spaces.sigma.edge_dofs(e) {
                sigma.push(d);
                sigma.push(bs + d);
            }
        }
        let mut z: Vec<usize> = partition.gamma_f.iter().flat_map(|&e| spaces.z.edge_dofs(e)).collect();
        sigma.sort_unstable();
        z.sort_unstable();
        EssentialDofs { sigma, z }
    }
}

const EDGE_POINTS: usize = 4;

fn legendre(k: usize, s: f64) -> f64 {
    if k == 0 {
        1.0
    } else {
        2.0 * s - 1.0
    }
}

/// Assembles the loads of `problem` at time `t`.
pub fn assemble_loads(spaces: &MixedSpaces, problem: &dyn BiotProblem, partition: &BoundaryPartition, t: f64) -> LoadTerms {
    let force = spaces.u.load_vector(6, |x, out| {
        let f = problem.body_force(t, x);
        out[0] = -f[0];
        out[1] = -f[1];
    });
    let source = spaces.p.load_vector(6, |x, out| out[0] = problem.source(t, x));
    let mut sigma_boundary = vec![0.0; spaces.sigma.dim()];
    let bs = spaces.sigma.base_dim();
    boundary_integral(&spaces.sigma, &partition.gamma_d, |x, _n, vals, dofs| {
        let u0 = problem.displacement_bc(t, x);
        for (i, &(vn, w)) in vals.iter().enumerate() {
            sigma_boundary[dofs[i]] += w * u0[0] * vn;
            sigma_boundary[bs + dofs[i]] += w * u0[1] * vn;
        }
    });
    let mut z_boundary = vec![0.0; spaces.z.dim()];
    boundary_integral(&spaces.z, &partition.gamma_p, |x, _n, vals, dofs| {
        let p0 = problem.pressure_bc(t, x);
        for (i, &(vn, w)) in vals.iter().enumerate() {
            z_boundary[dofs[i]] += w * p0 * vn;
        }
    });
    LoadTerms { force, source, sigma_boundary, z_boundary }
}

/// Visits quadrature points on boundary edges of an H(div) space. The
/// callback receives the physical point, the outward normal, and for each
/// local basis function `(ψ·n, weight × length)` with the matching global dofs.
fn boundary_integral(space: &FunctionSpace, edges: &[usize], mut visit: impl FnMut([f64; 2], [f64; 2], &[(f64, f64)], &[usize])) {
    let mesh = space.mesh();
    let mut vals = Vec::with_capacity(space.local_dim());
    for &e in edges {
        let cell = mesh.edge_cells(e)[0].expect("boundary edge has a cell");
        let le = space.local_edge(cell, e);
        let (pts, _, ws) = FunctionSpace::reference_edge_points(le, EDGE_POINTS);
        let map = space.map(cell);
        let n = mesh.outward_normal(e);
        let len = mesh.edge_length(e);
        let (dofs, signs) = space.cell_dofs(cell);
        for (p, w) in pts.iter().zip(&ws) {
            let basis = space.element().eval_basis(*p).expect("edge point on reference cell");
            vals.clear();
            for i in 0..basis.len() {
                let v = map.piola(basis[i]);
                vals.push((signs[i] * dot(v, n), w * len));
            }
            visit(map.to_physical(*p), n, &vals, dofs);
        }
    }
}

/// Values of the essential stress and flux dofs at time `t`: moments of the
/// prescribed traction and normal flux against the edge Legendre weights.
pub fn essential_values(
    spaces: &MixedSpaces,
    problem: &dyn BiotProblem,
    partition: &BoundaryPartition,
    t: f64,
) -> (Vec<(usize, f64)>, Vec<(usize, f64)>) {
    let mesh = spaces.mesh();
    let (xs, ws) = gauss_legendre(EDGE_POINTS).expect("supported");
    let moments = |e: usize, per_edge: usize, f: &dyn Fn([f64; 2], [f64; 2]) -> [f64; 2]| -> Vec<[f64; 2]> {
        let [a, b] = mesh.edges()[e];
        let (pa, pb) = (mesh.vertices()[a], mesh.vertices()[b]);
        let n = mesh.outward_normal(e);
        let sgn = mesh.boundary_normal_sign(e);
        let len = mesh.edge_length(e);
        (0..per_edge)
            .map(|k| {
                let mut m = [0.0; 2];
                for (&s, &w) in xs.iter().zip(&ws) {
                    let x = [pa[0] + s * (pb[0] - pa[0]), pa[1] + s * (pb[1] - pa[1])];
                    let v = f(x, n);
                    let wt = w * len * sgn * legendre(k, s);
                    m[0] += wt * v[0];
                    m[1] += wt * v[1];
                }
                m
            })
            .collect()
    };
    let bs = spaces.sigma.base_dim();
    let mut sigma = Vec::new();
    for &e in &partition.gamma_t {
        let dofs = spaces.sigma.edge_dofs(e);
        let m = moments(e, dofs.len(), &|x, n| problem.traction_bc(t, x, n));
        for (d, v) in dofs.iter().zip(&m) {
            sigma.push((*d, v[0]));
            sigma.push((bs + *d, v[1]));
        }
    }
    let mut z = Vec::new();
    for &e in &partition.gamma_f {
        let dofs = spaces.z.edge_dofs(e);
        let m = moments(e, dofs.len(), &|x, n| [problem.flux_bc(t, x, n), 0.0]);
        for (d, v) in dofs.iter().zip(&m) {
            z.push((*d, v[0]));
        }
    }
    sigma.sort_by_key(|p| p.0);
    z.sort_by_key(|p| p.0);
    (sigma, z)
}
