//! Global finite element spaces: dof numbering, evaluation, canonical
//! interpolation and L² projection.
//!
//! A space holds `blocks` copies of one reference element (two BDM rows for
//! the stress, two DG components for the displacement). Values are laid out
//! block-major: component `d` of block `b` lives at `b * value_dim + d`, so a
//! stress value is the row-major matrix `[σ₁₁, σ₁₂, σ₂₁, σ₂₂]`.

use std::sync::Arc;

use crate::element::{AffineMap, DofEntity, ElementKind, FeError, ReferenceElement, Tabulation};
use crate::mesh::{Mesh, LOCAL_EDGES};
use crate::quadrature::{gauss_legendre, quadrature, QuadratureRule};
use crate::sparse::{CsrMatrix, DirectSolver, SolverError, TripletBuilder};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FieldRole {
    SigmaRow,
    Displacement,
    Rotation,
    Flux,
    Pressure,
    /// Post-processed displacement.
    Recovered,
}

#[derive(Debug, Clone)]
pub struct FunctionSpace {
    mesh: Arc<Mesh>,
    element: ReferenceElement,
    role: FieldRole,
    blocks: usize,
    base_dim: usize,
    per_vertex: usize,
    per_edge: usize,
    per_cell: usize,
    cell_dofs: Vec<usize>,
    cell_signs: Vec<f64>,
    maps: Vec<AffineMap>,
}

/// Coefficients of a discrete field together with the space they live in.
#[derive(Debug, Clone)]
pub struct FieldVector<'a> {
    pub space: &'a FunctionSpace,
    pub coefficients: Vec<f64>,
}

impl<'a> FieldVector<'a> {
    pub fn new(space: &'a FunctionSpace, coefficients: Vec<f64>) -> Self {
        assert_eq!(coefficients.len(), space.dim(), "coefficient length does not match the space");
        FieldVector { space, coefficients }
    }

    pub fn zeros(space: &'a FunctionSpace) -> Self {
        FieldVector { space, coefficients: vec![0.0; space.dim()] }
    }
}

impl FunctionSpace {
    pub fn new(mesh: Arc<Mesh>, kind: ElementKind, role: FieldRole) -> Result<Self, FeError> {
        let blocks = match role {
            FieldRole::Displacement | FieldRole::Recovered => 2,
            FieldRole::SigmaRow => 2,
            _ => 1,
        };
        Self::with_blocks(mesh, kind, role, blocks)
    }

    pub fn with_blocks(mesh: Arc<Mesh>, kind: ElementKind, role: FieldRole, blocks: usize) -> Result<Self, FeError> {
        let element = ReferenceElement::new(kind)?;
        let count = |pred: &dyn Fn(DofEntity) -> bool| element.dofs().iter().filter(|d| pred(d.entity())).count();
        let per_vertex = count(&|e| matches!(e, DofEntity::Vertex(0)));
        let per_edge = count(&|e| matches!(e, DofEntity::Edge(0)));
        let per_cell = count(&|e| matches!(e, DofEntity::Interior));
        // CG1 is the only element with vertex dofs; DG1's point evaluations
        // are attached to the cell interior instead
        let (per_vertex, per_cell) = if kind == ElementKind::Dg1 { (0, 3) } else { (per_vertex, per_cell) };

        let nv = mesh.num_vertices();
        let ne = mesh.num_edges();
        let vertex_off = 0;
        let edge_off = nv * per_vertex;
        let cell_off = edge_off + ne * per_edge;
        let base_dim = cell_off + mesh.num_cells() * per_cell;

        let ldim = element.local_dim();
        let mut cell_dofs = Vec::with_capacity(mesh.num_cells() * ldim);
        let mut cell_signs = Vec::with_capacity(mesh.num_cells() * ldim);
        let mut maps = Vec::with_capacity(mesh.num_cells());
        for c in 0..mesh.num_cells() {
            maps.push(AffineMap::from_vertices(&mesh.cell_vertices(c))?);
            let mut interior = 0;
            let mut edge_count = [0usize; 3];
            for dof in element.dofs() {
                let (g, s) = match (kind, dof.entity()) {
                    (ElementKind::Dg1, _) | (_, DofEntity::Interior) => {
                        let g = cell_off + c * per_cell + interior;
                        interior += 1;
                        (g, 1.0)
                    }
                    (_, DofEntity::Vertex(v)) => (vertex_off + mesh.cells()[c][v], 1.0),
                    (_, DofEntity::Edge(le)) => {
                        let (e, sign) = mesh.cell_edges()[c][le];
                        let k = edge_count[le];
                        edge_count[le] += 1;
                        (edge_off + e * per_edge + k, dof.orientation_factor(sign))
                    }
                };
                cell_dofs.push(g);
                cell_signs.push(s);
            }
        }
        Ok(FunctionSpace {
            mesh,
            element,
            role,
            blocks,
            base_dim,
            per_vertex,
            per_edge,
            per_cell,
            cell_dofs,
            cell_signs,
            maps,
        })
    }

    pub fn mesh(&self) -> &Arc<Mesh> {
        &self.mesh
    }
    pub fn element(&self) -> &ReferenceElement {
        &self.element
    }
    pub fn kind(&self) -> ElementKind {
        self.element.kind()
    }
    pub fn role(&self) -> FieldRole {
        self.role
    }
    pub fn blocks(&self) -> usize {
        self.blocks
    }
    /// Dimension of a single block.
    pub fn base_dim(&self) -> usize {
        self.base_dim
    }
    pub fn dim(&self) -> usize {
        self.blocks * self.base_dim
    }
    pub fn local_dim(&self) -> usize {
        self.element.local_dim()
    }
    pub fn value_dim(&self) -> usize {
        self.element.value_dim()
    }
    /// Number of scalar values per point: `blocks × value_dim`.
    pub fn value_size(&self) -> usize {
        self.blocks * self.value_dim()
    }
    pub fn map(&self, c: usize) -> &AffineMap {
        &self.maps[c]
    }
    pub fn is_discontinuous(&self) -> bool {
        matches!(self.kind(), ElementKind::Dg0 | ElementKind::Dg1)
    }

    /// Block-0 global dofs and orientation factors of cell `c`.
    #[inline]
    pub fn cell_dofs(&self, c: usize) -> (&[usize], &[f64]) {
        let l = self.local_dim();
        (&self.cell_dofs[c * l..(c + 1) * l], &self.cell_signs[c * l..(c + 1) * l])
    }

    /// Block-0 dofs attached to a mesh edge, ordered by Legendre weight.
    pub fn edge_dofs(&self, e: usize) -> Vec<usize> {
        let off = self.mesh.num_vertices() * self.per_vertex;
        (0..self.per_edge).map(|k| off + e * self.per_edge + k).collect()
    }

    pub fn dofs_per_cell_interior(&self) -> usize {
        self.per_cell
    }

    /// Physical basis values and divergences at tabulated reference points of
    /// cell `c`, including orientation factors. Layout matches [`Tabulation`].
    pub fn physical_values(&self, c: usize, tab: &Tabulation, vals: &mut Vec<[f64; 2]>, divs: &mut Vec<f64>) {
        let (_, signs) = self.cell_dofs(c);
        let map = &self.maps[c];
        let l = tab.dim;
        let nq = tab.values.len() / l;
        vals.clear();
        divs.clear();
        if self.element.kind().is_hdiv() {
            for q in 0..nq {
                for i in 0..l {
                    let v = map.piola(tab.value(q, i));
                    vals.push([signs[i] * v[0], signs[i] * v[1]]);
                    divs.push(signs[i] * map.piola_div(tab.div(q, i)));
                }
            }
        } else {
            vals.extend_from_slice(&tab.values);
            divs.resize(tab.values.len(), 0.0);
        }
    }

    /// Evaluates a field at reference point `xhat` of cell `c`. `out` receives
    /// `value_size()` entries.
    pub fn evaluate(&self, coeffs: &[f64], c: usize, xhat: [f64; 2], out: &mut [f64]) {
        let vals = self.element.eval_basis(clamp_reference(xhat)).expect("clamped point");
        self.combine(coeffs, c, &vals, out);
    }

    fn combine(&self, coeffs: &[f64], c: usize, vals: &[[f64; 2]], out: &mut [f64]) {
        let (dofs, signs) = self.cell_dofs(c);
        let vd = self.value_dim();
        let map = &self.maps[c];
        out[..self.value_size()].iter_mut().for_each(|o| *o = 0.0);
        for b in 0..self.blocks {
            let off = b * self.base_dim;
            for i in 0..dofs.len() {
                let a = coeffs[off + dofs[i]] * signs[i];
                if vd == 2 {
                    let v = map.piola(vals[i]);
                    out[2 * b] += a * v[0];
                    out[2 * b + 1] += a * v[1];
                } else {
                    out[b] += a * vals[i][0];
                }
            }
        }
    }

    /// Divergence of each block of an H(div) field at a reference point.
    pub fn evaluate_div(&self, coeffs: &[f64], c: usize, xhat: [f64; 2], out: &mut [f64]) {
        assert!(self.element.kind().is_hdiv());
        let divs = self.element.eval_divergence(xhat);
        let (dofs, signs) = self.cell_dofs(c);
        let map = &self.maps[c];
        for (b, o) in out.iter_mut().enumerate().take(self.blocks) {
            let off = b * self.base_dim;
            *o = (0..dofs.len()).map(|i| coeffs[off + dofs[i]] * signs[i] * map.piola_div(divs[i])).sum();
        }
    }

    /// Canonical interpolation: applies the dof functionals to `f`.
    ///
    /// H(div) blocks are pulled back with the inverse Piola map before the
    /// reference functionals are applied; shared dofs get identical values
    /// from both neighbours.
    pub fn interpolate(&self, f: impl Fn([f64; 2], &mut [f64])) -> Vec<f64> {
        let mut coeffs = vec![0.0; self.dim()];
        let vs = self.value_size();
        let vd = self.value_dim();
        for c in 0..self.mesh.num_cells() {
            let map = self.maps[c];
            let (dofs, signs) = self.cell_dofs(c);
            for b in 0..self.blocks {
                let pulled = |xhat: [f64; 2], out: &mut [f64; 2]| {
                    let mut buf = [0.0; 8];
                    f(map.to_physical(xhat), &mut buf[..vs]);
                    if vd == 2 {
                        *out = map.piola_inverse([buf[2 * b], buf[2 * b + 1]]);
                    } else {
                        out[0] = buf[b];
                    }
                };
                let local = self.element.apply_dofs(&pulled);
                for i in 0..dofs.len() {
                    coeffs[b * self.base_dim + dofs[i]] = signs[i] * local[i];
                }
            }
        }
        coeffs
    }

    /// `∫ f · φᵢ` for every global basis function, with a quadrature of the
    /// given degree.
    pub fn load_vector(&self, degree: usize, f: impl Fn([f64; 2], &mut [f64])) -> Vec<f64> {
        let rule = quadrature(degree).expect("supported degree");
        let tab = self.element.tabulate(&rule.points);
        let mut out = vec![0.0; self.dim()];
        let (mut vals, mut divs) = (Vec::new(), Vec::new());
        let vs = self.value_size();
        let vd = self.value_dim();
        let mut buf = [0.0; 8];
        for c in 0..self.mesh.num_cells() {
            let map = self.maps[c];
            let jac = map.det.abs();
            self.physical_values(c, &tab, &mut vals, &mut divs);
            let (dofs, _) = self.cell_dofs(c);
            let l = dofs.len();
            for (q, (&p, &w)) in rule.points.iter().zip(&rule.weights).enumerate() {
                f(map.to_physical(p), &mut buf[..vs]);
                for b in 0..self.blocks {
                    for i in 0..l {
                        let v = vals[q * l + i];
                        let s = if vd == 2 { buf[2 * b] * v[0] + buf[2 * b + 1] * v[1] } else { buf[b] * v[0] };
                        out[b * self.base_dim + dofs[i]] += w * jac * s;
                    }
                }
            }
        }
        out
    }

    /// Block-diagonal mass matrix `(φᵢ, φⱼ)`.
    pub fn mass_matrix(&self) -> CsrMatrix {
        let rule = quadrature(4).expect("degree 4");
        let tab = self.element.tabulate(&rule.points);
        let l = self.local_dim();
        let mut t = TripletBuilder::with_capacity(self.dim(), self.dim(), self.mesh.num_cells() * l * l * self.blocks);
        let (mut vals, mut divs) = (Vec::new(), Vec::new());
        let mut local = vec![0.0; l * l];
        for c in 0..self.mesh.num_cells() {
            let jac = self.maps[c].det.abs();
            self.physical_values(c, &tab, &mut vals, &mut divs);
            local.iter_mut().for_each(|x| *x = 0.0);
            for (q, &w) in rule.weights.iter().enumerate() {
                for i in 0..l {
                    let a = vals[q * l + i];
                    for j in 0..l {
                        let b = vals[q * l + j];
                        local[i * l + j] += w * jac * (a[0] * b[0] + a[1] * b[1]);
                    }
                }
            }
            let (dofs, _) = self.cell_dofs(c);
            for blk in 0..self.blocks {
                let off = blk * self.base_dim;
                for i in 0..l {
                    for j in 0..l {
                        t.push(off + dofs[i], off + dofs[j], local[i * l + j]);
                    }
                }
            }
        }
        t.build()
    }

    /// L² projection onto the space. Discontinuous spaces are projected cell
    /// by cell; otherwise the global mass system is solved.
    pub fn l2_project(&self, degree: usize, f: impl Fn([f64; 2], &mut [f64])) -> Result<Vec<f64>, SolverError> {
        let b = self.load_vector(degree, f);
        if self.is_discontinuous() {
            let rule = quadrature(4).expect("degree 4");
            let tab = self.element.tabulate(&rule.points);
            let l = self.local_dim();
            let mut out = vec![0.0; self.dim()];
            for c in 0..self.mesh.num_cells() {
                let jac = self.maps[c].det.abs();
                let mut m = nalgebra::DMatrix::<f64>::zeros(l, l);
                for (q, &w) in rule.weights.iter().enumerate() {
                    for i in 0..l {
                        for j in 0..l {
                            m[(i, j)] += w * jac * tab.value(q, i)[0] * tab.value(q, j)[0];
                        }
                    }
                }
                let lu = m.lu();
                let (dofs, _) = self.cell_dofs(c);
                for blk in 0..self.blocks {
                    let off = blk * self.base_dim;
                    let rhs = nalgebra::DVector::from_iterator(l, dofs.iter().map(|&d| b[off + d]));
                    let x = lu.solve(&rhs).ok_or(SolverError::Singular { index: c })?;
                    for i in 0..l {
                        out[off + dofs[i]] = x[i];
                    }
                }
            }
            Ok(out)
        } else {
            let m = self.mass_matrix();
            Ok(DirectSolver::factorize(&m)?.solve(&b))
        }
    }

    /// `‖f − f_h‖_{L²}` (all components) with a degree-6 rule.
    pub fn l2_error(&self, coeffs: &[f64], exact: impl Fn([f64; 2], &mut [f64])) -> f64 {
        self.l2_error_weighted(coeffs, exact, &vec![1.0; self.value_size()])
    }

    /// Like [`FunctionSpace::l2_error`] but weighting the squared error of
    /// each value component.
    pub fn l2_error_weighted(&self, coeffs: &[f64], exact: impl Fn([f64; 2], &mut [f64]), weights: &[f64]) -> f64 {
        let rule = quadrature(6).expect("degree 6");
        let tab = self.element.tabulate(&rule.points);
        let vs = self.value_size();
        let (mut ex, mut uh) = ([0.0; 8], [0.0; 8]);
        let (mut vals, mut divs) = (Vec::new(), Vec::new());
        let mut total = 0.0;
        for c in 0..self.mesh.num_cells() {
            let map = self.maps[c];
            let jac = map.det.abs();
            self.physical_values(c, &tab, &mut vals, &mut divs);
            let (dofs, _) = self.cell_dofs(c);
            let l = dofs.len();
            for (q, (&p, &w)) in rule.points.iter().zip(&rule.weights).enumerate() {
                exact(map.to_physical(p), &mut ex[..vs]);
                self.combine_physical(coeffs, dofs, &vals[q * l..(q + 1) * l], &mut uh);
                let e2: f64 = (0..vs).map(|k| weights[k] * (ex[k] - uh[k]).powi(2)).sum();
                total += w * jac * e2;
            }
        }
        total.sqrt()
    }

    /// Combines already-mapped basis values (signs included).
    #[inline]
    pub(crate) fn combine_physical(&self, coeffs: &[f64], dofs: &[usize], vals: &[[f64; 2]], out: &mut [f64]) {
        let vd = self.value_dim();
        for b in 0..self.blocks {
            let off = b * self.base_dim;
            if vd == 2 {
                let (mut s0, mut s1) = (0.0, 0.0);
                for i in 0..dofs.len() {
                    let a = coeffs[off + dofs[i]];
                    s0 += a * vals[i][0];
                    s1 += a * vals[i][1];
                }
                out[2 * b] = s0;
                out[2 * b + 1] = s1;
            } else {
                out[b] = (0..dofs.len()).map(|i| coeffs[off + dofs[i]] * vals[i][0]).sum();
            }
        }
    }

    /// Edge quadrature data for local edge `le` of a reference cell: reference
    /// points and the parameter `σ ∈ [0, 1]` along the local direction.
    pub fn reference_edge_points(le: usize, npts: usize) -> (Vec<[f64; 2]>, Vec<f64>, Vec<f64>) {
        let verts = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let [a, b] = LOCAL_EDGES[le];
        let (xs, ws) = gauss_legendre(npts).expect("supported");
        let pts = xs
            .iter()
            .map(|&s| [verts[a][0] + s * (verts[b][0] - verts[a][0]), verts[a][1] + s * (verts[b][1] - verts[a][1])])
            .collect();
        (pts, xs, ws)
    }

    /// Local index of mesh edge `e` in cell `c`.
    pub fn local_edge(&self, c: usize, e: usize) -> usize {
        self.mesh.cell_edges()[c].iter().position(|&(g, _)| g == e).expect("edge belongs to cell")
    }

    /// Quadrature rule helper re-exported for callers assembling on this space.
    pub fn rule(degree: usize) -> QuadratureRule {
        quadrature(degree).expect("supported degree")
    }
}

fn clamp_reference(p: [f64; 2]) -> [f64; 2] {
    let x = p[0].max(0.0);
    let y = p[1].max(0.0);
    let s = x + y;
    if s > 1.0 {
        [x / s, y / s]
    } else {
        [x, y]
    }
}
