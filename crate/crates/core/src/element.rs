//! Reference elements on the triangle `(0,0), (1,0), (0,1)` and the affine /
//! contravariant Piola maps to physical cells.
//!
//! Every element is built Ciarlet-style: a spanning set of polynomials (in
//! the monomials `1, x, y, x², xy, y²`) plus a list of dof functionals; the
//! nodal basis is obtained by inverting the functional-vs-span matrix.
//!
//! Edge moments are taken against Legendre weights `P_k(s)`, `s ∈ [-1, 1]`
//! running along the local edge direction, with the normal obtained by
//! rotating the (unnormalized) local tangent by −90°. With that convention the
//! moments are invariant under the contravariant Piola map.

use nalgebra::DMatrix;
use thiserror::Error;

use crate::mesh::LOCAL_EDGES;
use crate::quadrature::{gauss_legendre, quadrature};

#[derive(Debug, Error, PartialEq)]
pub enum FeError {
    #[error("unsupported quadrature degree {0}")]
    UnsupportedDegree(usize),
    #[error("point ({0}, {1}) lies outside the reference triangle")]
    OutsideReference(f64, f64),
    #[error("degenerate cell (det J = {0:e})")]
    DegenerateCell(f64),
    #[error("dof functionals of {0:?} are not unisolvent")]
    NotUnisolvent(ElementKind),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ElementKind {
    /// Lowest-order Brezzi–Douglas–Marini (full linear vector fields).
    Bdm1,
    /// Lowest-order Raviart–Thomas, `a + c·x`.
    RtLo,
    /// Next-order Raviart–Thomas.
    RtHi,
    Dg0,
    Dg1,
    Cg1,
}

impl ElementKind {
    pub fn value_dim(self) -> usize {
        match self {
            ElementKind::Bdm1 | ElementKind::RtLo | ElementKind::RtHi => 2,
            _ => 1,
        }
    }

    pub fn is_hdiv(self) -> bool {
        self.value_dim() == 2
    }

    /// Polynomial degree of the basis functions.
    pub fn degree(self) -> usize {
        match self {
            ElementKind::Dg0 => 0,
            ElementKind::RtHi => 2,
            _ => 1,
        }
    }
}

/// Geometric entity a dof is attached to (local numbering).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DofEntity {
    Vertex(usize),
    Edge(usize),
    Interior,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum DofFunctional {
    /// `∫_e v·n P_k(s) ds` over a local edge.
    EdgeMoment { edge: usize, legendre: usize },
    /// `∫_K v_j dx` for one vector component.
    InteriorMoment { component: usize },
    PointEval { vertex: usize },
    CellMean,
}

impl DofFunctional {
    pub fn entity(&self) -> DofEntity {
        match *self {
            DofFunctional::EdgeMoment { edge, .. } => DofEntity::Edge(edge),
            DofFunctional::PointEval { vertex } => DofEntity::Vertex(vertex),
            _ => DofEntity::Interior,
        }
    }

    /// Multiplier relating the functional on a local edge to the same
    /// functional on the reversed edge.
    pub fn orientation_factor(&self, edge_sign: i8) -> f64 {
        match *self {
            DofFunctional::EdgeMoment { legendre, .. } if edge_sign < 0 && legendre % 2 == 0 => -1.0,
            _ => 1.0,
        }
    }

    /// Applies the functional to a field given on the reference triangle.
    /// `f` writes `value_dim` components.
    pub fn apply(&self, value_dim: usize, f: &dyn Fn([f64; 2], &mut [f64; 2])) -> f64 {
        let verts = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let mut val = [0.0; 2];
        match *self {
            DofFunctional::EdgeMoment { edge, legendre } => {
                let [a, b] = LOCAL_EDGES[edge];
                let (pa, pb) = (verts[a], verts[b]);
                let t = [pb[0] - pa[0], pb[1] - pa[1]];
                let n = [t[1], -t[0]];
                let (xs, ws) = gauss_legendre(4).expect("4-point rule");
                xs.iter()
                    .zip(&ws)
                    .map(|(&s, &w)| {
                        f([pa[0] + s * t[0], pa[1] + s * t[1]], &mut val);
                        w * (val[0] * n[0] + val[1] * n[1]) * legendre_poly(legendre, 2.0 * s - 1.0)
                    })
                    .sum()
            }
            DofFunctional::InteriorMoment { component } => {
                let q = quadrature(6).expect("degree-6 rule");
                q.integrate(|p| {
                    f(p, &mut val);
                    val[component]
                })
            }
            DofFunctional::PointEval { vertex } => {
                f(verts[vertex], &mut val);
                debug_assert_eq!(value_dim, 1);
                val[0]
            }
            DofFunctional::CellMean => {
                let q = quadrature(6).expect("degree-6 rule");
                2.0 * q.integrate(|p| {
                    f(p, &mut val);
                    val[0]
                })
            }
        }
    }
}

fn legendre_poly(k: usize, s: f64) -> f64 {
    match k {
        0 => 1.0,
        1 => s,
        _ => unreachable!("only P0 and P1 edge weights are used"),
    }
}

const NMONO: usize = 6;

fn monomials(p: [f64; 2]) -> [f64; NMONO] {
    let [x, y] = p;
    [1.0, x, y, x * x, x * y, y * y]
}

fn monomials_dx(p: [f64; 2]) -> [f64; NMONO] {
    let [x, y] = p;
    [0.0, 1.0, 0.0, 2.0 * x, y, 0.0]
}

fn monomials_dy(p: [f64; 2]) -> [f64; NMONO] {
    let [x, y] = p;
    [0.0, 0.0, 1.0, 0.0, x, 2.0 * y]
}

fn dot(a: &[f64; NMONO], b: &[f64; NMONO]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Polynomial with one monomial-coefficient row per component.
type Poly = [[f64; NMONO]; 2];

fn unit(component: usize, mono: usize) -> Poly {
    let mut p = [[0.0; NMONO]; 2];
    p[component][mono] = 1.0;
    p
}

#[derive(Debug, Clone)]
pub struct ReferenceElement {
    kind: ElementKind,
    dofs: Vec<DofFunctional>,
    basis: Vec<Poly>,
}

/// Basis values (and divergences for vector elements) at a set of points,
/// stored point-major: index `q * dim + i`.
#[derive(Debug, Clone)]
pub struct Tabulation {
    pub dim: usize,
    pub values: Vec<[f64; 2]>,
    pub divs: Vec<f64>,
}

impl Tabulation {
    #[inline]
    pub fn value(&self, q: usize, i: usize) -> [f64; 2] {
        self.values[q * self.dim + i]
    }
    #[inline]
    pub fn div(&self, q: usize, i: usize) -> f64 {
        self.divs[q * self.dim + i]
    }
}

impl ReferenceElement {
    pub fn new(kind: ElementKind) -> Result<Self, FeError> {
        use DofFunctional::*;
        let edge_moments = |k: usize| -> Vec<DofFunctional> {
            (0..3).flat_map(|e| (0..k).map(move |l| EdgeMoment { edge: e, legendre: l })).collect()
        };
        let p1_vec: Vec<Poly> = (0..2).flat_map(|c| (0..3).map(move |m| unit(c, m))).collect();
        let (span, dofs): (Vec<Poly>, Vec<DofFunctional>) = match kind {
            ElementKind::Bdm1 => (p1_vec, edge_moments(2)),
            ElementKind::RtLo => {
                let mut xvec = [[0.0; NMONO]; 2];
                xvec[0][1] = 1.0;
                xvec[1][2] = 1.0;
                (vec![unit(0, 0), unit(1, 0), xvec], edge_moments(1))
            }
            ElementKind::RtHi => {
                let mut span = p1_vec;
                // x·(x, y) and y·(x, y)
                let mut a = [[0.0; NMONO]; 2];
                a[0][3] = 1.0;
                a[1][4] = 1.0;
                let mut b = [[0.0; NMONO]; 2];
                b[0][4] = 1.0;
                b[1][5] = 1.0;
                span.push(a);
                span.push(b);
                let mut dofs = edge_moments(2);
                dofs.push(InteriorMoment { component: 0 });
                dofs.push(InteriorMoment { component: 1 });
                (span, dofs)
            }
            ElementKind::Dg0 => (vec![unit(0, 0)], vec![CellMean]),
            ElementKind::Dg1 | ElementKind::Cg1 => (
                vec![unit(0, 0), unit(0, 1), unit(0, 2)],
                (0..3).map(|v| PointEval { vertex: v }).collect(),
            ),
        };
        let vdim = kind.value_dim();
        let n = span.len();
        let mut d = DMatrix::<f64>::zeros(n, n);
        for (i, l) in dofs.iter().enumerate() {
            for (j, phi) in span.iter().enumerate() {
                d[(i, j)] = l.apply(vdim, &|p, out| {
                    let m = monomials(p);
                    out[0] = dot(&phi[0], &m);
                    out[1] = dot(&phi[1], &m);
                });
            }
        }
        let inv = d.try_inverse().ok_or(FeError::NotUnisolvent(kind))?;
        // nodal basis k = Σ_j span_j C_jk
        let basis = (0..n)
            .map(|k| {
                let mut p = [[0.0; NMONO]; 2];
                for (j, phi) in span.iter().enumerate() {
                    for c in 0..2 {
                        for m in 0..NMONO {
                            p[c][m] += inv[(j, k)] * phi[c][m];
                        }
                    }
                }
                p
            })
            .collect();
        Ok(ReferenceElement { kind, dofs, basis })
    }

    pub fn kind(&self) -> ElementKind {
        self.kind
    }
    pub fn local_dim(&self) -> usize {
        self.dofs.len()
    }
    pub fn value_dim(&self) -> usize {
        self.kind.value_dim()
    }
    pub fn dofs(&self) -> &[DofFunctional] {
        &self.dofs
    }

    /// Basis values at a reference point (scalar elements use component 0).
    pub fn eval_basis(&self, p: [f64; 2]) -> Result<Vec<[f64; 2]>, FeError> {
        let tol = 1e-12;
        if p[0] < -tol || p[1] < -tol || p[0] + p[1] > 1.0 + tol {
            return Err(FeError::OutsideReference(p[0], p[1]));
        }
        let m = monomials(p);
        Ok(self.basis.iter().map(|b| [dot(&b[0], &m), dot(&b[1], &m)]).collect())
    }

    pub fn eval_divergence(&self, p: [f64; 2]) -> Vec<f64> {
        let (dx, dy) = (monomials_dx(p), monomials_dy(p));
        self.basis.iter().map(|b| dot(&b[0], &dx) + dot(&b[1], &dy)).collect()
    }

    /// Reference gradient of scalar basis functions.
    pub fn eval_gradient(&self, p: [f64; 2]) -> Vec<[f64; 2]> {
        let (dx, dy) = (monomials_dx(p), monomials_dy(p));
        self.basis.iter().map(|b| [dot(&b[0], &dx), dot(&b[0], &dy)]).collect()
    }

    pub fn tabulate(&self, points: &[[f64; 2]]) -> Tabulation {
        let dim = self.local_dim();
        let mut values = Vec::with_capacity(points.len() * dim);
        let mut divs = Vec::with_capacity(points.len() * dim);
        for &p in points {
            let m = monomials(p);
            let (dx, dy) = (monomials_dx(p), monomials_dy(p));
            for b in &self.basis {
                values.push([dot(&b[0], &m), dot(&b[1], &m)]);
                divs.push(dot(&b[0], &dx) + dot(&b[1], &dy));
            }
        }
        Tabulation { dim, values, divs }
    }

    /// Applies every dof functional to `f` (a field on the reference cell).
    pub fn apply_dofs(&self, f: &dyn Fn([f64; 2], &mut [f64; 2])) -> Vec<f64> {
        self.dofs.iter().map(|l| l.apply(self.value_dim(), f)).collect()
    }
}

/// Affine map `x = x0 + J x̂` from the reference triangle onto a cell.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AffineMap {
    pub origin: [f64; 2],
    pub jac: [[f64; 2]; 2],
    pub det: f64,
    pub inv: [[f64; 2]; 2],
}

impl AffineMap {
    pub fn new(origin: [f64; 2], jac: [[f64; 2]; 2]) -> Result<Self, FeError> {
        let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
        if det == 0.0 || !det.is_finite() {
            return Err(FeError::DegenerateCell(det));
        }
        let inv = [[jac[1][1] / det, -jac[0][1] / det], [-jac[1][0] / det, jac[0][0] / det]];
        Ok(AffineMap { origin, jac, det, inv })
    }

    pub fn from_vertices(v: &[[f64; 2]; 3]) -> Result<Self, FeError> {
        let jac = [[v[1][0] - v[0][0], v[2][0] - v[0][0]], [v[1][1] - v[0][1], v[2][1] - v[0][1]]];
        AffineMap::new(v[0], jac)
    }

    #[inline]
    pub fn to_physical(&self, p: [f64; 2]) -> [f64; 2] {
        let j = &self.jac;
        [self.origin[0] + j[0][0] * p[0] + j[0][1] * p[1], self.origin[1] + j[1][0] * p[0] + j[1][1] * p[1]]
    }

    #[inline]
    pub fn to_reference(&self, x: [f64; 2]) -> [f64; 2] {
        let d = [x[0] - self.origin[0], x[1] - self.origin[1]];
        let k = &self.inv;
        [k[0][0] * d[0] + k[0][1] * d[1], k[1][0] * d[0] + k[1][1] * d[1]]
    }

    /// Contravariant Piola: `v = J v̂ / det J`.
    #[inline]
    pub fn piola(&self, v: [f64; 2]) -> [f64; 2] {
        let j = &self.jac;
        [(j[0][0] * v[0] + j[0][1] * v[1]) / self.det, (j[1][0] * v[0] + j[1][1] * v[1]) / self.det]
    }

    /// `div v = div v̂ / det J` for Piola-mapped fields.
    #[inline]
    pub fn piola_div(&self, d: f64) -> f64 {
        d / self.det
    }

    /// Pulls a physical vector back: `v̂ = det J · J⁻¹ v`.
    #[inline]
    pub fn piola_inverse(&self, v: [f64; 2]) -> [f64; 2] {
        let k = &self.inv;
        [self.det * (k[0][0] * v[0] + k[0][1] * v[1]), self.det * (k[1][0] * v[0] + k[1][1] * v[1])]
    }

    /// Maps a reference gradient to the physical one: `J⁻ᵀ ∇̂`.
    #[inline]
    pub fn grad(&self, g: [f64; 2]) -> [f64; 2] {
        let k = &self.inv;
        [k[0][0] * g[0] + k[1][0] * g[1], k[0][1] * g[0] + k[1][1] * g[1]]
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    const ALL: [ElementKind; 6] =
        [ElementKind::Bdm1, ElementKind::RtLo, ElementKind::RtHi, ElementKind::Dg0, ElementKind::Dg1, ElementKind::Cg1];

    #[test]
    fn local_dimensions() {
        let dims: Vec<usize> = ALL.iter().map(|&k| ReferenceElement::new(k).unwrap().local_dim()).collect();
        assert_eq!(dims, vec![6, 3, 8, 1, 3, 3]);
    }

    #[test]
    fn functionals_are_dual_to_basis() {
        for kind in ALL {
            let el = ReferenceElement::new(kind).unwrap();
            for (j, b) in el.basis.iter().enumerate() {
                let vals = el.apply_dofs(&|p, out| {
                    let m = monomials(p);
                    out[0] = dot(&b[0], &m);
                    out[1] = dot(&b[1], &m);
                });
                for (i, v) in vals.iter().enumerate() {
                    let want = if i == j { 1.0 } else { 0.0 };
                    assert!((v - want).abs() < 1e-12, "{kind:?} l_{i}(phi_{j}) = {v}");
                }
            }
        }
    }

    #[test]
    fn dg0_and_cg1_nodal_values() {
        let dg0 = ReferenceElement::new(ElementKind::Dg0).unwrap();
        assert!((dg0.eval_basis([0.2, 0.3]).unwrap()[0][0] - 1.0).abs() < 1e-13);
        let cg1 = ReferenceElement::new(ElementKind::Cg1).unwrap();
        for (k, v) in [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]].iter().enumerate() {
            let vals = cg1.eval_basis(*v).unwrap();
            for (i, val) in vals.iter().enumerate() {
                assert!((val[0] - if i == k { 1.0 } else { 0.0 }).abs() < 1e-14);
            }
        }
        assert!(matches!(cg1.eval_basis([0.8, 0.3]), Err(FeError::OutsideReference(..))));
    }

    #[test]
    fn rt_lo_edge_flux_is_kronecker_on_edge_quadrature() {
        // independent edge quadrature (3-point) of the normal flux
        let el = ReferenceElement::new(ElementKind::RtLo).unwrap();
        let verts = [[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]];
        let (xs, ws) = gauss_legendre(3).unwrap();
        for (i, [a, b]) in LOCAL_EDGES.iter().enumerate() {
            let (pa, pb) = (verts[*a], verts[*b]);
            let t = [pb[0] - pa[0], pb[1] - pa[1]];
            let n = [t[1], -t[0]];
            for j in 0..3 {
                let flux: f64 = xs
                    .iter()
                    .zip(&ws)
                    .map(|(&s, &w)| {
                        let v = el.eval_basis([pa[0] + s * t[0], pa[1] + s * t[1]]).unwrap()[j];
                        w * (v[0] * n[0] + v[1] * n[1])
                    })
                    .sum();
                assert!((flux - if i == j { 1.0 } else { 0.0 }).abs() < 1e-13);
            }
        }
    }

    // least-squares reproduction of a random field from the target space
    fn reproduces(kind: ElementKind, field: impl Fn([f64; 2]) -> [f64; 2]) -> f64 {
        let el = ReferenceElement::new(kind).unwrap();
        let coeffs = el.apply_dofs(&|p, out| *out = field(p));
        let mut worst: f64 = 0.0;
        for p in [[0.1, 0.2], [0.5, 0.25], [0.3, 0.6], [0.0, 1.0], [0.9, 0.05]] {
            let vals = el.eval_basis(p).unwrap();
            let mut s = [0.0; 2];
            for (c, v) in coeffs.iter().zip(&vals) {
                s[0] += c * v[0];
                s[1] += c * v[1];
            }
            let f = field(p);
            worst = worst.max((s[0] - f[0]).abs()).max((s[1] - f[1]).abs());
        }
        worst
    }

    #[test]
    fn spaces_contain_their_polynomials() {
        assert!(reproduces(ElementKind::Bdm1, |[x, y]| [0.3 - 1.2 * x + 0.7 * y, -0.4 + 2.0 * x + 0.1 * y]) < 1e-12);
        assert!(reproduces(ElementKind::RtLo, |[x, y]| [0.3 + 0.9 * x, -1.1 + 0.9 * y]) < 1e-12);
        assert!(
            reproduces(ElementKind::RtHi, |[x, y]| {
                let q = 0.4 * x - 1.3 * y;
                [0.3 + x - y + x * q, 0.2 - 0.5 * x + 2.0 * y + y * q]
            }) < 1e-12
        );
        // a quadratic field outside RT_lo is not reproduced
        assert!(reproduces(ElementKind::RtLo, |[x, y]| [x * y, 0.0]) > 1e-3);
    }

    #[test]
    fn piola_preserves_edge_moments() {
        let el = ReferenceElement::new(ElementKind::Bdm1).unwrap();
        let v = [[0.3, 0.1], [1.4, 0.45], [0.2, 1.7]];
        let map = AffineMap::from_vertices(&v).unwrap();
        let (xs, ws) = gauss_legendre(3).unwrap();
        for (e, [a, b]) in LOCAL_EDGES.iter().enumerate() {
            let (pa, pb) = (v[*a], v[*b]);
            let t = [pb[0] - pa[0], pb[1] - pa[1]];
            let len = t[0].hypot(t[1]);
            let n = [t[1] / len, -t[0] / len];
            for j in 0..6 {
                // physical ∫_e (Piola φ_j)·n P_k ds
                for k in 0..2 {
                    let m: f64 = xs
                        .iter()
                        .zip(&ws)
                        .map(|(&s, &w)| {
                            let xhat = map.to_reference([pa[0] + s * t[0], pa[1] + s * t[1]]);
                            let val = map.piola(el.eval_basis(xhat).unwrap()[j]);
                            w * len * (val[0] * n[0] + val[1] * n[1]) * legendre_poly(k, 2.0 * s - 1.0)
                        })
                        .sum();
                    let want = if j == 2 * e + k { 1.0 } else { 0.0 };
                    assert!((m - want).abs() < 1e-12, "edge {e} k {k} basis {j}: {m}");
                }
            }
        }
    }

    #[test]
    fn piola_scaling_and_identity() {
        let id = AffineMap::new([0.0, 0.0], [[1.0, 0.0], [0.0, 1.0]]).unwrap();
        assert_eq!(id.piola([0.3, -0.2]), [0.3, -0.2]);
        let s = AffineMap::new([0.0, 0.0], [[2.0, 0.0], [0.0, 2.0]]).unwrap();
        assert_eq!(s.det, 4.0);
        assert_eq!(s.piola([1.0, 2.0]), [0.5, 1.0]);
        assert_eq!(s.piola_inverse(s.piola([1.0, 2.0])), [1.0, 2.0]);
        assert!(matches!(
            AffineMap::new([0.0, 0.0], [[1.0, 2.0], [2.0, 4.0]]),
            Err(FeError::DegenerateCell(_))
        ));
    }

    #[test]
    fn piola_divergence_matches_finite_differences() {
        let el = ReferenceElement::new(ElementKind::RtHi).unwrap();
        let map = AffineMap::from_vertices(&[[0.1, 0.2], [0.9, 0.35], [0.4, 1.1]]).unwrap();
        let xhat = [0.25, 0.3];
        let x = map.to_physical(xhat);
        let h = 1e-6;
        let eval = |x: [f64; 2]| -> Vec<[f64; 2]> {
            el.eval_basis(map.to_reference(x)).unwrap().into_iter().map(|v| map.piola(v)).collect()
        };
        let (xp, xm) = (eval([x[0] + h, x[1]]), eval([x[0] - h, x[1]]));
        let (yp, ym) = (eval([x[0], x[1] + h]), eval([x[0], x[1] - h]));
        let divs = el.eval_divergence(xhat);
        for j in 0..el.local_dim() {
            let fd = (xp[j][0] - xm[j][0] + yp[j][1] - ym[j][1]) / (2.0 * h);
            assert!((fd - map.piola_div(divs[j])).abs() < 1e-7);
        }
    }

    #[test]
    fn orientation_factors() {
        let l0 = DofFunctional::EdgeMoment { edge: 0, legendre: 0 };
        let l1 = DofFunctional::EdgeMoment { edge: 0, legendre: 1 };
        assert_eq!(l0.orientation_factor(-1), -1.0);
        assert_eq!(l1.orientation_factor(-1), 1.0);
        assert_eq!(l0.orientation_factor(1), 1.0);
    }
}
