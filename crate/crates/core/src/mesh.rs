//! Triangulations of the unit square.
//!
//! Cells are stored counterclockwise. Local edge `i` of a cell is the edge
//! opposite local vertex `i` and runs from the lower to the higher local vertex
//! (`1→2`, `0→2`, `0→1`). Global edges run from the lower to the higher global
//! vertex index; the sign stored in [`Mesh::cell_edges`] is `+1` when the two
//! directions agree.

use std::collections::HashMap;
use std::fmt::Write as _;

use thiserror::Error;

/// Errors raised while building or reading a mesh.
#[derive(Debug, Error, PartialEq)]
pub enum MeshError {
    #[error("number of subdivisions must be at least 1")]
    ZeroSubdivisions,
    #[error("cell {cell} is degenerate or clockwise (signed area {area:e})")]
    BadCell { cell: usize, area: f64 },
    #[error("vertex index {index} out of range in cell {cell}")]
    VertexOutOfRange { cell: usize, index: usize },
    #[error("edge {edge} is shared by more than two cells")]
    NonManifoldEdge { edge: usize },
    #[error("mesh file parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },
    #[error("boundary partition is inconsistent: {0}")]
    Partition(String),
}

/// Direction of the diagonal used to bisect each grid square.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Diagonal {
    /// Lower-left to upper-right.
    #[default]
    Forward,
    /// Upper-left to lower-right.
    Backward,
}

/// Side label of a boundary edge, chosen from the dominant direction of its
/// outward normal.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Side {
    Bottom,
    Right,
    Top,
    Left,
}

impl Side {
    pub const ALL: [Side; 4] = [Side::Bottom, Side::Right, Side::Top, Side::Left];

    fn from_normal(n: [f64; 2]) -> Side {
        if n[0].abs() >= n[1].abs() {
            if n[0] > 0.0 {
                Side::Right
            } else {
                Side::Left
            }
        } else if n[1] > 0.0 {
            Side::Top
        } else {
            Side::Bottom
        }
    }
}

#[derive(Debug, Clone)]
pub struct Mesh {
    vertices: Vec<[f64; 2]>,
    cells: Vec<[usize; 3]>,
    edges: Vec<[usize; 2]>,
    cell_edges: Vec<[(usize, i8); 3]>,
    edge_cells: Vec<[Option<usize>; 2]>,
    boundary_edges: Vec<(usize, Side)>,
    structured: Option<(usize, Diagonal)>,
}

/// Local vertex pairs of the three local edges.
pub const LOCAL_EDGES: [[usize; 2]; 3] = [[1, 2], [0, 2], [0, 1]];

impl Mesh {
    /// Bisects an `n × n` grid of squares covering `[0, 1]²`.
    pub fn structured(n: usize, diag: Diagonal) -> Result<Mesh, MeshError> {
        if n == 0 {
            return Err(MeshError::ZeroSubdivisions);
        }
        let h = 1.0 / n as f64;
        let mut vertices = Vec::with_capacity((n + 1) * (n + 1));
        for j in 0..=n {
            for i in 0..=n {
                vertices.push([i as f64 * h, j as f64 * h]);
            }
        }
        let vid = |i: usize, j: usize| j * (n + 1) + i;
        let mut cells = Vec::with_capacity(2 * n * n);
        for j in 0..n {
            for i in 0..n {
                let (a, b, c, d) = (vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1));
                match diag {
                    Diagonal::Forward => {
                        cells.push([a, b, c]);
                        cells.push([a, c, d]);
                    }
                    Diagonal::Backward => {
                        cells.push([a, b, d]);
                        cells.push([b, c, d]);
                    }
                }
            }
        }
        let mut mesh = Mesh::from_cells(vertices, cells)?;
        mesh.structured = Some((n, diag));
        Ok(mesh)
    }

    /// Builds edge connectivity for an arbitrary counterclockwise triangulation.
    pub fn from_cells(vertices: Vec<[f64; 2]>, cells: Vec<[usize; 3]>) -> Result<Mesh, MeshError> {
        for (c, cell) in cells.iter().enumerate() {
            for &v in cell {
                if v >= vertices.len() {
                    return Err(MeshError::VertexOutOfRange { cell: c, index: v });
                }
            }
            let area = signed_area(&vertices, cell);
            if !(area > 0.0) {
                return Err(MeshError::BadCell { cell: c, area });
            }
        }

        let mut edge_map: HashMap<[usize; 2], usize> = HashMap::new();
        let mut edges = Vec::new();
        let mut edge_cells: Vec<[Option<usize>; 2]> = Vec::new();
        let mut cell_edges = Vec::with_capacity(cells.len());
        for (c, cell) in cells.iter().enumerate() {
            let mut local = [(0usize, 1i8); 3];
            for (le, [a, b]) in LOCAL_EDGES.iter().enumerate() {
                let (ga, gb) = (cell[*a], cell[*b]);
                let key = [ga.min(gb), ga.max(gb)];
                let sign = if ga < gb { 1 } else { -1 };
                let e = *edge_map.entry(key).or_insert_with(|| {
                    edges.push(key);
                    edge_cells.push([None, None]);
                    edges.len() - 1
                });
                match edge_cells[e] {
                    [None, _] => edge_cells[e][0] = Some(c),
                    [Some(_), None] => edge_cells[e][1] = Some(c),
                    _ => return Err(MeshError::NonManifoldEdge { edge: e }),
                }
                local[le] = (e, sign);
            }
            cell_edges.push(local);
        }

        let mut mesh = Mesh {
            vertices,
            cells,
            edges,
            cell_edges,
            edge_cells,
            boundary_edges: Vec::new(),
            structured: None,
        };
        mesh.boundary_edges = (0..mesh.edges.len())
            .filter(|&e| mesh.edge_cells[e][1].is_none())
            .map(|e| (e, Side::from_normal(mesh.outward_normal(e))))
            .collect();
        Ok(mesh)
    }

    /// Parses the plain-text format: a header `V E T`, then `V` lines `x y`,
    /// then `T` lines `i j k`. `E` is informational; edges are derived.
    pub fn read_text(text: &str) -> Result<Mesh, MeshError> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty() && !l.starts_with('#'));
        let parse_err = |line: usize, msg: &str| MeshError::Parse { line, msg: msg.to_string() };

        let (hl, header) = lines.next().ok_or_else(|| parse_err(0, "missing header"))?;
        let counts: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse::<usize>())
            .collect::<Result<_, _>>()
            .map_err(|_| parse_err(hl, "header must be three integers"))?;
        let [nv, _ne, nt] = counts[..] else {
            return Err(parse_err(hl, "header must be three integers"));
        };

        let mut vertices = Vec::with_capacity(nv);
        for _ in 0..nv {
            let (ln, l) = lines.next().ok_or_else(|| parse_err(0, "unexpected end of vertices"))?;
            let xy: Vec<f64> = l
                .split_whitespace()
                .map(|t| t.parse::<f64>())
                .collect::<Result<_, _>>()
                .map_err(|_| parse_err(ln, "bad vertex coordinate"))?;
            let [x, y] = xy[..] else {
                return Err(parse_err(ln, "vertex line needs two coordinates"));
            };
            vertices.push([x, y]);
        }
        let mut cells = Vec::with_capacity(nt);
        for _ in 0..nt {
            let (ln, l) = lines.next().ok_or_else(|| parse_err(0, "unexpected end of cells"))?;
            let ijk: Vec<usize> = l
                .split_whitespace()
                .map(|t| t.parse::<usize>())
                .collect::<Result<_, _>>()
                .map_err(|_| parse_err(ln, "bad cell index"))?;
            let [i, j, k] = ijk[..] else {
                return Err(parse_err(ln, "cell line needs three indices"));
            };
            cells.push([i, j, k]);
        }
        Mesh::from_cells(vertices, cells)
    }

    pub fn write_text(&self) -> String {
        let mut s = String::new();
        let _ = writeln!(s, "{} {} {}", self.num_vertices(), self.num_edges(), self.num_cells());
        for v in &self.vertices {
            let _ = writeln!(s, "{:.17e} {:.17e}", v[0], v[1]);
        }
        for c in &self.cells {
            let _ = writeln!(s, "{} {} {}", c[0], c[1], c[2]);
        }
        s
    }

    pub fn num_vertices(&self) -> usize {
        self.vertices.len()
    }
    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }
    pub fn num_cells(&self) -> usize {
        self.cells.len()
    }
    pub fn vertices(&self) -> &[[f64; 2]] {
        &self.vertices
    }
    pub fn cells(&self) -> &[[usize; 3]] {
        &self.cells
    }
    pub fn edges(&self) -> &[[usize; 2]] {
        &self.edges
    }
    /// Per cell: `(global edge, orientation sign)` for local edges 0, 1, 2.
    pub fn cell_edges(&self) -> &[[(usize, i8); 3]] {
        &self.cell_edges
    }
    /// Cells adjacent to an edge; the second entry is `None` on the boundary.
    pub fn edge_cells(&self, e: usize) -> [Option<usize>; 2] {
        self.edge_cells[e]
    }
    pub fn boundary_edges(&self) -> &[(usize, Side)] {
        &self.boundary_edges
    }
    pub fn is_boundary_edge(&self, e: usize) -> bool {
        self.edge_cells[e][1].is_none()
    }
    /// Subdivision count and diagonal for meshes built by [`Mesh::structured`].
    pub fn structure(&self) -> Option<(usize, Diagonal)> {
        self.structured
    }

    /// Mesh size: the largest edge length.
    pub fn h(&self) -> f64 {
        match self.structured {
            Some((n, _)) => 1.0 / n as f64,
            None => (0..self.num_edges()).map(|e| self.edge_length(e)).fold(0.0, f64::max),
        }
    }

    pub fn cell_vertices(&self, c: usize) -> [[f64; 2]; 3] {
        let [a, b, d] = self.cells[c];
        [self.vertices[a], self.vertices[b], self.vertices[d]]
    }

    pub fn cell_area(&self, c: usize) -> f64 {
        signed_area(&self.vertices, &self.cells[c])
    }

    pub fn cell_centroid(&self, c: usize) -> [f64; 2] {
        let v = self.cell_vertices(c);
        [(v[0][0] + v[1][0] + v[2][0]) / 3.0, (v[0][1] + v[1][1] + v[2][1]) / 3.0]
    }

    pub fn edge_length(&self, e: usize) -> f64 {
        let t = self.edge_tangent(e);
        t[0].hypot(t[1])
    }

    /// Unnormalized tangent from the lower to the higher vertex.
    pub fn edge_tangent(&self, e: usize) -> [f64; 2] {
        let [a, b] = self.edges[e];
        let (pa, pb) = (self.vertices[a], self.vertices[b]);
        [pb[0] - pa[0], pb[1] - pa[1]]
    }

    /// Unit normal of the global edge orientation: the unit tangent rotated by −90°.
    pub fn edge_normal(&self, e: usize) -> [f64; 2] {
        let t = self.edge_tangent(e);
        let l = t[0].hypot(t[1]);
        [t[1] / l, -t[0] / l]
    }

    /// `+1` if [`Mesh::edge_normal`] points out of the domain on a boundary
    /// edge, `-1` otherwise. Interior edges return `+1`.
    pub fn boundary_normal_sign(&self, e: usize) -> f64 {
        let [Some(c), None] = self.edge_cells[e] else {
            return 1.0;
        };
        let n = self.edge_normal(e);
        let mid = self.edge_midpoint(e);
        let cen = self.cell_centroid(c);
        if n[0] * (mid[0] - cen[0]) + n[1] * (mid[1] - cen[1]) > 0.0 {
            1.0
        } else {
            -1.0
        }
    }

    /// `+1` when [`Mesh::edge_normal`] of local edge `le` points out of cell
    /// `c`. The two cells sharing an interior edge get opposite signs.
    pub fn outward_sign(&self, c: usize, le: usize) -> i8 {
        // local edge 0→2 runs clockwise around a counterclockwise cell
        const LOCAL_OUTWARD: [i8; 3] = [1, -1, 1];
        self.cell_edges[c][le].1 * LOCAL_OUTWARD[le]
    }

    pub fn outward_normal(&self, e: usize) -> [f64; 2] {
        let n = self.edge_normal(e);
        let s = self.boundary_normal_sign(e);
        [s * n[0], s * n[1]]
    }

    pub fn edge_midpoint(&self, e: usize) -> [f64; 2] {
        let [a, b] = self.edges[e];
        let (pa, pb) = (self.vertices[a], self.vertices[b]);
        [0.5 * (pa[0] + pb[0]), 0.5 * (pa[1] + pb[1])]
    }

    /// Finds a cell containing `p` (boundary points are assigned to one of
    /// the adjacent cells).
    pub fn locate(&self, p: [f64; 2]) -> Option<usize> {
        if let Some((n, diag)) = self.structured {
            let tol = 1e-12;
            if p[0] < -tol || p[0] > 1.0 + tol || p[1] < -tol || p[1] > 1.0 + tol {
                return None;
            }
            let nf = n as f64;
            let i = ((p[0] * nf).floor().max(0.0) as usize).min(n - 1);
            let j = ((p[1] * nf).floor().max(0.0) as usize).min(n - 1);
            let (lx, ly) = (p[0] * nf - i as f64, p[1] * nf - j as f64);
            let base = 2 * (j * n + i);
            let second = match diag {
                Diagonal::Forward => ly > lx,
                Diagonal::Backward => lx + ly > 1.0,
            };
            return Some(base + usize::from(second));
        }
        (0..self.num_cells()).find(|&c| {
            let v = self.cell_vertices(c);
            let l = barycentric(&v, p);
            l.iter().all(|&x| x >= -1e-12)
        })
    }
}

fn signed_area(vertices: &[[f64; 2]], cell: &[usize; 3]) -> f64 {
    let (a, b, c) = (vertices[cell[0]], vertices[cell[1]], vertices[cell[2]]);
    0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
}

fn barycentric(v: &[[f64; 2]; 3], p: [f64; 2]) -> [f64; 3] {
    let det = (v[1][0] - v[0][0]) * (v[2][1] - v[0][1]) - (v[2][0] - v[0][0]) * (v[1][1] - v[0][1]);
    let l1 = ((p[0] - v[0][0]) * (v[2][1] - v[0][1]) - (v[2][0] - v[0][0]) * (p[1] - v[0][1])) / det;
    let l2 = ((v[1][0] - v[0][0]) * (p[1] - v[0][1]) - (p[0] - v[0][0]) * (v[1][1] - v[0][1])) / det;
    [1.0 - l1 - l2, l1, l2]
}

/// Split of the boundary edges into displacement/traction parts and
/// pressure/flux parts.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct BoundaryPartition {
    pub gamma_d: Vec<usize>,
    pub gamma_t: Vec<usize>,
    pub gamma_p: Vec<usize>,
    pub gamma_f: Vec<usize>,
}

impl BoundaryPartition {
    /// Displacement and pressure prescribed on the whole boundary.
    pub fn all_dirichlet(mesh: &Mesh) -> Self {
        let all: Vec<usize> = mesh.boundary_edges().iter().map(|&(e, _)| e).collect();
        BoundaryPartition {
            gamma_d: all.clone(),
            gamma_t: Vec::new(),
            gamma_p: all,
            gamma_f: Vec::new(),
        }
    }

    /// Assigns edges by side: sides in `traction_sides` go to `gamma_t`, the
    /// rest to `gamma_d`; likewise `flux_sides` splits `gamma_f`/`gamma_p`.
    pub fn by_sides(mesh: &Mesh, traction_sides: &[Side], flux_sides: &[Side]) -> Self {
        let mut part = BoundaryPartition::default();
        for &(e, side) in mesh.boundary_edges() {
            if traction_sides.contains(&side) {
                part.gamma_t.push(e);
            } else {
                part.gamma_d.push(e);
            }
            if flux_sides.contains(&side) {
                part.gamma_f.push(e);
            } else {
                part.gamma_p.push(e);
            }
        }
        part
    }

    /// Checks that both pairs partition the boundary edges of `mesh`.
    pub fn validate(&self, mesh: &Mesh) -> Result<(), MeshError> {
        let nb = mesh.boundary_edges().len();
        for (name, a, b) in [("d/t", &self.gamma_d, &self.gamma_t), ("p/f", &self.gamma_p, &self.gamma_f)] {
            let mut seen = vec![false; mesh.num_edges()];
            for &e in a.iter().chain(b.iter()) {
                if e >= mesh.num_edges() || !mesh.is_boundary_edge(e) {
                    return Err(MeshError::Partition(format!("{name}: edge {e} is not a boundary edge")));
                }
                if seen[e] {
                    return Err(MeshError::Partition(format!("{name}: edge {e} listed twice")));
                }
                seen[e] = true;
            }
            if a.len() + b.len() != nb {
                return Err(MeshError::Partition(format!("{name}: does not cover the boundary")));
            }
        }
        Ok(())
    }
}
