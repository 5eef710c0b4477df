//! Compressed-row matrices, block composition and the direct solver.
//!
//! Factorization is delegated to faer's supernodal LU (COLAMD ordering,
//! partial pivoting). The saddle-point systems here are symmetric indefinite,
//! so a pivoting LU is required.

use std::io::{self, Write};

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::LuError;
use faer::sparse::{SparseColMat, SymbolicSparseColMat};
use faer::MatMut;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SolverError {
    #[error("matrix is {0}x{1}, expected square")]
    NotSquare(usize, usize),
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("matrix is structurally singular (no pivot at step {index})")]
    Singular { index: usize },
    #[error("factorization is numerically singular (probe residual {residual:e})")]
    NumericallySingular { residual: f64 },
    #[error("factorization failed: {0}")]
    Backend(String),
}

/// Sparse matrix in compressed-row form. Column indices are sorted and
/// unique within each row.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

/// Coordinate-form accumulator; duplicates are summed on conversion.
#[derive(Debug, Clone, Default)]
pub struct TripletBuilder {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        TripletBuilder { nrows, ncols, entries: Vec::new() }
    }

    pub fn with_capacity(nrows: usize, ncols: usize, cap: usize) -> Self {
        TripletBuilder { nrows, ncols, entries: Vec::with_capacity(cap) }
    }

    #[inline]
    pub fn push(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.nrows && j < self.ncols);
        self.entries.push((i, j, v));
    }

    /// Adds `scale * m` with its top-left corner at `(row0, col0)`.
    pub fn add_block(&mut self, row0: usize, col0: usize, m: &CsrMatrix, scale: f64) {
        assert!(row0 + m.nrows <= self.nrows && col0 + m.ncols <= self.ncols, "block out of range");
        for i in 0..m.nrows {
            for (j, v) in m.row(i) {
                self.entries.push((row0 + i, col0 + j, scale * v));
            }
        }
    }

    /// Adds `scale * mᵀ` with its top-left corner at `(row0, col0)`.
    pub fn add_block_transposed(&mut self, row0: usize, col0: usize, m: &CsrMatrix, scale: f64) {
        assert!(row0 + m.ncols <= self.nrows && col0 + m.nrows <= self.ncols, "block out of range");
        for i in 0..m.nrows {
            for (j, v) in m.row(i) {
                self.entries.push((row0 + j, col0 + i, scale * v));
            }
        }
    }

    pub fn build(mut self) -> CsrMatrix {
        self.entries.sort_unstable_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0usize; self.nrows + 1];
        let mut col_idx = Vec::with_capacity(self.entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(self.entries.len());
        let mut last: Option<(usize, usize)> = None;
        for (i, j, v) in self.entries {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..self.nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        CsrMatrix { nrows: self.nrows, ncols: self.ncols, row_ptr, col_idx, values }
    }
}

impl CsrMatrix {
    pub fn zeros(nrows: usize, ncols: usize) -> Self {
        TripletBuilder::new(nrows, ncols).build()
    }

    pub fn identity(n: usize) -> Self {
        let mut t = TripletBuilder::new(n, n);
        for i in 0..n {
            t.push(i, i, 1.0);
        }
        t.build()
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        let mut t = TripletBuilder::new(nrows, ncols);
        for (i, r) in rows.iter().enumerate() {
            for (j, &v) in r.iter().enumerate() {
                if v != 0.0 {
                    t.push(i, j, v);
                }
            }
        }
        t.build()
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }
    pub fn ncols(&self) -> usize {
        self.ncols
    }
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        self.col_idx[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let r = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[r.clone()].binary_search(&j) {
            Ok(k) => self.values[r.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn transpose(&self) -> CsrMatrix {
        let mut counts = vec![0usize; self.ncols + 1];
        for &j in &self.col_idx {
            counts[j + 1] += 1;
        }
        for j in 0..self.ncols {
            counts[j + 1] += counts[j];
        }
        let row_ptr = counts.clone();
        let mut next = counts;
        let mut col_idx = vec![0usize; self.nnz()];
        let mut values = vec![0.0; self.nnz()];
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                let k = next[j];
                col_idx[k] = i;
                values[k] = v;
                next[j] += 1;
            }
        }
        CsrMatrix { nrows: self.ncols, ncols: self.nrows, row_ptr, col_idx, values }
    }

    /// `y = A x`
    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.nrows];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.values[k] * x[self.col_idx[k]];
            }
            *yi = s;
        }
    }

    /// `y += scale * A x`
    pub fn matvec_add(&self, x: &[f64], scale: f64, y: &mut [f64]) {
        assert_eq!(x.len(), self.ncols);
        assert_eq!(y.len(), self.nrows);
        for (i, yi) in y.iter_mut().enumerate() {
            let mut s = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                s += self.values[k] * x[self.col_idx[k]];
            }
            *yi += scale * s;
        }
    }

    /// `xᵀ A y`
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        self.matvec(y).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    /// Largest entrywise difference, treating missing entries as zero.
    pub fn max_abs_diff(&self, other: &CsrMatrix) -> f64 {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut worst: f64 = 0.0;
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                worst = worst.max((v - other.get(i, j)).abs());
            }
            for (j, v) in other.row(i) {
                worst = worst.max((v - self.get(i, j)).abs());
            }
        }
        worst
    }

    pub fn max_asymmetry(&self) -> f64 {
        self.max_abs_diff(&self.transpose())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn to_dense(&self) -> Vec<Vec<f64>> {
        let mut d = vec![vec![0.0; self.ncols]; self.nrows];
        for (i, row) in d.iter_mut().enumerate() {
            for (j, v) in self.row(i) {
                row[j] = v;
            }
        }
        d
    }

    /// Replaces rows and columns of `dofs` by the identity. Returns the
    /// removed column entries `(row, dof, value)` for right-hand-side lifting.
    pub fn constrain_symmetric(&self, dofs: &[usize]) -> (CsrMatrix, Vec<(usize, usize, f64)>) {
        assert_eq!(self.nrows, self.ncols);
        let mut fixed = vec![false; self.nrows];
        for &d in dofs {
            fixed[d] = true;
        }
        let mut t = TripletBuilder::with_capacity(self.nrows, self.ncols, self.nnz());
        let mut lifted = Vec::new();
        for i in 0..self.nrows {
            if fixed[i] {
                t.push(i, i, 1.0);
                continue;
            }
            for (j, v) in self.row(i) {
                if fixed[j] {
                    lifted.push((i, j, v));
                } else {
                    t.push(i, j, v);
                }
            }
        }
        (t.build(), lifted)
    }

    /// Writes the matrix in MatrixMarket coordinate format.
    pub fn write_matrix_market<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "%%MatrixMarket matrix coordinate real general")?;
        writeln!(w, "{} {} {}", self.nrows, self.ncols, self.nnz())?;
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                writeln!(w, "{} {} {:.17e}", i + 1, j + 1, v)?;
            }
        }
        Ok(())
    }

    fn to_faer(&self) -> SparseColMat<usize, f64> {
        // CSC of A is the CSR of Aᵀ
        let t = self.transpose();
        let symbolic = SymbolicSparseColMat::new_checked(self.nrows, self.ncols, t.row_ptr, None, t.col_idx);
        SparseColMat::new(symbolic, t.values)
    }
}

/// Factor-once, solve-many LU factorization.
pub struct DirectSolver {
    n: usize,
    lu: faer::sparse::linalg::solvers::Lu<usize, f64>,
}

impl std::fmt::Debug for DirectSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DirectSolver").field("n", &self.n).finish_non_exhaustive()
    }
}

impl DirectSolver {
    pub fn factorize(a: &CsrMatrix) -> Result<Self, SolverError> {
        use faer::sparse::linalg::solvers::{Lu, SymbolicLu};
        if a.nrows != a.ncols {
            return Err(SolverError::NotSquare(a.nrows, a.ncols));
        }
        let n = a.nrows;
        let fa = a.to_faer();
        let symbolic = SymbolicLu::try_new(fa.symbolic()).map_err(|e| SolverError::Backend(format!("{e:?}")))?;
        let lu = Lu::try_new_with_symbolic(symbolic, fa.as_ref()).map_err(|e| match e {
            LuError::SymbolicSingular { index } => SolverError::Singular { index },
            other => SolverError::Backend(format!("{other:?}")),
        })?;
        let solver = DirectSolver { n, lu };
        if n > 0 {
            // numerically singular matrices factor "successfully" with tiny or
            // zero pivots; a deterministic probe solve catches them
            let probe: Vec<f64> = (0..n).map(|i| 1.0 + ((i * 7919) % 13) as f64 / 13.0).collect();
            let b = a.matvec(&probe);
            let x = solver.solve(&b);
            let err = x.iter().zip(&probe).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt();
            let scale = probe.iter().map(|v| v * v).sum::<f64>().sqrt();
            let rel = err / scale;
            if !(rel < 1e-6) {
                return Err(SolverError::NumericallySingular { residual: rel });
            }
        }
        Ok(solver)
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, b: &[f64]) -> Vec<f64> {
        let mut x = b.to_vec();
        self.solve_in_place(&mut x);
        x
    }

    pub fn solve_in_place(&self, x: &mut [f64]) {
        assert_eq!(x.len(), self.n);
        let n = self.n;
        let rhs = MatMut::from_column_major_slice_mut(x, n, 1);
        self.lu.solve_in_place(rhs);
    }
}

/// Relative residual `‖Ax − b‖ / ‖b‖` (absolute when `b = 0`).
pub fn relative_residual(a: &CsrMatrix, x: &[f64], b: &[f64]) -> f64 {
    let ax = a.matvec(x);
    let r = ax.iter().zip(b).map(|(u, v)| (u - v) * (u - v)).sum::<f64>().sqrt();
    let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    if nb > 0.0 {
        r / nb
    } else {
        r
    }
}
