//! Sparse storage and the direct solver.
//!
//! Assembly accumulates [`TripletMatrix`] entries, which are compressed into
//! a [`CsrMatrix`] with duplicates summed. Factorization is delegated to the
//! sparse LU of `faer`.

use faer::prelude::*;
use faer::sparse::linalg::solvers::Lu;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;

use crate::error::{Result, VemError};

#[derive(Clone, Debug, Default)]
pub struct TripletMatrix {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletMatrix {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        TripletMatrix {
            nrows,
            ncols,
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, i: usize, j: usize, v: f64) {
        assert!(i < self.nrows && j < self.ncols, "entry ({i}, {j}) outside {}x{}", self.nrows, self.ncols);
        if v != 0.0 {
            self.entries.push((i, j, v));
        }
    }

    /// Scatters `block[(a, b)]` to `(rows[a], cols[b])`, skipping rows or
    /// columns mapped to `None`.
    pub fn add_block(&mut self, rows: &[Option<usize>], cols: &[Option<usize>], block: &nalgebra::DMatrix<f64>) {
        for (a, r) in rows.iter().enumerate() {
            let Some(r) = *r else { continue };
            for (b, c) in cols.iter().enumerate() {
                if let Some(c) = *c {
                    self.push(r, c, block[(a, b)]);
                }
            }
        }
    }

    pub fn append(&mut self, other: TripletMatrix) {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        self.entries.extend(other.entries);
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn to_csr(&self) -> CsrMatrix {
        CsrMatrix::from_triplets(self.nrows, self.ncols, &self.entries)
    }
}

/// Compressed sparse row matrix with sorted, unique column indices per row.
#[derive(Clone, Debug, PartialEq)]
pub struct CsrMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Duplicates are summed in input order, so the result is deterministic
    /// for a deterministic input sequence.
    pub fn from_triplets(nrows: usize, ncols: usize, entries: &[(usize, usize, f64)]) -> Self {
        let mut count = vec![0usize; nrows + 1];
        for &(i, _, _) in entries {
            count[i + 1] += 1;
        }
        for i in 0..nrows {
            count[i + 1] += count[i];
        }
        let mut next = count.clone();
        let mut tmp = vec![(0usize, 0.0); entries.len()];
        for &(i, j, v) in entries {
            tmp[next[i]] = (j, v);
            next[i] += 1;
        }
        let mut row_ptr = Vec::with_capacity(nrows + 1);
        let mut col_idx = Vec::with_capacity(entries.len());
        let mut values = Vec::with_capacity(entries.len());
        row_ptr.push(0);
        for i in 0..nrows {
            let row = &mut tmp[count[i]..count[i + 1]];
            // stable sort keeps the summation order of duplicates fixed
            row.sort_by_key(|&(j, _)| j);
            for &(j, v) in row.iter() {
                if col_idx.len() > row_ptr[i] && *col_idx.last().unwrap() == j {
                    *values.last_mut().unwrap() += v;
                } else {
                    col_idx.push(j);
                    values.push(v);
                }
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        }
    }

    pub fn identity(n: usize) -> Self {
        let e: Vec<_> = (0..n).map(|i| (i, i, 1.0)).collect();
        Self::from_triplets(n, n, &e)
    }

    pub fn from_dense(a: &nalgebra::DMatrix<f64>) -> Self {
        let mut e = Vec::new();
        for i in 0..a.nrows() {
            for j in 0..a.ncols() {
                if a[(i, j)] != 0.0 {
                    e.push((i, j, a[(i, j)]));
                }
            }
        }
        Self::from_triplets(a.nrows(), a.ncols(), &e)
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
            Ok(p) => self.values[r.start + p],
            Err(_) => 0.0,
        }
    }

    pub fn triplets(&self) -> Vec<(usize, usize, f64)> {
        (0..self.nrows).flat_map(|i| self.row(i).map(move |(j, v)| (i, j, v))).collect()
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        (0..self.nrows).map(|i| self.row(i).map(|(j, v)| v * x[j]).sum()).collect()
    }

    pub fn transpose(&self) -> CsrMatrix {
        let e: Vec<_> = self.triplets().into_iter().map(|(i, j, v)| (j, i, v)).collect();
        Self::from_triplets(self.ncols, self.nrows, &e)
    }

    /// `a·self + b·other`.
    pub fn combine(&self, a: f64, other: &CsrMatrix, b: f64) -> CsrMatrix {
        assert_eq!((self.nrows, self.ncols), (other.nrows, other.ncols));
        let mut e: Vec<_> = self.triplets().into_iter().map(|(i, j, v)| (i, j, a * v)).collect();
        e.extend(other.triplets().into_iter().map(|(i, j, v)| (i, j, b * v)));
        Self::from_triplets(self.nrows, self.ncols, &e)
    }

    /// Rows `rows` and columns `cols` of the matrix, renumbered in the given
    /// order.
    pub fn extract(&self, rows: &[usize], cols: &[usize]) -> CsrMatrix {
        let mut map = vec![usize::MAX; self.ncols];
        for (k, &c) in cols.iter().enumerate() {
            map[c] = k;
        }
        let mut e = Vec::new();
        for (k, &r) in rows.iter().enumerate() {
            for (j, v) in self.row(r) {
                if map[j] != usize::MAX {
                    e.push((k, map[j], v));
                }
            }
        }
        Self::from_triplets(rows.len(), cols.len(), &e)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// `max |a_ij − a_ji|`.
    pub fn symmetry_residual(&self) -> f64 {
        assert_eq!(self.nrows, self.ncols);
        let mut r: f64 = 0.0;
        for i in 0..self.nrows {
            for (j, v) in self.row(i) {
                r = r.max((v - self.get(j, i)).abs());
            }
        }
        r
    }

    pub fn quadratic_form(&self, x: &[f64]) -> f64 {
        self.matvec(x).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut a = nalgebra::DMatrix::zeros(self.nrows, self.ncols);
        for (i, j, v) in self.triplets() {
            a[(i, j)] = v;
        }
        a
    }

    fn inf_norm(&self) -> f64 {
        (0..self.nrows).map(|i| self.row(i).map(|(_, v)| v.abs()).sum::<f64>()).fold(0.0, f64::max)
    }
}

/// Reusable LU factorization of a square sparse matrix.
///
/// Solves take `&self`; the handle can be shared across threads for
/// read-only concurrent solves.
pub struct DirectSolver {
    matrix: CsrMatrix,
    lu: Lu<usize, f64>,
    norm: f64,
    tolerance: f64,
}

impl std::fmt::Debug for DirectSolver {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("DirectSolver")
            .field("n", &self.matrix.nrows)
            .field("nnz", &self.matrix.nnz())
            .finish()
    }
}

impl DirectSolver {
    pub fn factorize(matrix: &CsrMatrix) -> Result<Self> {
        if matrix.nrows != matrix.ncols {
            return Err(VemError::InvalidArgument(format!(
                "cannot factorize a {}x{} matrix",
                matrix.nrows, matrix.ncols
            )));
        }
        let trip: Vec<_> = matrix.triplets().into_iter().map(|(i, j, v)| Triplet::new(i, j, v)).collect();
        let csc = SparseColMat::<usize, f64>::try_new_from_triplets(matrix.nrows, matrix.ncols, &trip)
            .map_err(|e| VemError::SingularSystem(format!("sparse structure rejected: {e:?}")))?;
        let lu = csc
            .sp_lu()
            .map_err(|e| VemError::SingularSystem(format!("LU factorization failed: {e:?}")))?;
        Ok(DirectSolver {
            matrix: matrix.clone(),
            lu,
            norm: matrix.inf_norm(),
            tolerance: 1e-10,
        })
    }

    pub fn dim(&self) -> usize {
        self.matrix.nrows
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.matrix
    }

    /// Solves `A x = b`; fails if `‖Ax − b‖∞ > 1e-10 (‖A‖∞‖x‖∞ + ‖b‖∞)`.
    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.dim();
        if b.len() != n {
            return Err(VemError::InvalidArgument(format!("right-hand side has length {}, expected {n}", b.len())));
        }
        let rhs = Mat::<f64>::from_fn(n, 1, |i, _| b[i]);
        let sol = self.lu.solve(&rhs);
        let x: Vec<f64> = (0..n).map(|i| sol[(i, 0)]).collect();
        let ax = self.matrix.matvec(&x);
        let res = ax.iter().zip(b).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        let xn = x.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let bn = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if x.iter().any(|v| !v.is_finite()) || !res.is_finite() || res > self.tolerance * (self.norm * xn + bn) {
            return Err(VemError::SingularSystem(format!(
                "residual {res:e} exceeds tolerance (|A| {:e}, |x| {xn:e}, |b| {bn:e})",
                self.norm
            )));
        }
        Ok(x)
    }
}
