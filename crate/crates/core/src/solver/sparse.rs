use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::Mat;
use nalgebra::{DMatrix, DVector};

use crate::{Error, Result};

/// Square or rectangular sparse matrix in compressed sparse row format.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    values: Vec<f64>,
}

impl SparseMatrix {
    /// Builds the matrix from `(row, col, value)` entries; duplicates are
    /// summed in input order.
    pub fn from_triplets(nrows: usize, ncols: usize, mut entries: Vec<(usize, usize, f64)>) -> Result<Self> {
        if let Some(&(i, j, _)) = entries.iter().find(|(i, j, _)| *i >= nrows || *j >= ncols) {
            return Err(Error::InvalidParameter(format!(
                "entry ({i}, {j}) outside a {nrows}×{ncols} matrix"
            )));
        }
        // Stable sort keeps the summation order deterministic.
        entries.sort_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0; nrows + 1];
        let mut col_idx = Vec::with_capacity(entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(entries.len());
        let mut last = None;
        for (i, j, v) in entries {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
            } else {
                col_idx.push(j);
                values.push(v);
                row_ptr[i + 1] += 1;
                last = Some((i, j));
            }
        }
        for i in 0..nrows {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(Self {
            nrows,
            ncols,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn nrows(&self) -> usize {
        self.nrows
    }

    pub fn ncols(&self) -> usize {
        self.ncols
    }

    /// Number of stored entries.
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// Iterates over `(row, col, value)` in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.nrows).flat_map(move |i| {
            (self.row_ptr[i]..self.row_ptr[i + 1]).map(move |p| (i, self.col_idx[p], self.values[p]))
        })
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let range = self.row_ptr[i]..self.row_ptr[i + 1];
        match self.col_idx[range.clone()].binary_search(&j) {
            Ok(p) => self.values[range.start + p],
            Err(_) => 0.0,
        }
    }

    pub fn mul_vec(&self, x: &DVector<f64>) -> DVector<f64> {
        assert_eq!(x.len(), self.ncols, "dimension mismatch in sparse product");
        DVector::from_fn(self.nrows, |i, _| {
            (self.row_ptr[i]..self.row_ptr[i + 1])
                .map(|p| self.values[p] * x[self.col_idx[p]])
                .sum()
        })
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for (i, j, v) in self.iter() {
            m[(i, j)] += v;
        }
        m
    }

    /// Largest absolute entry.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |a, v| a.max(v.abs()))
    }
}

/// Factor-and-solve interface for square sparse systems.
pub trait LinearSolver: Send + Sync {
    fn name(&self) -> &'static str;
    fn solve(&self, a: &SparseMatrix, b: &DVector<f64>) -> Result<DVector<f64>>;

    /// Solves for every column of `b`.
    fn solve_columns(&self, a: &SparseMatrix, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let mut x = DMatrix::zeros(b.nrows(), b.ncols());
        for j in 0..b.ncols() {
            x.set_column(j, &self.solve(a, &b.column(j).into_owned())?);
        }
        Ok(x)
    }
}

fn check_square(a: &SparseMatrix, b: &DVector<f64>) -> Result<()> {
    if a.nrows() != a.ncols() {
        return Err(Error::LinearSolver(format!("matrix is {}×{}, not square", a.nrows(), a.ncols())));
    }
    if b.len() != a.nrows() {
        return Err(Error::SizeMismatch {
            expected: a.nrows(),
            got: b.len(),
        });
    }
    Ok(())
}

fn check_finite(x: DVector<f64>) -> Result<DVector<f64>> {
    if x.iter().all(|v| v.is_finite()) {
        Ok(x)
    } else {
        Err(Error::LinearSolver("singular matrix: non-finite solution".into()))
    }
}

/// Direct sparse LU factorization with partial pivoting.
#[derive(Clone, Copy, Debug, Default)]
pub struct SparseLu;

impl LinearSolver for SparseLu {
    fn name(&self) -> &'static str {
        "sparse-lu"
    }

    fn solve(&self, a: &SparseMatrix, b: &DVector<f64>) -> Result<DVector<f64>> {
        check_square(a, b)?;
        let x = self.solve_columns(a, &DMatrix::from_column_slice(b.len(), 1, b.as_slice()))?;
        Ok(x.column(0).into_owned())
    }

    fn solve_columns(&self, a: &SparseMatrix, b: &DMatrix<f64>) -> Result<DMatrix<f64>> {
        let n = a.nrows();
        if a.ncols() != n || b.nrows() != n {
            return Err(Error::SizeMismatch {
                expected: n,
                got: if a.ncols() != n { a.ncols() } else { b.nrows() },
            });
        }
        let trips: Vec<Triplet<usize, usize, f64>> = a.iter().map(|(i, j, v)| Triplet::new(i, j, v)).collect();
        let m = SparseColMat::<usize, f64>::try_new_from_triplets(n, n, &trips)
            .map_err(|e| Error::LinearSolver(format!("matrix creation failed: {e:?}")))?;
        let lu = m
            .sp_lu()
            .map_err(|e| Error::LinearSolver(format!("factorization failed: {e:?}")))?;
        let rhs = Mat::from_fn(n, b.ncols(), |i, j| b[(i, j)]);
        let x = lu.solve(&rhs);
        let out = DMatrix::from_fn(n, b.ncols(), |i, j| x[(i, j)]);
        if out.iter().all(|v| v.is_finite()) {
            Ok(out)
        } else {
            Err(Error::LinearSolver("singular matrix: non-finite solution".into()))
        }
    }
}

/// Dense LU, for small systems and cross-checks.
#[derive(Clone, Copy, Debug, Default)]
pub struct DenseLu;

impl LinearSolver for DenseLu {
    fn name(&self) -> &'static str {
        "dense-lu"
    }

    fn solve(&self, a: &SparseMatrix, b: &DVector<f64>) -> Result<DVector<f64>> {
        check_square(a, b)?;
        a.to_dense()
            .full_piv_lu()
            .solve(b)
            .ok_or_else(|| Error::LinearSolver("singular matrix".into()))
            .and_then(check_finite)
    }
}
