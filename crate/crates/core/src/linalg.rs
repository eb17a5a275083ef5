//! Sparse storage and the direct solvers behind the global systems.
//!
//! Matrices are stored in compressed-column form with duplicate contributions
//! summed in insertion order, so assembling exactly symmetric local matrices
//! in a fixed element order yields an exactly symmetric global matrix.

use std::fmt::Write as _;

use faer::linalg::solvers::Solve;
use faer::sparse::{SparseColMat, Triplet};
use faer::{Mat, Side};
use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

/// Systems up to this size are solved densely by default.
pub const DENSE_LIMIT: usize = 2000;

#[derive(Clone, Debug, Default)]
pub struct TripletBuilder {
    nrows: usize,
    ncols: usize,
    entries: Vec<(usize, usize, f64)>,
}

impl TripletBuilder {
    pub fn new(nrows: usize, ncols: usize) -> Self {
        Self {
            nrows,
            ncols,
            entries: Vec::new(),
        }
    }

    pub fn push(&mut self, row: usize, col: usize, value: f64) {
        debug_assert!(row < self.nrows && col < self.ncols);
        self.entries.push((row, col, value));
    }

    pub fn build(mut self) -> CscMatrix {
        // stable: equal (col, row) keys keep insertion order
        self.entries.sort_by_key(|&(r, c, _)| (c, r));
        let mut col_ptr = vec![0usize; self.ncols + 1];
        let mut row_idx = Vec::new();
        let mut values: Vec<f64> = Vec::new();
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in self.entries {
            if last == Some((r, c)) {
                *values.last_mut().unwrap() += v;
            } else {
                row_idx.push(r);
                values.push(v);
                col_ptr[c + 1] += 1;
                last = Some((r, c));
            }
        }
        for c in 0..self.ncols {
            col_ptr[c + 1] += col_ptr[c];
        }
        CscMatrix {
            nrows: self.nrows,
            ncols: self.ncols,
            col_ptr,
            row_idx,
            values,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct CscMatrix {
    pub nrows: usize,
    pub ncols: usize,
    pub col_ptr: Vec<usize>,
    pub row_idx: Vec<usize>,
    pub values: Vec<f64>,
}

impl CscMatrix {
    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        let range = self.col_ptr[col]..self.col_ptr[col + 1];
        match self.row_idx[range.clone()].binary_search(&row) {
            Ok(i) => self.values[range.start + i],
            Err(_) => 0.0,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.ncols).flat_map(move |c| {
            (self.col_ptr[c]..self.col_ptr[c + 1]).map(move |i| (self.row_idx[i], c, self.values[i]))
        })
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols);
        let mut y = vec![0.0; self.nrows];
        for c in 0..self.ncols {
            let xc = x[c];
            if xc == 0.0 {
                continue;
            }
            for i in self.col_ptr[c]..self.col_ptr[c + 1] {
                y[self.row_idx[i]] += self.values[i] * xc;
            }
        }
        y
    }

    /// `b - K x` accumulated in double-double arithmetic, rounded once per row.
    pub fn residual_compensated(&self, b: &[f64], x: &[f64]) -> Vec<f64> {
        let mut hi = b.to_vec();
        let mut lo = vec![0.0; self.nrows];
        for (c, &xc) in x.iter().enumerate() {
            for idx in self.col_ptr[c]..self.col_ptr[c + 1] {
                let r = self.row_idx[idx];
                let p = -self.values[idx] * xc;
                let pe = (-self.values[idx]).mul_add(xc, -p);
                let s = hi[r] + p;
                let bb = s - hi[r];
                let se = (hi[r] - (s - bb)) + (p - bb);
                hi[r] = s;
                lo[r] += se + pe;
            }
        }
        hi.iter().zip(&lo).map(|(h, l)| h + l).collect()
    }

    pub fn transpose(&self) -> CscMatrix {
        let mut b = TripletBuilder::new(self.ncols, self.nrows);
        for (r, c, v) in self.iter() {
            b.push(c, r, v);
        }
        b.build()
    }

    /// Exact (bitwise) symmetry.
    pub fn is_symmetric(&self) -> bool {
        self.nrows == self.ncols && self.iter().all(|(r, c, v)| self.get(c, r) == v)
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.nrows, self.ncols);
        for (r, c, v) in self.iter() {
            m[(r, c)] = v;
        }
        m
    }

    pub fn norm_1(&self) -> f64 {
        (0..self.ncols)
            .map(|c| self.values[self.col_ptr[c]..self.col_ptr[c + 1]].iter().map(|v| v.abs()).sum())
            .fold(0.0, f64::max)
    }

    fn to_faer(&self) -> Result<SparseColMat<usize, f64>> {
        let triplets: Vec<Triplet<usize, usize, f64>> =
            self.iter().map(|(r, c, v)| Triplet::new(r, c, v)).collect();
        SparseColMat::try_new_from_triplets(self.nrows, self.ncols, &triplets)
            .map_err(|e| Error::SingularSystem(format!("sparse construction failed: {e:?}")))
    }

    /// Matrix Market coordinate format, general storage.
    pub fn to_matrix_market(&self) -> String {
        let mut s = String::new();
        writeln!(s, "%%MatrixMarket matrix coordinate real general").unwrap();
        writeln!(s, "{} {} {}", self.nrows, self.ncols, self.nnz()).unwrap();
        for (r, c, v) in self.iter() {
            writeln!(s, "{} {} {:.17e}", r + 1, c + 1, v).unwrap();
        }
        s
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Backend {
    /// Dense for systems up to [`DENSE_LIMIT`], sparse otherwise.
    #[default]
    Auto,
    Dense,
    Sparse,
}

#[derive(Clone, Debug)]
pub struct SolveReport {
    pub solution: Vec<f64>,
    /// `‖K x - b‖₂ / ‖b‖₂` (absolute when `b = 0`).
    pub residual: f64,
    /// 1-norm condition estimate of the equilibrated matrix.
    pub condition: f64,
}

enum Factor {
    /// LU of the matrix and of its transpose.
    Dense(Box<[nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>; 2]>),
    DenseChol(nalgebra::Cholesky<f64, nalgebra::Dyn>),
    SparseLu(faer::sparse::linalg::solvers::Lu<usize, f64>),
    SparseChol(faer::sparse::linalg::solvers::Llt<usize, f64>),
}

impl Factor {
    fn solve(&self, b: &[f64]) -> Vec<f64> {
        match self {
            Factor::Dense(lu) => dense_solve(&lu[0], b),
            Factor::DenseChol(c) => c.solve(&DVector::from_column_slice(b)).as_slice().to_vec(),
            Factor::SparseLu(lu) => from_faer(&lu.solve(to_faer_col(b))),
            Factor::SparseChol(c) => from_faer(&c.solve(to_faer_col(b))),
        }
    }

    fn solve_transpose(&self, b: &[f64]) -> Vec<f64> {
        match self {
            Factor::Dense(lu) => dense_solve(&lu[1], b),
            Factor::DenseChol(_) | Factor::SparseChol(_) => self.solve(b),
            Factor::SparseLu(lu) => from_faer(&lu.solve_transpose(to_faer_col(b))),
        }
    }
}

fn dense_solve(lu: &nalgebra::LU<f64, nalgebra::Dyn, nalgebra::Dyn>, b: &[f64]) -> Vec<f64> {
    lu.solve(&DVector::from_column_slice(b))
        .map(|x| x.as_slice().to_vec())
        .unwrap_or_else(|| vec![f64::NAN; b.len()])
}

fn to_faer_col(b: &[f64]) -> Mat<f64> {
    Mat::from_fn(b.len(), 1, |i, _| b[i])
}

fn from_faer(x: &Mat<f64>) -> Vec<f64> {
    (0..x.nrows()).map(|i| x[(i, 0)]).collect()
}

fn norm2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn factorize(matrix: &CscMatrix, backend: Backend, spd: bool) -> Result<Factor> {
    let n = matrix.nrows;
    let dense = match backend {
        Backend::Auto => n <= DENSE_LIMIT,
        Backend::Dense => true,
        Backend::Sparse => false,
    };
    if dense {
        let m = matrix.to_dense();
        if spd {
            return nalgebra::Cholesky::new(m)
                .map(Factor::DenseChol)
                .ok_or_else(|| Error::SingularSystem("matrix is not positive definite".into()));
        }
        let lu = m.clone().lu();
        if !lu.is_invertible() {
            return Err(Error::SingularSystem("dense LU found a zero pivot".into()));
        }
        return Ok(Factor::Dense(Box::new([lu, m.transpose().lu()])));
    }
    // sequential factorization keeps results bit-stable across thread counts
    faer::set_global_parallelism(faer::Par::Seq);
    let a = matrix.to_faer()?;
    if spd {
        a.sp_cholesky(Side::Lower)
            .map(Factor::SparseChol)
            .map_err(|e| Error::SingularSystem(format!("sparse Cholesky failed: {e:?}")))
    } else {
        a.sp_lu()
            .map(Factor::SparseLu)
            .map_err(|e| Error::SingularSystem(format!("sparse LU failed: {e:?}")))
    }
}

/// Hager's 1-norm estimate of `‖K⁻¹‖₁`.
fn inverse_norm_estimate(f: &Factor, n: usize) -> f64 {
    if n == 0 {
        return 0.0;
    }
    let mut x = vec![1.0 / n as f64; n];
    let mut est = 0.0;
    for _ in 0..5 {
        let y = f.solve(&x);
        est = y.iter().map(|v| v.abs()).sum();
        let xi: Vec<f64> = y.iter().map(|v| if *v >= 0.0 { 1.0 } else { -1.0 }).collect();
        let z = f.solve_transpose(&xi);
        let (jmax, zmax) = z
            .iter()
            .enumerate()
            .fold((0, 0.0f64), |(jm, zm), (j, v)| if v.abs() > zm { (j, v.abs()) } else { (jm, zm) });
        let ztx: f64 = z.iter().zip(&x).map(|(a, b)| a * b).sum();
        if zmax <= ztx {
            break;
        }
        x = vec![0.0; n];
        x[jmax] = 1.0;
    }
    est
}

/// Symmetric Ruiz scaling `d`: every row and column of `diag(d) K diag(d)`
/// has max-norm close to one.
fn equilibrate(matrix: &CscMatrix) -> Vec<f64> {
    let n = matrix.nrows;
    let mut d = vec![1.0; n];
    for _ in 0..8 {
        let mut row_max = vec![0.0f64; n];
        for (r, c, v) in matrix.iter() {
            let s = (d[r] * v * d[c]).abs();
            row_max[r] = row_max[r].max(s);
            row_max[c] = row_max[c].max(s);
        }
        let mut done = true;
        for (di, m) in d.iter_mut().zip(&row_max) {
            if *m > 0.0 {
                *di /= m.sqrt();
                done &= (m - 1.0).abs() < 1e-3;
            }
        }
        if done {
            break;
        }
    }
    d
}

fn scaled(matrix: &CscMatrix, d: &[f64]) -> CscMatrix {
    let mut out = matrix.clone();
    for c in 0..out.ncols {
        for idx in out.col_ptr[c]..out.col_ptr[c + 1] {
            out.values[idx] *= d[out.row_idx[idx]] * d[c];
        }
    }
    out
}

fn solve_impl(matrix: &CscMatrix, rhs: &[f64], backend: Backend, spd: bool) -> Result<SolveReport> {
    if matrix.nrows != matrix.ncols || rhs.len() != matrix.nrows {
        return Err(Error::DimensionMismatch {
            expected: matrix.nrows,
            got: rhs.len(),
        });
    }
    let d = equilibrate(matrix);
    let equilibrated = scaled(matrix, &d);
    let f = factorize(&equilibrated, backend, spd)?;
    let solve = |b: &[f64]| -> Vec<f64> {
        let db: Vec<f64> = b.iter().zip(&d).map(|(a, s)| a * s).collect();
        f.solve(&db).iter().zip(&d).map(|(a, s)| a * s).collect()
    };
    let mut x = solve(rhs);
    let bnorm = norm2(rhs);
    let scale = if bnorm > 0.0 { bnorm } else { 1.0 };
    let mut r = matrix.residual_compensated(rhs, &x);
    let mut residual = norm2(&r) / scale;
    for _ in 0..4 {
        if !residual.is_finite() || residual == 0.0 {
            break;
        }
        let dx = solve(&r);
        let refined: Vec<f64> = x.iter().zip(&dx).map(|(a, b)| a + b).collect();
        let rr = matrix.residual_compensated(rhs, &refined);
        let rn = norm2(&rr) / scale;
        if rn > residual {
            break;
        }
        let small = norm2(&dx) <= f64::EPSILON * norm2(&refined);
        x = refined;
        r = rr;
        residual = rn;
        if small {
            break;
        }
    }
    if !residual.is_finite() || x.iter().any(|v| !v.is_finite()) {
        return Err(Error::SingularSystem("solution is not finite".into()));
    }
    let condition = equilibrated.norm_1() * inverse_norm_estimate(&f, matrix.nrows);
    if condition > 1e14 {
        log::warn!("system is ill-conditioned: estimated 1-norm condition {condition:.3e}");
    }
    Ok(SolveReport {
        solution: x,
        residual,
        condition,
    })
}

/// General (possibly indefinite) square solve by LU with partial pivoting.
pub fn solve_general(matrix: &CscMatrix, rhs: &[f64], backend: Backend) -> Result<SolveReport> {
    solve_impl(matrix, rhs, backend, false)
}

/// Symmetric positive definite solve by Cholesky.
pub fn solve_spd(matrix: &CscMatrix, rhs: &[f64], backend: Backend) -> Result<SolveReport> {
    solve_impl(matrix, rhs, backend, true)
}
