//! Compressed sparse row matrices, Dirichlet-constrained linear systems and
//! direct sparse solves.

use std::collections::BTreeMap;
use std::sync::{Arc, Mutex, Once};

use faer::linalg::solvers::Solve;
use faer::sparse::linalg::solvers::{Llt, Lu, SymbolicLlt, SymbolicLu};
use faer::sparse::{SparseColMatRef, SymbolicSparseColMatRef};

use crate::error::{Error, Result};

/// Row pointers and sorted column indices, shared between matrices with the
/// same structure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CsrPattern {
    nrows: usize,
    ncols: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
}

impl CsrPattern {
    /// Builds a pattern from per-row column lists (duplicates allowed).
    pub fn from_rows(ncols: usize, mut rows: Vec<Vec<usize>>) -> Self {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let mut col_idx = Vec::new();
        row_ptr.push(0);
        for r in rows.iter_mut() {
            r.sort_unstable();
            r.dedup();
            debug_assert!(r.last().is_none_or(|&c| c < ncols));
            col_idx.extend_from_slice(r);
            row_ptr.push(col_idx.len());
        }
        Self {
            nrows: rows.len(),
            ncols,
            row_ptr,
            col_idx,
        }
    }

    pub fn nnz(&self) -> usize {
        self.col_idx.len()
    }

    /// Storage position of entry `(i, j)`.
    #[inline]
    pub fn position(&self, i: usize, j: usize) -> Option<usize> {
        let (lo, hi) = (self.row_ptr[i], self.row_ptr[i + 1]);
        self.col_idx[lo..hi].binary_search(&j).ok().map(|k| lo + k)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    pattern: Arc<CsrPattern>,
    values: Vec<f64>,
}

impl CsrMatrix {
    pub fn zeros(pattern: Arc<CsrPattern>) -> Self {
        let values = vec![0.0; pattern.nnz()];
        Self { pattern, values }
    }

    pub fn identity(n: usize) -> Self {
        let pattern = CsrPattern {
            nrows: n,
            ncols: n,
            row_ptr: (0..=n).collect(),
            col_idx: (0..n).collect(),
        };
        Self {
            pattern: Arc::new(pattern),
            values: vec![1.0; n],
        }
    }

    pub fn pattern(&self) -> &Arc<CsrPattern> {
        &self.pattern
    }

    pub fn nrows(&self) -> usize {
        self.pattern.nrows
    }

    pub fn ncols(&self) -> usize {
        self.pattern.ncols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    /// Adds `v` to entry `(i, j)`, which must be in the pattern.
    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        let k = self
            .pattern
            .position(i, j)
            .unwrap_or_else(|| panic!("entry ({i}, {j}) is outside the sparsity pattern"));
        self.values[k] += v;
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.pattern.position(i, j).map_or(0.0, |k| self.values[k])
    }

    /// Column indices and values of row `i`.
    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (lo, hi) = (self.pattern.row_ptr[i], self.pattern.row_ptr[i + 1]);
        (&self.pattern.col_idx[lo..hi], &self.values[lo..hi])
    }

    pub fn mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.ncols());
        (0..self.nrows())
            .map(|i| {
                let (c, v) = self.row(i);
                c.iter().zip(v).map(|(&j, a)| a * x[j]).sum()
            })
            .collect()
    }

    /// `A^T x`.
    pub fn tr_mul_vec(&self, x: &[f64]) -> Vec<f64> {
        assert_eq!(x.len(), self.nrows());
        let mut y = vec![0.0; self.ncols()];
        for (i, xi) in x.iter().enumerate() {
            let (c, v) = self.row(i);
            for (&j, a) in c.iter().zip(v) {
                y[j] += a * xi;
            }
        }
        y
    }

    /// `x^T A y`.
    pub fn bilinear(&self, x: &[f64], y: &[f64]) -> f64 {
        self.mul_vec(y).iter().zip(x).map(|(a, b)| a * b).sum()
    }

    pub fn scale(&mut self, s: f64) {
        self.values.iter_mut().for_each(|v| *v *= s);
    }

    /// `self += s * other`; both must share the same pattern.
    pub fn axpy(&mut self, s: f64, other: &CsrMatrix) {
        assert!(
            Arc::ptr_eq(&self.pattern, &other.pattern) || self.pattern == other.pattern,
            "axpy on different sparsity patterns"
        );
        for (a, b) in self.values.iter_mut().zip(&other.values) {
            *a += s * b;
        }
    }

    /// Largest `|A_ij - A_ji|` relative to the largest entry.
    pub fn asymmetry(&self) -> f64 {
        let scale = self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if scale == 0.0 {
            return 0.0;
        }
        let mut worst = 0.0f64;
        for i in 0..self.nrows() {
            let (c, v) = self.row(i);
            for (&j, a) in c.iter().zip(v) {
                worst = worst.max((a - self.get(j, i)).abs());
            }
        }
        worst / scale
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.nrows(), self.ncols());
        for i in 0..self.nrows() {
            let (c, v) = self.row(i);
            for (&j, a) in c.iter().zip(v) {
                m[(i, j)] += a;
            }
        }
        m
    }

    /// Submatrix on the given rows and columns; `col_map[j]` is the new
    /// column of old column `j`, if kept.
    fn extract(&self, rows: &[usize], col_map: &[Option<usize>], ncols: usize) -> CsrMatrix {
        let mut row_ptr = Vec::with_capacity(rows.len() + 1);
        let mut col_idx = Vec::new();
        let mut values = Vec::new();
        row_ptr.push(0);
        for &i in rows {
            let (c, v) = self.row(i);
            for (&j, a) in c.iter().zip(v) {
                if let Some(nj) = col_map[j] {
                    col_idx.push(nj);
                    values.push(*a);
                }
            }
            row_ptr.push(col_idx.len());
        }
        CsrMatrix {
            pattern: Arc::new(CsrPattern {
                nrows: rows.len(),
                ncols,
                row_ptr,
                col_idx,
            }),
            values,
        }
    }
}

/// Coordinate-format accumulator; duplicates are summed on `build`.
#[derive(Debug, Clone)]
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

    #[inline]
    pub fn add(&mut self, i: usize, j: usize, v: f64) {
        debug_assert!(i < self.nrows && j < self.ncols);
        self.entries.push((i, j, v));
    }

    pub fn build(mut self) -> CsrMatrix {
        self.entries.sort_unstable_by_key(|&(i, j, _)| (i, j));
        let mut row_ptr = vec![0usize; self.nrows + 1];
        let mut col_idx = Vec::with_capacity(self.entries.len());
        let mut values: Vec<f64> = Vec::with_capacity(self.entries.len());
        let mut last = None;
        for &(i, j, v) in &self.entries {
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
        CsrMatrix {
            pattern: Arc::new(CsrPattern {
                nrows: self.nrows,
                ncols: self.ncols,
                row_ptr,
                col_idx,
            }),
            values,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Factorization {
    /// Sparse Cholesky; the matrix must be symmetric positive definite.
    Cholesky,
    /// Sparse LU with partial pivoting, for indefinite systems.
    Lu,
}

#[derive(Clone)]
enum Symbolic {
    Llt(SymbolicLlt<usize>),
    Lu(SymbolicLu<usize>),
}

/// Reuses the symbolic analysis across solves with an identical pattern.
#[derive(Default)]
pub struct SymbolicCache {
    slot: Mutex<Option<(Arc<CsrPattern>, Symbolic)>>,
}

impl std::fmt::Debug for SymbolicCache {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("SymbolicCache")
    }
}

fn sequential_faer() {
    static ONCE: Once = Once::new();
    ONCE.call_once(|| faer::set_global_parallelism(faer::Par::Seq));
}

pub const RESIDUAL_TOL: f64 = 1e-10;

fn norm(x: &[f64]) -> f64 {
    x.iter().map(|v| v * v).sum::<f64>().sqrt()
}

/// Solves `A x = b` with a direct sparse factorization, checking that the
/// relative residual is at most [`RESIDUAL_TOL`].
pub fn solve_sparse(
    a: &CsrMatrix,
    b: &[f64],
    kind: Factorization,
    cache: Option<&SymbolicCache>,
) -> Result<Vec<f64>> {
    let n = a.nrows();
    if a.ncols() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: a.ncols(),
        });
    }
    if b.len() != n {
        return Err(Error::DimensionMismatch {
            expected: n,
            found: b.len(),
        });
    }
    let bnorm = norm(b);
    if bnorm == 0.0 {
        return Ok(vec![0.0; n]);
    }
    if n == 0 {
        return Ok(Vec::new());
    }
    sequential_faer();
    let pat = a.pattern();
    // CSR of A is the CSC of A^T
    let sym = SymbolicSparseColMatRef::new_checked(n, n, &pat.row_ptr, None, &pat.col_idx);
    let mat = SparseColMatRef::new(sym, &a.values);
    let fail = |msg: String| Error::Solver {
        msg,
        residual: f64::NAN,
    };

    let cached = cache.and_then(|c| {
        let slot = c.slot.lock().unwrap();
        slot.as_ref()
            .filter(|(p, s)| {
                (Arc::ptr_eq(p, pat) || **p == **pat)
                    && matches!(
                        (s, kind),
                        (Symbolic::Llt(_), Factorization::Cholesky) | (Symbolic::Lu(_), Factorization::Lu)
                    )
            })
            .map(|(_, s)| s.clone())
    });
    let symbolic = match cached {
        Some(s) => s,
        None => {
            let s = match kind {
                Factorization::Cholesky => Symbolic::Llt(
                    SymbolicLlt::try_new(sym, faer::Side::Lower)
                        .map_err(|e| fail(format!("symbolic analysis: {e:?}")))?,
                ),
                Factorization::Lu => Symbolic::Lu(
                    SymbolicLu::try_new(sym).map_err(|e| fail(format!("symbolic analysis: {e:?}")))?,
                ),
            };
            if let Some(c) = cache {
                *c.slot.lock().unwrap() = Some((pat.clone(), s.clone()));
            }
            s
        }
    };

    enum Numeric {
        Llt(Llt<usize, f64>),
        Lu(Lu<usize, f64>),
    }
    let numeric = match symbolic {
        Symbolic::Llt(s) => Numeric::Llt(
            Llt::try_new_with_symbolic(s, mat, faer::Side::Lower)
                .map_err(|e| fail(format!("Cholesky breakdown: {e:?}")))?,
        ),
        Symbolic::Lu(s) => Numeric::Lu(
            Lu::try_new_with_symbolic(s, mat).map_err(|e| fail(format!("LU breakdown: {e:?}")))?,
        ),
    };
    let apply = |rhs: &mut [f64]| {
        let m = faer::MatMut::from_column_major_slice_mut(rhs, n, 1);
        match &numeric {
            Numeric::Llt(f) => f.solve_in_place(m),
            Numeric::Lu(f) => f.solve_transpose_in_place(m),
        }
    };

    let mut x = b.to_vec();
    apply(&mut x);
    let mut residual = f64::INFINITY;
    // a couple of refinement sweeps for poorly conditioned saddle systems
    for sweep in 0..3 {
        let ax = a.mul_vec(&x);
        let mut r: Vec<f64> = b.iter().zip(&ax).map(|(b, ax)| b - ax).collect();
        residual = norm(&r) / bnorm;
        if !residual.is_finite() || residual <= 1e-14 || sweep == 2 {
            break;
        }
        apply(&mut r);
        x.iter_mut().zip(&r).for_each(|(x, d)| *x += d);
    }
    if residual.is_finite() && residual <= RESIDUAL_TOL {
        Ok(x)
    } else {
        Err(Error::Solver {
            msg: "residual check failed (singular or ill-conditioned system)".into(),
            residual,
        })
    }
}

/// Matrix, right-hand side and fixed (Dirichlet) values.
///
/// Fixed dofs are eliminated symmetrically: the solve works on the free-free
/// block with `b_f - A_fc u_c` on the right.
#[derive(Debug, Clone)]
pub struct LinearSystem {
    pub matrix: CsrMatrix,
    pub rhs: Vec<f64>,
    fixed: BTreeMap<usize, f64>,
}

impl LinearSystem {
    pub fn new(matrix: CsrMatrix, rhs: Vec<f64>) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || rhs.len() != matrix.nrows() {
            return Err(Error::DimensionMismatch {
                expected: matrix.nrows(),
                found: rhs.len(),
            });
        }
        Ok(Self {
            matrix,
            rhs,
            fixed: BTreeMap::new(),
        })
    }

    pub fn fix(&mut self, dof: usize, value: f64) {
        self.fixed.insert(dof, value);
    }

    pub fn fixed(&self) -> &BTreeMap<usize, f64> {
        &self.fixed
    }

    /// The reduced free-free system and the free dof list.
    pub fn reduced(&self) -> (CsrMatrix, Vec<f64>, Vec<usize>) {
        let n = self.rhs.len();
        let mut col_map = vec![None; n];
        let mut free = Vec::with_capacity(n - self.fixed.len());
        for i in 0..n {
            if !self.fixed.contains_key(&i) {
                col_map[i] = Some(free.len());
                free.push(i);
            }
        }
        let a_ff = self.matrix.extract(&free, &col_map, free.len());
        let rhs = free
            .iter()
            .map(|&i| {
                let (c, v) = self.matrix.row(i);
                let lifted: f64 = c
                    .iter()
                    .zip(v)
                    .filter_map(|(j, a)| self.fixed.get(j).map(|u| a * u))
                    .sum();
                self.rhs[i] - lifted
            })
            .collect();
        (a_ff, rhs, free)
    }

    pub fn solve(&self, kind: Factorization, cache: Option<&SymbolicCache>) -> Result<Vec<f64>> {
        let (a, b, free) = self.reduced();
        let xf = solve_sparse(&a, &b, kind, cache)?;
        let mut x = vec![0.0; self.rhs.len()];
        for (&i, v) in &self.fixed {
            x[i] = *v;
        }
        for (k, &i) in free.iter().enumerate() {
            x[i] = xf[k];
        }
        Ok(x)
    }
}
