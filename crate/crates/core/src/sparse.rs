//! Square sparse matrices in compressed sparse row layout.
//!
//! A [`SparseMatrix`] is an immutable value: every operation returns a new
//! matrix. All constructors and kernels produce the canonical form (column
//! indices strictly increasing within each row, no stored zeros), so
//! `nnz()` is always the true number of nonzero entries.

use std::cell::Cell;
use std::fmt;

use crate::error::{Error, Result};

thread_local! {
    static PRODUCTS: Cell<u64> = const { Cell::new(0) };
}

/// Number of sparse matrix products formed on the current thread so far.
///
/// Used to audit multiplication counts of the evaluation schemes; take the
/// difference of two readings around the code of interest.
pub fn product_count() -> u64 {
    PRODUCTS.with(Cell::get)
}

#[derive(Clone, PartialEq)]
pub struct SparseMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<usize>,
    vals: Vec<f64>,
}

impl fmt::Debug for SparseMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("SparseMatrix")
            .field("n", &self.n)
            .field("nnz", &self.nnz())
            .finish()
    }
}

impl SparseMatrix {
    pub fn zeros(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::ZeroDimension);
        }
        Ok(SparseMatrix {
            n,
            row_ptr: vec![0; n + 1],
            col_idx: Vec::new(),
            vals: Vec::new(),
        })
    }

    pub fn identity(n: usize) -> Result<Self> {
        Self::diagonal(&vec![1.0; n])
    }

    pub fn diagonal(diag: &[f64]) -> Result<Self> {
        let n = diag.len();
        Self::from_triplets(n, diag.iter().enumerate().map(|(i, &v)| (i, i, v)))
    }

    /// Builds a matrix from `(row, col, value)` triplets in any order.
    /// Duplicates are summed and entries that end up exactly zero are dropped.
    pub fn from_triplets<I>(n: usize, triplets: I) -> Result<Self>
    where
        I: IntoIterator<Item = (usize, usize, f64)>,
    {
        if n == 0 {
            return Err(Error::ZeroDimension);
        }
        let mut rows: Vec<Vec<(usize, f64)>> = vec![Vec::new(); n];
        for (r, c, v) in triplets {
            if r >= n || c >= n {
                return Err(Error::IndexOutOfRange { row: r, col: c, n });
            }
            rows[r].push((c, v));
        }
        let mut m = SparseMatrix {
            n,
            row_ptr: Vec::with_capacity(n + 1),
            col_idx: Vec::new(),
            vals: Vec::new(),
        };
        m.row_ptr.push(0);
        for mut row in rows {
            row.sort_by_key(|&(c, _)| c);
            let mut iter = row.into_iter().peekable();
            while let Some((c, mut v)) = iter.next() {
                while let Some(&(c2, v2)) = iter.peek() {
                    if c2 != c {
                        break;
                    }
                    v += v2;
                    iter.next();
                }
                if v != 0.0 {
                    m.col_idx.push(c);
                    m.vals.push(v);
                }
            }
            m.row_ptr.push(m.col_idx.len());
        }
        Ok(m)
    }

    /// Builds a matrix from a row-major dense array of length `n * n`.
    pub fn from_dense(n: usize, data: &[f64]) -> Result<Self> {
        if data.len() != n * n {
            return Err(Error::LengthMismatch {
                expected: n * n,
                found: data.len(),
            });
        }
        Self::from_triplets(
            n,
            data.iter()
                .enumerate()
                .filter(|(_, &v)| v != 0.0)
                .map(|(k, &v)| (k / n, k % n, v)),
        )
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.n * self.n];
        for (r, c, v) in self.iter() {
            out[r * self.n + c] = v;
        }
        out
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row_ptr(&self) -> &[usize] {
        &self.row_ptr
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_idx
    }

    pub fn values(&self) -> &[f64] {
        &self.vals
    }

    /// Column indices and values of row `r`.
    pub fn row(&self, r: usize) -> (&[usize], &[f64]) {
        let span = self.row_ptr[r]..self.row_ptr[r + 1];
        (&self.col_idx[span.clone()], &self.vals[span])
    }

    /// Iterates stored entries in row-major order.
    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, f64)> + '_ {
        (0..self.n).flat_map(move |r| {
            let (cols, vals) = self.row(r);
            cols.iter().zip(vals).map(move |(&c, &v)| (r, c, v))
        })
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let (cols, vals) = self.row(r);
        match cols.binary_search(&c) {
            Ok(k) => vals[k],
            Err(_) => 0.0,
        }
    }

    /// nnz / n².
    pub fn sparsity(&self) -> f64 {
        self.nnz() as f64 / (self.n as f64 * self.n as f64)
    }

    pub fn is_zero(&self) -> bool {
        self.vals.is_empty()
    }

    pub fn is_finite(&self) -> bool {
        self.vals.iter().all(|v| v.is_finite())
    }

    /// Absolute column sums.
    pub fn column_abs_sums(&self) -> Vec<f64> {
        let mut sums = vec![0.0; self.n];
        for (&c, &v) in self.col_idx.iter().zip(&self.vals) {
            sums[c] += v.abs();
        }
        sums
    }

    /// Maximum absolute column sum.
    pub fn one_norm(&self) -> f64 {
        self.column_abs_sums().into_iter().fold(0.0, f64::max)
    }

    pub fn scale(&self, s: f64) -> SparseMatrix {
        if s == 0.0 {
            return SparseMatrix::zeros(self.n).expect("n >= 1");
        }
        let mut out = self.clone();
        out.vals.iter_mut().for_each(|v| *v *= s);
        out.canonicalize_values();
        out
    }

    /// Entrywise absolute value.
    pub fn abs(&self) -> SparseMatrix {
        let mut out = self.clone();
        out.vals.iter_mut().for_each(|v| *v = v.abs());
        out
    }

    /// Removes entries that became exactly zero (underflow or cancellation).
    fn canonicalize_values(&mut self) {
        if self.vals.iter().all(|&v| v != 0.0) {
            return;
        }
        let mut write = 0;
        let mut new_ptr = Vec::with_capacity(self.n + 1);
        new_ptr.push(0);
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                if self.vals[k] != 0.0 {
                    self.col_idx[write] = self.col_idx[k];
                    self.vals[write] = self.vals[k];
                    write += 1;
                }
            }
            new_ptr.push(write);
        }
        self.col_idx.truncate(write);
        self.vals.truncate(write);
        self.row_ptr = new_ptr;
    }

    fn check_same_dim(&self, other: &SparseMatrix) -> Result<()> {
        if self.n != other.n {
            return Err(Error::DimensionMismatch {
                left: self.n,
                right: other.n,
            });
        }
        Ok(())
    }

    /// Sparse product `self * other`, accumulated row by row in a dense
    /// scratch row.
    pub fn matmul(&self, other: &SparseMatrix) -> Result<SparseMatrix> {
        self.check_same_dim(other)?;
        PRODUCTS.with(|c| c.set(c.get() + 1));
        let n = self.n;
        let mut acc = vec![0.0; n];
        let mut mark = vec![usize::MAX; n];
        let mut touched: Vec<usize> = Vec::with_capacity(n);
        let mut out = SparseMatrix {
            n,
            row_ptr: Vec::with_capacity(n + 1),
            col_idx: Vec::with_capacity(self.nnz().max(other.nnz())),
            vals: Vec::with_capacity(self.nnz().max(other.nnz())),
        };
        out.row_ptr.push(0);
        for r in 0..n {
            touched.clear();
            let (a_cols, a_vals) = self.row(r);
            for (&k, &a) in a_cols.iter().zip(a_vals) {
                let (b_cols, b_vals) = other.row(k);
                for (&c, &b) in b_cols.iter().zip(b_vals) {
                    if mark[c] != r {
                        mark[c] = r;
                        acc[c] = a * b;
                        touched.push(c);
                    } else {
                        acc[c] += a * b;
                    }
                }
            }
            touched.sort_unstable();
            for &c in &touched {
                let v = acc[c];
                if v != 0.0 {
                    out.col_idx.push(c);
                    out.vals.push(v);
                }
            }
            out.row_ptr.push(out.col_idx.len());
        }
        Ok(out)
    }

    /// `s * self + t * other`, with exactly cancelling entries removed.
    pub fn add_scaled(&self, s: f64, other: &SparseMatrix, t: f64) -> Result<SparseMatrix> {
        self.check_same_dim(other)?;
        let n = self.n;
        let mut out = SparseMatrix {
            n,
            row_ptr: Vec::with_capacity(n + 1),
            col_idx: Vec::with_capacity(self.nnz() + other.nnz()),
            vals: Vec::with_capacity(self.nnz() + other.nnz()),
        };
        out.row_ptr.push(0);
        let push = |out: &mut SparseMatrix, c: usize, v: f64| {
            if v != 0.0 {
                out.col_idx.push(c);
                out.vals.push(v);
            }
        };
        for r in 0..n {
            let (ac, av) = self.row(r);
            let (bc, bv) = other.row(r);
            let (mut i, mut j) = (0, 0);
            while i < ac.len() || j < bc.len() {
                if j == bc.len() || (i < ac.len() && ac[i] < bc[j]) {
                    push(&mut out, ac[i], s * av[i]);
                    i += 1;
                } else if i == ac.len() || bc[j] < ac[i] {
                    push(&mut out, bc[j], t * bv[j]);
                    j += 1;
                } else {
                    push(&mut out, ac[i], s * av[i] + t * bv[j]);
                    i += 1;
                    j += 1;
                }
            }
            out.row_ptr.push(out.col_idx.len());
        }
        Ok(out)
    }

    pub fn sub(&self, other: &SparseMatrix) -> Result<SparseMatrix> {
        self.add_scaled(1.0, other, -1.0)
    }

    /// `identity_coef * I + Σ coef * M` over `terms`, formed in one pass.
    /// Terms are accumulated in the order given.
    pub fn linear_combination(
        n: usize,
        identity_coef: f64,
        terms: &[(f64, &SparseMatrix)],
    ) -> Result<SparseMatrix> {
        if n == 0 {
            return Err(Error::ZeroDimension);
        }
        for (_, m) in terms {
            if m.n != n {
                return Err(Error::DimensionMismatch {
                    left: n,
                    right: m.n,
                });
            }
        }
        let mut acc = vec![0.0; n];
        let mut mark = vec![usize::MAX; n];
        let mut touched = Vec::with_capacity(n);
        let mut out = SparseMatrix {
            n,
            row_ptr: Vec::with_capacity(n + 1),
            col_idx: Vec::new(),
            vals: Vec::new(),
        };
        out.row_ptr.push(0);
        for r in 0..n {
            touched.clear();
            if identity_coef != 0.0 {
                mark[r] = r;
                acc[r] = identity_coef;
                touched.push(r);
            }
            for &(coef, m) in terms {
                if coef == 0.0 {
                    continue;
                }
                let (cols, vals) = m.row(r);
                for (&c, &v) in cols.iter().zip(vals) {
                    if mark[c] != r {
                        mark[c] = r;
                        acc[c] = coef * v;
                        touched.push(c);
                    } else {
                        acc[c] += coef * v;
                    }
                }
            }
            touched.sort_unstable();
            for &c in &touched {
                if acc[c] != 0.0 {
                    out.col_idx.push(c);
                    out.vals.push(acc[c]);
                }
            }
            out.row_ptr.push(out.col_idx.len());
        }
        Ok(out)
    }

    /// Keeps the entries whose flag in `keep` (indexed like [`values`](Self::values)) is set.
    pub fn select(&self, keep: &[bool]) -> SparseMatrix {
        debug_assert_eq!(keep.len(), self.nnz());
        let mut out = SparseMatrix {
            n: self.n,
            row_ptr: Vec::with_capacity(self.n + 1),
            col_idx: Vec::new(),
            vals: Vec::new(),
        };
        out.row_ptr.push(0);
        for r in 0..self.n {
            for k in self.row_ptr[r]..self.row_ptr[r + 1] {
                if keep[k] {
                    out.col_idx.push(self.col_idx[k]);
                    out.vals.push(self.vals[k]);
                }
            }
            out.row_ptr.push(out.col_idx.len());
        }
        out
    }

    pub fn matvec(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_len(x)?;
        Ok((0..self.n)
            .map(|r| {
                let (cols, vals) = self.row(r);
                cols.iter().zip(vals).map(|(&c, &v)| v * x[c]).sum()
            })
            .collect())
    }

    pub fn matvec_transpose(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.check_len(x)?;
        let mut y = vec![0.0; self.n];
        for r in 0..self.n {
            let xr = x[r];
            if xr == 0.0 {
                continue;
            }
            let (cols, vals) = self.row(r);
            for (&c, &v) in cols.iter().zip(vals) {
                y[c] += v * xr;
            }
        }
        Ok(y)
    }

    fn check_len(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.n {
            return Err(Error::LengthMismatch {
                expected: self.n,
                found: x.len(),
            });
        }
        Ok(())
    }
}
