//! Small dense linear-algebra kernels backing the solver.
//!
//! Everything here is sized for desk-scale experiments (dimensions in the
//! tens to low hundreds), stores `f64` in column-major order, and favors
//! predictable, auditable numerics over speed:
//!
//! * LU factorization with partial pivoting, with an explicit relative pivot
//!   threshold for declaring singularity,
//! * spectral norms by power iteration on `MᵀM` with a fixed relative
//!   tolerance and iteration cap,
//! * condition numbers as the ratio of extreme singular values, the smallest
//!   obtained by power iteration on the explicit inverse.
//!
//! Shape mismatches are programming errors and panic; numerical trouble
//! (singularity, non-convergence, non-finite input) is reported as
//! [`Error`](crate::Error) values.

use crate::error::{Error, Result};

/// Relative pivot threshold for LU factorization: a pivot with magnitude
/// below `LU_PIVOT_REL_TOL * ‖A‖_F` is treated as zero and the matrix is
/// declared numerically singular.
pub const LU_PIVOT_REL_TOL: f64 = 1e-14;

/// Relative tolerance on the dominant-eigenvalue estimate at which power
/// iteration is declared converged.
pub const POWER_ITERATION_REL_TOL: f64 = 1e-10;

/// Iteration cap for power iteration; exceeding it yields
/// [`Error::NonConvergence`].
pub const POWER_ITERATION_MAX: usize = 10_000;

/// A matrix whose smallest singular value falls below
/// `SINGULAR_VALUE_REL_TOL * s_max` is declared numerically singular when
/// computing condition numbers.
pub const SINGULAR_VALUE_REL_TOL: f64 = 1e-14;

/// Dense column vector of `f64` with at least one entry.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseVector {
    data: Vec<f64>,
}

impl DenseVector {
    /// Wraps `data` as a vector. Panics if `data` is empty.
    pub fn from_vec(data: Vec<f64>) -> Self {
        assert!(!data.is_empty(), "DenseVector must have at least one entry");
        Self { data }
    }

    /// Wraps `data`, rejecting empty input and non-finite entries. Use this
    /// for values arriving from files or over FFI.
    pub fn validated(data: Vec<f64>) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::InvalidConfig("vector must not be empty".into()));
        }
        if let Some(pos) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("vector entry {pos}")));
        }
        Ok(Self { data })
    }

    /// Zero vector of length `n`.
    pub fn zeros(n: usize) -> Self {
        Self::from_vec(vec![0.0; n])
    }

    /// All-ones vector of length `n`.
    pub fn ones(n: usize) -> Self {
        Self::from_vec(vec![1.0; n])
    }

    /// Standard basis vector `e_i` (0-based) of length `n`.
    pub fn basis(n: usize, i: usize) -> Self {
        assert!(i < n, "basis index {i} out of range for length {n}");
        let mut data = vec![0.0; n];
        data[i] = 1.0;
        Self::from_vec(data)
    }

    /// Builds a vector entrywise from `f(i)`.
    pub fn from_fn(n: usize, mut f: impl FnMut(usize) -> f64) -> Self {
        Self::from_vec((0..n).map(&mut f).collect())
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        false // construction guarantees at least one entry
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn iter(&self) -> std::slice::Iter<'_, f64> {
        self.data.iter()
    }

    pub fn to_vec(&self) -> Vec<f64> {
        self.data.clone()
    }

    /// Euclidean inner product. Panics on length mismatch.
    pub fn dot(&self, other: &Self) -> f64 {
        assert_eq!(self.len(), other.len(), "dot: length mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a * b)
            .sum()
    }

    /// Euclidean norm.
    pub fn norm(&self) -> f64 {
        self.dot(self).sqrt()
    }

    /// Largest entry magnitude.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// True when every entry is finite.
    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.len(), other.len(), "add: length mismatch");
        Self::from_vec(self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect())
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!(self.len(), other.len(), "sub: length mismatch");
        Self::from_vec(self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect())
    }

    pub fn scale(&self, alpha: f64) -> Self {
        Self::from_vec(self.data.iter().map(|a| alpha * a).collect())
    }

    /// In-place `self += alpha * other`. Panics on length mismatch.
    pub fn axpy(&mut self, alpha: f64, other: &Self) {
        assert_eq!(self.len(), other.len(), "axpy: length mismatch");
        for (a, b) in self.data.iter_mut().zip(&other.data) {
            *a += alpha * b;
        }
    }
}

impl std::ops::Index<usize> for DenseVector {
    type Output = f64;
    fn index(&self, i: usize) -> &f64 {
        &self.data[i]
    }
}

impl std::ops::IndexMut<usize> for DenseVector {
    fn index_mut(&mut self, i: usize) -> &mut f64 {
        &mut self.data[i]
    }
}

/// Dense column-major matrix of `f64`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    /// Entry `(i, j)` lives at `data[i + j * rows]`.
    data: Vec<f64>,
}

impl DenseMatrix {
    /// Zero matrix of the given shape. Panics if either dimension is zero.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    /// Identity matrix of order `n`.
    pub fn identity(n: usize) -> Self {
        Self::scaled_identity(n, 1.0)
    }

    /// `s · I` of order `n`.
    pub fn scaled_identity(n: usize, s: f64) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.set(i, i, s);
        }
        m
    }

    /// Builds a matrix entrywise from `f(i, j)`.
    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut m = Self::zeros(rows, cols);
        for j in 0..cols {
            for i in 0..rows {
                m.set(i, j, f(i, j));
            }
        }
        m
    }

    /// Builds a matrix from row slices (convenient in tests). Panics if the
    /// rows are empty or ragged.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        assert!(!rows.is_empty(), "from_rows: no rows");
        let cols = rows[0].len();
        assert!(rows.iter().all(|r| r.len() == cols), "from_rows: ragged rows");
        Self::from_fn(rows.len(), cols, |i, j| rows[i][j])
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[i + j * self.rows]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        self.data[i + j * self.rows] = v;
    }

    /// Borrow of column `j` as a contiguous slice.
    pub fn column_slice(&self, j: usize) -> &[f64] {
        &self.data[j * self.rows..(j + 1) * self.rows]
    }

    /// Copy of column `j`.
    pub fn column(&self, j: usize) -> DenseVector {
        DenseVector::from_vec(self.column_slice(j).to_vec())
    }

    /// True when every entry is finite.
    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Largest entry magnitude.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    /// Largest entrywise difference `max |self − other|`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "shape mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }

    /// Matrix-vector product `A·x`.
    pub fn matvec(&self, x: &DenseVector) -> DenseVector {
        assert_eq!(self.cols, x.len(), "matvec: shape mismatch");
        let mut y = vec![0.0; self.rows];
        for j in 0..self.cols {
            let xj = x[j];
            let col = self.column_slice(j);
            for (yi, aij) in y.iter_mut().zip(col) {
                *yi += aij * xj;
            }
        }
        DenseVector::from_vec(y)
    }

    /// Transposed product `Aᵀ·x`.
    pub fn matvec_transpose(&self, x: &DenseVector) -> DenseVector {
        assert_eq!(self.rows, x.len(), "matvec_transpose: shape mismatch");
        DenseVector::from_fn(self.cols, |j| {
            self.column_slice(j)
                .iter()
                .zip(x.iter())
                .map(|(a, b)| a * b)
                .sum()
        })
    }

    /// Matrix product `A·B`.
    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.cols, other.rows, "matmul: shape mismatch");
        let mut out = Self::zeros(self.rows, other.cols);
        for j in 0..other.cols {
            for k in 0..self.cols {
                let bkj = other.get(k, j);
                if bkj == 0.0 {
                    continue;
                }
                let col = self.column_slice(k);
                let dst = &mut out.data[j * out.rows..(j + 1) * out.rows];
                for (d, a) in dst.iter_mut().zip(col) {
                    *d += a * bkj;
                }
            }
        }
        out
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |i, j| self.get(j, i))
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "add: shape mismatch");
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect();
        Self { rows: self.rows, cols: self.cols, data }
    }

    pub fn sub(&self, other: &Self) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "sub: shape mismatch");
        let data = self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect();
        Self { rows: self.rows, cols: self.cols, data }
    }

    pub fn scale(&self, alpha: f64) -> Self {
        let data = self.data.iter().map(|a| alpha * a).collect();
        Self { rows: self.rows, cols: self.cols, data }
    }

    /// In-place rank-one update `A += alpha · u vᵀ`.
    pub fn add_scaled_outer(&mut self, alpha: f64, u: &DenseVector, v: &DenseVector) {
        assert_eq!(self.rows, u.len(), "add_scaled_outer: row mismatch");
        assert_eq!(self.cols, v.len(), "add_scaled_outer: col mismatch");
        for j in 0..self.cols {
            let s = alpha * v[j];
            if s == 0.0 {
                continue;
            }
            let col = &mut self.data[j * self.rows..(j + 1) * self.rows];
            for (c, ui) in col.iter_mut().zip(u.iter()) {
                *c += s * ui;
            }
        }
    }

    /// Squared Euclidean norms of every column (the Frobenius norm squared is
    /// their sum).
    pub fn column_norms_sq(&self) -> Vec<f64> {
        (0..self.cols)
            .map(|j| self.column_slice(j).iter().map(|v| v * v).sum())
            .collect()
    }

    /// Frobenius norm `sqrt(Σ a_ij²)`.
    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    /// Spectral norm (largest singular value) by power iteration on `MᵀM`,
    /// run to relative tolerance [`POWER_ITERATION_REL_TOL`] on the
    /// eigenvalue estimate, capped at [`POWER_ITERATION_MAX`] iterations.
    pub fn spectral_norm(&self) -> Result<f64> {
        if !self.is_finite() {
            return Err(Error::NonFinite("spectral_norm input".into()));
        }
        if self.frobenius_norm() == 0.0 {
            return Ok(0.0);
        }
        // A stalled start vector (numerically inside the nullspace) is
        // retried from a different deterministic direction.
        for attempt in 0..3u64 {
            let mut v = pseudo_random_unit(self.cols, 0x9e37_79b9 + attempt);
            let mut prev = f64::NAN;
            for _ in 0..POWER_ITERATION_MAX {
                let g = self.matvec_transpose(&self.matvec(&v)); // MᵀM v
                let lambda = v.dot(&g); // Rayleigh quotient, ‖v‖ = 1
                if prev.is_finite()
                    && (lambda - prev).abs() <= POWER_ITERATION_REL_TOL * lambda.abs().max(f64::MIN_POSITIVE)
                {
                    return Ok(lambda.max(0.0).sqrt());
                }
                prev = lambda;
                let gnorm = g.norm();
                if gnorm == 0.0 {
                    break;
                }
                v = g.scale(1.0 / gnorm);
            }
        }
        Err(Error::NonConvergence(format!(
            "power iteration exceeded {POWER_ITERATION_MAX} iterations"
        )))
    }

    /// LU factorization with partial pivoting. A pivot below
    /// `LU_PIVOT_REL_TOL · ‖A‖_F` triggers [`Error::SingularMatrix`].
    pub fn lu(&self) -> Result<LuFactors> {
        assert!(self.is_square(), "lu: matrix must be square");
        let n = self.rows;
        let frob = self.frobenius_norm();
        if frob == 0.0 || !frob.is_finite() {
            return Err(Error::SingularMatrix(
                "zero or non-finite matrix has no LU factorization".into(),
            ));
        }
        let threshold = LU_PIVOT_REL_TOL * frob;
        let mut lu = self.clone();
        let mut perm: Vec<usize> = (0..n).collect();
        for k in 0..n {
            // Partial pivoting: bring the largest remaining entry of column k
            // to the diagonal.
            let mut p = k;
            let mut best = lu.get(k, k).abs();
            for i in (k + 1)..n {
                let v = lu.get(i, k).abs();
                if v > best {
                    best = v;
                    p = i;
                }
            }
            if !(best > threshold) {
                return Err(Error::SingularMatrix(format!(
                    "pivot {best:.3e} below threshold {threshold:.3e} at step {k}"
                )));
            }
            if p != k {
                perm.swap(k, p);
                for j in 0..n {
                    let a = lu.get(k, j);
                    let b = lu.get(p, j);
                    lu.set(k, j, b);
                    lu.set(p, j, a);
                }
            }
            let pivot = lu.get(k, k);
            for i in (k + 1)..n {
                let m = lu.get(i, k) / pivot;
                lu.set(i, k, m);
            }
            for j in (k + 1)..n {
                let ukj = lu.get(k, j);
                if ukj == 0.0 {
                    continue;
                }
                for i in (k + 1)..n {
                    let v = lu.get(i, j) - lu.get(i, k) * ukj;
                    lu.set(i, j, v);
                }
            }
        }
        Ok(LuFactors { lu, perm })
    }

    /// Solves `A·x = b` through a fresh LU factorization.
    pub fn lu_solve(&self, b: &DenseVector) -> Result<DenseVector> {
        Ok(self.lu()?.solve(b))
    }

    /// Explicit inverse via LU solves against the identity columns.
    pub fn inverse(&self) -> Result<DenseMatrix> {
        assert!(self.is_square(), "inverse: matrix must be square");
        let n = self.rows;
        let factors = self.lu()?;
        let mut inv = DenseMatrix::zeros(n, n);
        for j in 0..n {
            let col = factors.solve(&DenseVector::basis(n, j));
            for i in 0..n {
                inv.set(i, j, col[i]);
            }
        }
        Ok(inv)
    }

    /// Spectral condition number `s_max / s_min`. The largest singular value
    /// comes from power iteration on the matrix, the smallest from power
    /// iteration on its explicit inverse; a ratio beyond
    /// `1 / SINGULAR_VALUE_REL_TOL` is reported as singular.
    pub fn condition_number(&self) -> Result<f64> {
        assert!(self.is_square(), "condition_number: matrix must be square");
        let s_max = self.spectral_norm()?;
        if s_max == 0.0 {
            return Err(Error::SingularMatrix("zero matrix".into()));
        }
        let inv_norm = self.inverse()?.spectral_norm()?;
        let s_min = 1.0 / inv_norm;
        if s_min < SINGULAR_VALUE_REL_TOL * s_max {
            return Err(Error::SingularMatrix(format!(
                "smallest singular value {s_min:.3e} below relative floor"
            )));
        }
        Ok(s_max * inv_norm)
    }
}

/// Row-pivoted LU factorization `P·A = L·U` with `L` unit lower triangular.
#[derive(Debug, Clone)]
pub struct LuFactors {
    /// Combined storage: strict lower part holds `L`, diagonal and upper
    /// part hold `U`.
    lu: DenseMatrix,
    /// Row `i` of the permuted system is row `perm[i]` of the original.
    perm: Vec<usize>,
}

impl LuFactors {
    pub fn order(&self) -> usize {
        self.lu.rows()
    }

    /// Solves `A·x = b` using the stored factors.
    pub fn solve(&self, b: &DenseVector) -> DenseVector {
        let n = self.order();
        assert_eq!(b.len(), n, "solve: length mismatch");
        // Forward substitution L·y = P·b (unit diagonal).
        let mut y = DenseVector::from_fn(n, |i| b[self.perm[i]]);
        for i in 1..n {
            let mut s = y[i];
            for k in 0..i {
                s -= self.lu.get(i, k) * y[k];
            }
            y[i] = s;
        }
        // Back substitution U·x = y.
        let mut x = y;
        for i in (0..n).rev() {
            let mut s = x[i];
            for k in (i + 1)..n {
                s -= self.lu.get(i, k) * x[k];
            }
            x[i] = s / self.lu.get(i, i);
        }
        x
    }
}

/// Deterministic pseudo-random unit vector used to start power iteration
/// (SplitMix64 fill, then normalization).
fn pseudo_random_unit(n: usize, seed: u64) -> DenseVector {
    let mut state = seed;
    let mut next = move || {
        state = state.wrapping_add(0x9e37_79b9_7f4a_7c15);
        let mut z = state;
        z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
        z ^ (z >> 31)
    };
    let v = DenseVector::from_fn(n, |_| ((next() >> 11) as f64 / (1u64 << 53) as f64) * 2.0 - 1.0);
    let norm = v.norm();
    if norm == 0.0 {
        DenseVector::basis(n, 0)
    } else {
        v.scale(1.0 / norm)
    }
}
