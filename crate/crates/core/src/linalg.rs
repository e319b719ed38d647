//! Small dense real kernel: matrix-vector products, Gaussian elimination,
//! Perron root of nonnegative matrices and truncated Neumann sums.
//!
//! Matrices here are tiny (one row per user category), so everything is
//! row-major `Vec` storage with straightforward loops.

use std::ops::Index;

use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Smallest pivot magnitude accepted by [`solve_linear`].
pub const PIVOT_TOLERANCE: f64 = 1e-12;
/// Residual bound `‖Ax − b‖∞ ≤ RESIDUAL_TOLERANCE · (1 + ‖b‖∞)` met by [`solve_linear`].
pub const RESIDUAL_TOLERANCE: f64 = 1e-9;
/// Absolute accuracy target of [`spectral_radius`].
pub const SPECTRAL_TOLERANCE: f64 = 1e-8;
/// Diagonal shift applied before power iteration.
pub const SPECTRAL_SHIFT: f64 = 1e-3;
/// Iteration budget of [`spectral_radius`].
pub const MAX_POWER_ITERATIONS: usize = 100_000;

#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<S> {
    rows: usize,
    cols: usize,
    data: Vec<S>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseVector<S> {
    data: Vec<S>,
}

impl<S: Scalar> DenseMatrix<S> {
    /// Builds a matrix from row-major entries.
    pub fn new(rows: usize, cols: usize, data: Vec<S>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::invalid(format!(
                "matrix must be at least 1x1, got {rows}x{cols}"
            )));
        }
        if data.len() != rows * cols {
            return Err(Error::invalid(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(k) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::invalid(format!(
                "matrix entry ({}, {}) is not finite",
                k / cols,
                k % cols
            )));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<S>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        if let Some(i) = rows.iter().position(|row| row.len() != c) {
            return Err(Error::invalid(format!(
                "row {i} has {} entries, expected {c}",
                rows[i].len()
            )));
        }
        Self::new(r, c, rows.concat())
    }

    pub fn zeros(rows: usize, cols: usize) -> Result<Self> {
        Self::new(rows, cols, vec![S::zero(); rows * cols])
    }

    pub fn identity(size: usize) -> Result<Self> {
        Self::diagonal(&vec![S::one(); size])
    }

    pub fn diagonal(diag: &[S]) -> Result<Self> {
        let size = diag.len();
        let mut data = vec![S::zero(); size * size];
        for (i, &d) in diag.iter().enumerate() {
            data[i * size + i] = d;
        }
        Self::new(size, size, data)
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

    pub fn get(&self, row: usize, col: usize) -> S {
        self.data[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[S] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[S] {
        &self.data
    }

    pub fn is_nonnegative(&self) -> bool {
        self.data.iter().all(|&x| x >= S::zero())
    }

    pub fn to_rows(&self) -> Vec<Vec<S>> {
        self.data.chunks(self.cols).map(<[S]>::to_vec).collect()
    }

    /// Multiplies every entry by `factor`.
    pub fn scaled(&self, factor: S) -> Self {
        Self {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&x| x * factor).collect(),
        }
    }

    /// `diag(d) · self`, i.e. row `i` scaled by `d[i]`.
    pub fn scale_rows(&self, d: &[S]) -> Result<Self> {
        if d.len() != self.rows {
            return Err(Error::invalid(format!(
                "row scaling needs {} factors, got {}",
                self.rows,
                d.len()
            )));
        }
        let mut data = self.data.clone();
        for (row, &f) in data.chunks_mut(self.cols).zip(d) {
            row.iter_mut().for_each(|x| *x = *x * f);
        }
        Ok(Self {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }

    /// `I − self` for a square matrix.
    pub fn identity_minus(&self) -> Result<Self> {
        if !self.is_square() {
            return Err(Error::invalid(format!(
                "I - A needs a square matrix, got {}x{}",
                self.rows, self.cols
            )));
        }
        let mut out = self.scaled(-S::one());
        for i in 0..self.rows {
            out.data[i * self.cols + i] = out.data[i * self.cols + i] + S::one();
        }
        Ok(out)
    }

    pub fn mul_vec(&self, x: &DenseVector<S>) -> Result<DenseVector<S>> {
        mat_vec_mul(self, x)
    }

    pub fn matmul(&self, other: &Self) -> Result<Self> {
        if self.cols != other.rows {
            return Err(Error::invalid(format!(
                "cannot multiply {}x{} by {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut data = vec![S::zero(); self.rows * other.cols];
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(i, k);
                for j in 0..other.cols {
                    data[i * other.cols + j] = data[i * other.cols + j] + a * other.get(k, j);
                }
            }
        }
        Self::new(self.rows, other.cols, data)
    }
}

impl<S> Index<(usize, usize)> for DenseMatrix<S> {
    type Output = S;

    fn index(&self, (row, col): (usize, usize)) -> &S {
        &self.data[row * self.cols + col]
    }
}

impl<S: Scalar> DenseVector<S> {
    pub fn new(data: Vec<S>) -> Result<Self> {
        if data.is_empty() {
            return Err(Error::invalid("vector must have at least one entry"));
        }
        if let Some(i) = data.iter().position(|x| !x.is_finite()) {
            return Err(Error::invalid(format!("vector entry {i} is not finite")));
        }
        Ok(Self { data })
    }

    pub fn zeros(len: usize) -> Result<Self> {
        Self::new(vec![S::zero(); len])
    }

    pub fn filled(len: usize, value: S) -> Result<Self> {
        Self::new(vec![value; len])
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    /// Always false; vectors hold at least one entry.
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn as_slice(&self) -> &[S] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<S> {
        self.data
    }

    pub fn norm_inf(&self) -> S {
        norm_inf(&self.data)
    }

    pub fn sum(&self) -> S {
        self.data.iter().copied().sum()
    }

    pub fn is_nonnegative(&self) -> bool {
        self.data.iter().all(|&x| x >= S::zero())
    }

    pub fn scaled(&self, factor: S) -> Self {
        Self {
            data: self.data.iter().map(|&x| x * factor).collect(),
        }
    }

    pub(crate) fn from_vec_unchecked(data: Vec<S>) -> Self {
        debug_assert!(!data.is_empty());
        Self { data }
    }
}

impl<S> Index<usize> for DenseVector<S> {
    type Output = S;

    fn index(&self, i: usize) -> &S {
        &self.data[i]
    }
}

pub(crate) fn norm_inf<S: Scalar>(xs: &[S]) -> S {
    xs.iter().fold(S::zero(), |acc, &x| acc.max(x.abs()))
}

pub fn mat_vec_mul<S: Scalar>(a: &DenseMatrix<S>, x: &DenseVector<S>) -> Result<DenseVector<S>> {
    if a.cols != x.len() {
        return Err(Error::invalid(format!(
            "dimension mismatch: {}x{} matrix times vector of length {}",
            a.rows,
            a.cols,
            x.len()
        )));
    }
    let out = (0..a.rows)
        .map(|i| a.row(i).iter().zip(x.as_slice()).map(|(&aij, &xj)| aij * xj).sum())
        .collect();
    Ok(DenseVector::from_vec_unchecked(out))
}

/// Solves `A x = b` by Gaussian elimination with partial pivoting.
///
/// Fails with [`Error::Singular`] when the largest available pivot in some
/// column is below [`PIVOT_TOLERANCE`].
pub fn solve_linear<S: Scalar>(a: &DenseMatrix<S>, b: &DenseVector<S>) -> Result<DenseVector<S>> {
    if !a.is_square() {
        return Err(Error::invalid(format!(
            "solve_linear needs a square matrix, got {}x{}",
            a.rows, a.cols
        )));
    }
    if a.rows != b.len() {
        return Err(Error::invalid(format!(
            "dimension mismatch: {}x{} system with right-hand side of length {}",
            a.rows,
            a.cols,
            b.len()
        )));
    }
    let size = a.rows;
    let mut lu = a.to_rows();
    let mut rhs = b.as_slice().to_vec();
    let threshold = S::lit(PIVOT_TOLERANCE);

    for col in 0..size {
        let (pivot_row, pivot) = (col..size)
            .map(|r| (r, lu[r][col].abs()))
            .fold((col, S::zero()), |best, cand| if cand.1 > best.1 { cand } else { best });
        if !(pivot >= threshold) {
            return Err(Error::Singular {
                column: col,
                pivot: pivot.as_f64(),
                threshold: PIVOT_TOLERANCE,
            });
        }
        lu.swap(col, pivot_row);
        rhs.swap(col, pivot_row);

        for r in col + 1..size {
            let factor = lu[r][col] / lu[col][col];
            if factor == S::zero() {
                continue;
            }
            for c in col..size {
                lu[r][c] = lu[r][c] - factor * lu[col][c];
            }
            rhs[r] = rhs[r] - factor * rhs[col];
        }
    }

    let mut x = vec![S::zero(); size];
    for row in (0..size).rev() {
        let tail: S = (row + 1..size).map(|c| lu[row][c] * x[c]).sum();
        x[row] = (rhs[row] - tail) / lu[row][row];
    }
    if let Some(i) = x.iter().position(|v| !v.is_finite()) {
        return Err(Error::NumericFailure(format!(
            "solution entry {i} is not finite"
        )));
    }
    Ok(DenseVector::from_vec_unchecked(x))
}

/// Spectral radius of a nonnegative square matrix.
///
/// Power iteration runs on `A + εI` (ε = [`SPECTRAL_SHIFT`]) starting from the
/// all-ones vector, so the iterate stays strictly positive and the
/// Collatz–Wielandt quotient `max_i (Bx)_i / x_i` is an upper bound on
/// `ρ(A) + ε` at every step. Iteration stops once that bound meets the lower
/// quotient (irreducible case) or stops moving (reducible case); the result
/// is the unshifted quotient `max_i (Ax)_i / x_i` at the final iterate.
///
/// Defective dominant eigenvalues make power iteration converge only
/// algebraically; when the iteration budget runs out the radius is taken
/// from repeated squaring instead (see [`gelfand_radius`]).
pub fn spectral_radius<S: Scalar>(a: &DenseMatrix<S>) -> Result<S> {
    if !a.is_square() {
        return Err(Error::invalid(format!(
            "spectral_radius needs a square matrix, got {}x{}",
            a.rows, a.cols
        )));
    }
    if let Some(k) = a.data.iter().position(|&x| x < S::zero()) {
        return Err(Error::invalid(format!(
            "spectral_radius needs a nonnegative matrix; entry ({}, {}) is negative",
            k / a.cols,
            k % a.cols
        )));
    }
    let size = a.rows;
    let shift = S::lit(SPECTRAL_SHIFT);
    let eps = S::epsilon();
    let bracket_tol = S::lit(1e-12).max(eps * S::lit(16.0));
    let stall_tol = S::lit(1e-15).max(eps * S::lit(4.0));

    let mut x = vec![S::one(); size];
    let mut ax = vec![S::zero(); size];
    let mut previous_upper = S::infinity();

    for _ in 0..MAX_POWER_ITERATIONS {
        for i in 0..size {
            ax[i] = a.row(i).iter().zip(&x).map(|(&aij, &xj)| aij * xj).sum();
        }
        let (lower, upper) = x.iter().zip(&ax).fold(
            (S::infinity(), S::zero()),
            |(lo, hi), (&xi, &axi)| {
                let q = axi / xi + shift;
                (lo.min(q), hi.max(q))
            },
        );
        let scale = upper.max(S::one());
        let closed = upper - lower <= bracket_tol * scale;
        let stalled = (previous_upper - upper).abs() <= stall_tol * scale;
        if closed || stalled {
            let unshifted = x
                .iter()
                .zip(&ax)
                .fold(S::zero(), |hi, (&xi, &axi)| hi.max(axi / xi));
            return Ok(unshifted);
        }
        previous_upper = upper;

        let norm = x
            .iter()
            .zip(&ax)
            .fold(S::zero(), |acc, (&xi, &axi)| acc.max(axi + shift * xi));
        // Entries can underflow to zero for decaying components; keep them
        // positive so the quotients stay defined.
        let floor = S::min_positive_value();
        for (xi, &axi) in x.iter_mut().zip(&ax) {
            *xi = ((axi + shift * *xi) / norm).max(floor);
        }
    }
    gelfand_radius(a)
}

/// `ρ(A) = lim ‖A^N‖^{1/N}` evaluated at `N = 2^k` by repeated squaring of a
/// normalized copy of `A`. Products of nonnegative matrices involve no
/// cancellation, so each squaring is accurate to a few ulps.
pub fn gelfand_radius<S: Scalar>(a: &DenseMatrix<S>) -> Result<S> {
    const SQUARINGS: usize = 64;
    let norm = |m: &DenseMatrix<S>| {
        (0..m.rows)
            .map(|i| m.row(i).iter().copied().sum::<S>())
            .fold(S::zero(), S::max)
    };
    let first = norm(a);
    if first == S::zero() {
        return Ok(S::zero());
    }
    let mut log_scale = first.ln();
    let mut power = S::one();
    let mut current = a.scaled(S::one() / first);
    let mut estimates = Vec::with_capacity(SQUARINGS);
    for _ in 0..SQUARINGS {
        let squared = current.matmul(&current)?;
        let s = norm(&squared);
        if s == S::zero() {
            return Ok(S::zero());
        }
        power = power + power;
        log_scale = log_scale + log_scale + s.ln();
        current = squared.scaled(S::one() / s);
        estimates.push((log_scale / power).exp());
    }
    let last = estimates[SQUARINGS - 1];
    let before = estimates[SQUARINGS - 2];
    if (last - before).abs() > S::lit(SPECTRAL_TOLERANCE) {
        return Err(Error::NumericFailure(format!(
            "spectral radius did not settle: power iteration exhausted {MAX_POWER_ITERATIONS} \
             iterations and repeated squaring ended at {before} then {last}"
        )));
    }
    Ok(last)
}

/// Truncated Neumann sum `Σ_{i≥0} Aⁱ b` for nonnegative `A` with `ρ(A) < 1`.
///
/// Terms are added until the latest one has `‖·‖∞ < tol · (1 + ‖partial sum‖∞)`.
pub fn neumann_cumulative<S: Scalar>(
    a: &DenseMatrix<S>,
    b: &DenseVector<S>,
    tol: S,
    max_terms: usize,
) -> Result<DenseVector<S>> {
    let rho = spectral_radius(a)?;
    if rho >= S::one() {
        return Err(Error::Divergent { rho: rho.as_f64() });
    }
    if a.cols != b.len() {
        return Err(Error::invalid(format!(
            "dimension mismatch: {}x{} matrix with vector of length {}",
            a.rows,
            a.cols,
            b.len()
        )));
    }
    let mut sum = b.clone();
    let mut term = b.clone();
    for _ in 1..max_terms {
        if term.norm_inf() < tol * (S::one() + sum.norm_inf()) {
            return Ok(sum);
        }
        term = mat_vec_mul(a, &term)?;
        for (s, &t) in sum.data.iter_mut().zip(&term.data) {
            *s = *s + t;
        }
    }
    if term.norm_inf() < tol * (S::one() + sum.norm_inf()) {
        return Ok(sum);
    }
    Err(Error::NumericFailure(format!(
        "Neumann series not converged after {max_terms} terms"
    )))
}
