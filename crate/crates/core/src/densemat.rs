//! Dense square matrices and the handful of kernels the evaluation needs:
//! products, a multi right-hand-side LU solve, 1-norms, exact zero-pattern
//! structure detection and the exact exponentials of 1x1/2x2 diagonal blocks
//! used when recovering from a (quasi-)triangular input.

use std::ops::{Index, IndexMut};

use num_rational::Rational64;
use num_traits::{One, Zero};

use crate::error::{PhiError, Result};
use crate::scalar::Scalar;

/// Row-major `n x n` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseMatrix<S: Scalar = f64> {
    n: usize,
    data: Vec<S>,
}

impl<S: Scalar> DenseMatrix<S> {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![S::zero(); n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::scalar_identity(n, S::one())
    }

    /// `c * I`.
    pub fn scalar_identity(n: usize, c: S) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m.data[i * n + i] = c;
        }
        m
    }

    pub fn from_diag(d: &[S]) -> Self {
        let mut m = Self::zeros(d.len());
        for (i, &v) in d.iter().enumerate() {
            m[(i, i)] = v;
        }
        m
    }

    pub fn from_fn(n: usize, mut f: impl FnMut(usize, usize) -> S) -> Self {
        let mut data = Vec::with_capacity(n * n);
        for i in 0..n {
            for j in 0..n {
                data.push(f(i, j));
            }
        }
        Self { n, data }
    }

    /// Takes ownership of row-major data. Rejects non-square shapes and
    /// non-finite entries.
    pub fn from_row_major(rows: usize, cols: usize, data: Vec<S>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(PhiError::Empty);
        }
        if rows != cols {
            return Err(PhiError::NotSquare { rows, cols });
        }
        if data.len() != rows * cols {
            return Err(PhiError::DimensionMismatch {
                expected: rows,
                rows: data.len() / cols,
                cols,
            });
        }
        if let Some(k) = data.iter().position(|v| !v.is_finite()) {
            return Err(PhiError::NonFinite {
                row: k / cols,
                col: k % cols,
            });
        }
        Ok(Self { n: rows, data })
    }

    pub fn from_rows(rows: &[Vec<S>]) -> Result<Self> {
        let r = rows.len();
        if r == 0 {
            return Err(PhiError::Empty);
        }
        let c = rows[0].len();
        if let Some(bad) = rows.iter().find(|row| row.len() != c) {
            return Err(PhiError::DimensionMismatch {
                expected: c,
                rows: r,
                cols: bad.len(),
            });
        }
        Self::from_row_major(r, c, rows.iter().flatten().copied().collect())
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[S] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[S] {
        &self.data[i * self.n..(i + 1) * self.n]
    }

    pub fn is_zero(&self) -> bool {
        self.data.iter().all(|v| v.is_zero())
    }

    pub fn map(&self, f: impl Fn(S) -> S) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    pub fn scaled(&self, c: f64) -> Self {
        self.map(|v| v.scale(c))
    }

    pub fn transpose(&self) -> Self {
        Self::from_fn(self.n, |i, j| self[(j, i)])
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.n, |i, j| self[(j, i)].conj())
    }

    /// Entrywise absolute values as a real matrix.
    pub fn abs(&self) -> DenseMatrix<f64> {
        DenseMatrix {
            n: self.n,
            data: self.data.iter().map(|v| v.abs()).collect(),
        }
    }

    /// `self += c * other`
    pub fn axpy(&mut self, c: S, other: &Self) {
        debug_assert_eq!(self.n, other.n);
        for (x, &y) in self.data.iter_mut().zip(&other.data) {
            *x += c * y;
        }
    }

    /// `self += c * I`
    pub fn add_diag(&mut self, c: S) {
        for i in 0..self.n {
            self.data[i * self.n + i] += c;
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.axpy(-S::one(), other);
        out
    }

    /// Uncounted product. Production code multiplies through
    /// [`EvalContext::matmul`] so the cost model stays exact.
    pub fn mul(&self, b: &Self) -> Result<Self> {
        if self.n != b.n {
            return Err(PhiError::DimensionMismatch {
                expected: self.n,
                rows: b.n,
                cols: b.n,
            });
        }
        let n = self.n;
        let mut c = Self::zeros(n);
        for i in 0..n {
            let crow = &mut c.data[i * n..(i + 1) * n];
            for k in 0..n {
                let aik = self.data[i * n + k];
                // exact zeros contribute nothing; skipping them keeps
                // structural zeros exact and avoids 0 * inf
                if aik.is_zero() {
                    continue;
                }
                let brow = &b.data[k * n..(k + 1) * n];
                for (cij, &bkj) in crow.iter_mut().zip(brow) {
                    *cij += aik * bkj;
                }
            }
        }
        Ok(c)
    }

    /// Product with a thin `n x t` block stored column by column.
    pub fn mul_block(&self, cols: &[Vec<S>]) -> Vec<Vec<S>> {
        cols.iter().map(|x| self.mul_vec(x)).collect()
    }

    pub fn mul_vec(&self, x: &[S]) -> Vec<S> {
        debug_assert_eq!(x.len(), self.n);
        self.data
            .chunks_exact(self.n)
            .map(|row| row.iter().zip(x).map(|(&a, &b)| a * b).sum())
            .collect()
    }

    /// Maximum absolute column sum.
    pub fn one_norm(&self) -> f64 {
        let n = self.n;
        let mut sums = vec![0.0f64; n];
        for row in self.data.chunks_exact(n) {
            for (s, v) in sums.iter_mut().zip(row) {
                *s += v.abs();
            }
        }
        sums.into_iter().fold(0.0, f64::max)
    }

    pub fn trace(&self) -> S {
        (0..self.n).map(|i| self[(i, i)]).sum()
    }
}

impl<S: Scalar> Index<(usize, usize)> for DenseMatrix<S> {
    type Output = S;
    fn index(&self, (i, j): (usize, usize)) -> &S {
        &self.data[i * self.n + j]
    }
}

impl<S: Scalar> IndexMut<(usize, usize)> for DenseMatrix<S> {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut S {
        &mut self.data[i * self.n + j]
    }
}

/// `‖a − b‖₁ / ‖b‖₁`, or the absolute difference when `b = 0`.
pub fn rel_err_one_norm<S: Scalar>(computed: &DenseMatrix<S>, exact: &DenseMatrix<S>) -> f64 {
    let diff = computed.sub(exact).one_norm();
    let scale = exact.one_norm();
    if scale == 0.0 {
        diff
    } else {
        diff / scale
    }
}

// ---------------------------------------------------------------------------
// Structure
// ---------------------------------------------------------------------------

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StructureTag {
    Full,
    UpperTriangular,
    UpperQuasiTriangular,
}

impl StructureTag {
    pub fn is_triangular_like(self) -> bool {
        !matches!(self, StructureTag::Full)
    }
}

/// Classifies by the exact zero pattern, with no drop tolerance.
pub fn detect_structure<S: Scalar>(a: &DenseMatrix<S>) -> StructureTag {
    let n = a.n();
    for i in 2..n {
        for j in 0..i - 1 {
            if !a[(i, j)].is_zero() {
                return StructureTag::Full;
            }
        }
    }
    let mut bumps = 0;
    let mut prev = false;
    for k in 0..n.saturating_sub(1) {
        let nz = !a[(k + 1, k)].is_zero();
        if nz && prev {
            return StructureTag::Full;
        }
        bumps += usize::from(nz);
        prev = nz;
    }
    if bumps == 0 {
        StructureTag::UpperTriangular
    } else {
        StructureTag::UpperQuasiTriangular
    }
}

/// Diagonal blocks `(start, size)` of a quasi-triangular matrix.
pub fn diagonal_blocks<S: Scalar>(a: &DenseMatrix<S>) -> Vec<(usize, usize)> {
    let n = a.n();
    let mut blocks = Vec::new();
    let mut i = 0;
    while i < n {
        if i + 1 < n && !a[(i + 1, i)].is_zero() {
            blocks.push((i, 2));
            i += 2;
        } else {
            blocks.push((i, 1));
            i += 1;
        }
    }
    blocks
}

/// Exponential of `[[a, b], [c, d]]` in closed form.
///
/// Writes the block as `μI + N` with `μ = (a+d)/2`, so `N² = qI` where
/// `q = ((a−d)/2)² + bc`, and `exp = e^μ (cosh√q · I + sinh√q/√q · N)`.
/// Both factors are evaluated as functions of `q`, which stays accurate when
/// the two eigenvalues nearly coincide.
pub fn exp_2x2<S: Scalar>(a: S, b: S, c: S, d: S) -> [S; 4] {
    let half = S::from_real(0.5);
    let mu = (a + d) * half;
    let h = (a - d) * half;
    let q = h * h + b * c;
    let (ch, sc) = S::cosh_sinhc_of_square(q);
    let e = mu.exp();
    [e * (ch + sc * h), e * sc * b, e * sc * c, e * (ch - sc * h)]
}

/// Overwrites the diagonal blocks of `x` with the exact exponential of the
/// corresponding blocks of `2^two_power * a_scaled`, and the first
/// superdiagonal between consecutive 1x1 blocks with the closed-form value for
/// the 2x2 upper-triangular block it belongs to.
pub fn overwrite_exp_diagonal<S: Scalar>(
    x: &mut DenseMatrix<S>,
    a_scaled: &DenseMatrix<S>,
    two_power: i32,
) -> Result<()> {
    if !detect_structure(a_scaled).is_triangular_like() {
        return Err(PhiError::StructureMismatch);
    }
    if x.n() != a_scaled.n() {
        return Err(PhiError::DimensionMismatch {
            expected: a_scaled.n(),
            rows: x.n(),
            cols: x.n(),
        });
    }
    let f = 2f64.powi(two_power);
    let blocks = diagonal_blocks(a_scaled);
    for &(i, size) in &blocks {
        if size == 1 {
            x[(i, i)] = a_scaled[(i, i)].scale(f).exp();
        } else {
            let e = exp_2x2(
                a_scaled[(i, i)].scale(f),
                a_scaled[(i, i + 1)].scale(f),
                a_scaled[(i + 1, i)].scale(f),
                a_scaled[(i + 1, i + 1)].scale(f),
            );
            x[(i, i)] = e[0];
            x[(i, i + 1)] = e[1];
            x[(i + 1, i)] = e[2];
            x[(i + 1, i + 1)] = e[3];
        }
    }
    for w in blocks.windows(2) {
        if let [(i, 1), (_, 1)] = *w {
            let e = exp_2x2(
                a_scaled[(i, i)].scale(f),
                a_scaled[(i, i + 1)].scale(f),
                S::zero(),
                a_scaled[(i + 1, i + 1)].scale(f),
            );
            x[(i, i + 1)] = e[1];
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// Counted kernels
// ---------------------------------------------------------------------------

/// Run-scoped state: the estimator seed, the exact-α switch and the
/// multiplication counter (in units of one `n x n` product).
#[derive(Debug, Clone)]
pub struct EvalContext {
    pub seed: u64,
    /// Form `A^r` explicitly instead of estimating `‖A^r‖₁` (n ≤ 64 only).
    pub exact_alpha: bool,
    count: Rational64,
}

pub const DEFAULT_SEED: u64 = 0x005e_ed0f_a1fa;

impl Default for EvalContext {
    fn default() -> Self {
        Self::new(DEFAULT_SEED)
    }
}

impl EvalContext {
    pub fn new(seed: u64) -> Self {
        Self {
            seed,
            exact_alpha: false,
            count: Rational64::zero(),
        }
    }

    pub fn with_exact_alpha(mut self, on: bool) -> Self {
        self.exact_alpha = on;
        self
    }

    pub fn matmul_count(&self) -> Rational64 {
        self.count
    }

    pub fn reset_count(&mut self) {
        self.count = Rational64::zero();
    }

    pub fn matmul<S: Scalar>(&mut self, a: &DenseMatrix<S>, b: &DenseMatrix<S>) -> Result<DenseMatrix<S>> {
        let c = a.mul(b)?;
        self.count += Rational64::one();
        Ok(c)
    }

    /// Solves `d X = rhs` by LU with partial pivoting; costs 4/3 units.
    pub fn lu_solve_multi<S: Scalar>(
        &mut self,
        d: &DenseMatrix<S>,
        rhs: &DenseMatrix<S>,
    ) -> Result<DenseMatrix<S>> {
        let x = lu_solve_multi(d, rhs)?;
        self.count += Rational64::new(4, 3);
        Ok(x)
    }

    /// Squares `x` (one counted product), then refreshes its diagonal blocks
    /// from `a_scaled` at argument `2^two_power * a_scaled`.
    pub fn refresh_exp_diagonal<S: Scalar>(
        &mut self,
        x: &DenseMatrix<S>,
        a_scaled: &DenseMatrix<S>,
        two_power: i32,
    ) -> Result<DenseMatrix<S>> {
        if !detect_structure(a_scaled).is_triangular_like() {
            return Err(PhiError::StructureMismatch);
        }
        let mut sq = self.matmul(x, x)?;
        overwrite_exp_diagonal(&mut sq, a_scaled, two_power)?;
        Ok(sq)
    }
}

/// Uncounted multi right-hand-side solve.
pub fn lu_solve_multi<S: Scalar>(d: &DenseMatrix<S>, rhs: &DenseMatrix<S>) -> Result<DenseMatrix<S>> {
    let n = d.n();
    if rhs.n() != n {
        return Err(PhiError::DimensionMismatch {
            expected: n,
            rows: rhs.n(),
            cols: rhs.n(),
        });
    }
    let mut lu = d.data.clone();
    let mut x = rhs.data.clone();
    for k in 0..n {
        let (p, mag) = (k..n)
            .map(|i| (i, lu[i * n + k].abs()))
            .fold((k, -1.0), |best, cur| if cur.1 > best.1 { cur } else { best });
        if !(mag >= f64::MIN_POSITIVE) || !mag.is_finite() {
            return Err(PhiError::SingularPivot {
                index: k,
                magnitude: mag,
            });
        }
        if p != k {
            for j in 0..n {
                lu.swap(k * n + j, p * n + j);
                x.swap(k * n + j, p * n + j);
            }
        }
        let pivot = lu[k * n + k];
        for i in k + 1..n {
            let l = lu[i * n + k] / pivot;
            if l.is_zero() {
                continue;
            }
            lu[i * n + k] = l;
            for j in k + 1..n {
                let ukj = lu[k * n + j];
                lu[i * n + j] -= l * ukj;
            }
            for j in 0..n {
                let xkj = x[k * n + j];
                x[i * n + j] -= l * xkj;
            }
        }
    }
    for k in (0..n).rev() {
        for j in k + 1..n {
            let ukj = lu[k * n + j];
            if ukj.is_zero() {
                continue;
            }
            for c in 0..n {
                let xjc = x[j * n + c];
                x[k * n + c] -= ukj * xjc;
            }
        }
        let pivot = lu[k * n + k];
        for c in 0..n {
            x[k * n + c] /= pivot;
        }
    }
    Ok(DenseMatrix { n, data: x })
}
