//! Extended-precision reference values for `φ₀(A), …, φ_p(A)`.
//!
//! Test and verification use only. The primary oracle exponentiates the
//! block matrix `W = [[A, E], [0, J]]` (with `E = [I 0 … 0]`, `J` the nilpotent
//! block shift) by Taylor series plus squaring and reads `φ_j(A)` off its
//! first block row. `W` is kept in factored form: an element of the algebra it
//! generates is fully described by its first block row, because the trailing
//! block is a known polynomial in `J`. A product therefore costs `p + 1` dense
//! `n x n` products instead of one of order `n(p+1)`.
//!
//! The second oracle sums `Σ A^k/(k+j)!` directly and lifts with the
//! double-argument formula. Both use block floating point: integer mantissas
//! with one shared binary exponent per matrix, so errors are normwise.

use dashu_float::round::mode::HalfEven;
use dashu_float::FBig;
use dashu_int::ops::BitTest;
use dashu_int::{IBig, UBig};
use num_complex::Complex64;

use crate::densemat::DenseMatrix;
use crate::error::{PhiError, Result};
use crate::scalar::{Scalar, ScalarKind};

pub const DEFAULT_DIGITS: u32 = 64;
/// Taylor term budget of [`phi_reference`].
pub const MAX_TERMS: usize = 10_000;
/// Largest accepted `n(p+1)`.
pub const MAX_ORDER: usize = 2048;

const GUARD_BITS: usize = 32;

pub fn digits_to_bits(digits: u32) -> usize {
    (f64::from(digits) * std::f64::consts::LOG2_10).ceil() as usize + GUARD_BITS
}

fn factorial(k: usize) -> UBig {
    (1..=k).fold(UBig::ONE, |acc, i| acc * UBig::from(i))
}

/// Rounds `x / 2^s` to nearest.
fn shr_round(x: &IBig, s: usize) -> IBig {
    if s == 0 {
        return x.clone();
    }
    (x + (IBig::ONE << (s - 1))) >> s
}

/// Square matrix `mant · 2^exp` with a shared exponent, kept at `bits` bits
/// for the largest entry.
#[derive(Debug, Clone, PartialEq)]
pub struct ExtendedMatrix {
    n: usize,
    mant: Vec<IBig>,
    exp: isize,
    bits: usize,
}

impl ExtendedMatrix {
    pub fn zeros(n: usize, bits: usize) -> Self {
        Self {
            n,
            mant: vec![IBig::ZERO; n * n],
            exp: 0,
            bits,
        }
    }

    /// `I · num/den`, rounded to `bits` bits.
    pub fn scalar_identity(n: usize, num: &UBig, den: &UBig, bits: usize) -> Self {
        let extra = bits + 2 * den.bit_len() + 8;
        let v = IBig::from((num << extra) / den);
        let mut out = Self::zeros(n, bits);
        for i in 0..n {
            out.mant[i * n + i] = v.clone();
        }
        out.exp = -(extra as isize);
        out.normalize();
        out
    }

    pub fn identity(n: usize, bits: usize) -> Self {
        Self::scalar_identity(n, &UBig::ONE, &UBig::ONE, bits)
    }

    /// Exact image of a double matrix, then rounded to `bits` bits.
    pub fn from_dense(a: &DenseMatrix<f64>, bits: usize) -> Self {
        let n = a.n();
        let parts: Vec<(IBig, isize)> = a
            .as_slice()
            .iter()
            .map(|&x| {
                if x == 0.0 {
                    (IBig::ZERO, isize::MAX)
                } else {
                    let f = FBig::<HalfEven, 2>::try_from(x).expect("finite entry");
                    let (sig, e) = f.into_repr().into_parts();
                    (sig, e)
                }
            })
            .collect();
        let min_e = parts.iter().map(|p| p.1).min().unwrap_or(0);
        if min_e == isize::MAX {
            return Self::zeros(n, bits);
        }
        let mant = parts
            .into_iter()
            .map(|(m, e)| if m.is_zero() { m } else { m << (e - min_e) as usize })
            .collect();
        let mut out = Self {
            n,
            mant,
            exp: min_e,
            bits,
        };
        out.normalize();
        out
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn bits(&self) -> usize {
        self.bits
    }

    pub fn is_zero(&self) -> bool {
        self.mant.iter().all(IBig::is_zero)
    }

    fn top_bits(&self) -> usize {
        self.mant.iter().map(|m| m.bit_len()).max().unwrap_or(0)
    }

    fn normalize(&mut self) {
        let top = self.top_bits();
        if top == 0 {
            self.exp = 0;
            return;
        }
        if top > self.bits {
            let s = top - self.bits;
            self.mant.iter_mut().for_each(|m| *m = shr_round(m, s));
            self.exp += s as isize;
        } else if top < self.bits {
            let s = self.bits - top;
            self.mant.iter_mut().for_each(|m| *m = &*m << s);
            self.exp -= s as isize;
        }
    }

    /// Mantissas re-expressed at exponent `e ≥ self.exp` (rounded) or `e ≤ self.exp` (exact).
    fn mant_at(&self, e: isize) -> Vec<IBig> {
        if e >= self.exp {
            let s = (e - self.exp) as usize;
            self.mant.iter().map(|m| shr_round(m, s)).collect()
        } else {
            let s = (self.exp - e) as usize;
            self.mant.iter().map(|m| m << s).collect()
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n, "dimension mismatch");
        let n = self.n;
        let mut mant = vec![IBig::ZERO; n * n];
        for i in 0..n {
            for k in 0..n {
                let a = &self.mant[i * n + k];
                if a.is_zero() {
                    continue;
                }
                let row = &other.mant[k * n..(k + 1) * n];
                let out = &mut mant[i * n..(i + 1) * n];
                for (o, b) in out.iter_mut().zip(row) {
                    if !b.is_zero() {
                        *o += a * b;
                    }
                }
            }
        }
        let mut out = Self {
            n,
            mant,
            exp: self.exp + other.exp,
            bits: self.bits.max(other.bits),
        };
        out.normalize();
        out
    }

    /// `self + other`, with the smaller operand rounded to the working grid.
    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n, "dimension mismatch");
        if other.is_zero() {
            return self.clone();
        }
        if self.is_zero() {
            return other.clone();
        }
        let top = |m: &Self| m.exp + m.top_bits() as isize;
        let bits = self.bits.max(other.bits);
        let floor = top(self).max(top(other)) - (bits + GUARD_BITS) as isize;
        let e = self.exp.min(other.exp).max(floor);
        let a = self.mant_at(e);
        let b = other.mant_at(e);
        let mut out = Self {
            n: self.n,
            mant: a.into_iter().zip(b).map(|(x, y)| x + y).collect(),
            exp: e,
            bits,
        };
        out.normalize();
        out
    }

    pub fn neg(&self) -> Self {
        Self {
            mant: self.mant.iter().map(|m| -m).collect(),
            ..self.clone()
        }
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.neg())
    }

    /// `self · 2^k` (exact).
    pub fn mul_pow2(&self, k: isize) -> Self {
        let mut out = self.clone();
        if !out.is_zero() {
            out.exp += k;
        }
        out
    }

    /// `self / d`, rounded to `bits` bits.
    pub fn div_int(&self, d: &UBig) -> Self {
        let extra = d.bit_len() + 8;
        let d = IBig::from(d.clone());
        let mut out = Self {
            n: self.n,
            mant: self.mant.iter().map(|m| (m << extra) / &d).collect(),
            exp: self.exp - extra as isize,
            bits: self.bits,
        };
        out.normalize();
        out
    }

    /// `log₂ ‖·‖₁`; `-inf` for the zero matrix.
    pub fn log2_one_norm(&self) -> f64 {
        let top = self.top_bits();
        if top == 0 {
            return f64::NEG_INFINITY;
        }
        let s = top.saturating_sub(60);
        let n = self.n;
        let best = (0..n)
            .map(|j| {
                (0..n)
                    .map(|i| (&self.mant[i * n + j] >> s).to_f64().value().abs())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max);
        best.log2() + (self.exp + s as isize) as f64
    }

    /// `‖self − other‖₁ / ‖other‖₁` (0 when both vanish).
    pub fn rel_diff(&self, other: &Self) -> f64 {
        let num = self.sub(other).log2_one_norm();
        let den = other.log2_one_norm();
        if num == f64::NEG_INFINITY {
            return 0.0;
        }
        (num - den).exp2()
    }

    pub fn entry_f64(&self, i: usize, j: usize) -> f64 {
        let m = &self.mant[i * self.n + j];
        if m.is_zero() {
            return 0.0;
        }
        FBig::<HalfEven, 2>::from_parts(m.clone(), self.exp).to_f64().value()
    }

    /// Every entry correctly rounded to double.
    pub fn to_dense(&self) -> DenseMatrix<f64> {
        DenseMatrix::from_fn(self.n, |i, j| self.entry_f64(i, j))
    }

    /// Leading `k x k` block.
    fn block(&self, r0: usize, c0: usize, k: usize) -> Self {
        let mut out = Self::zeros(k, self.bits);
        for i in 0..k {
            for j in 0..k {
                out.mant[i * k + j] = self.mant[(r0 + i) * self.n + c0 + j].clone();
            }
        }
        out.exp = self.exp;
        out.normalize();
        out
    }
}

fn check_size(n: usize, p: usize) -> Result<()> {
    let order = n * (p + 1);
    if order > MAX_ORDER {
        return Err(PhiError::OracleTooLarge(order));
    }
    Ok(())
}

/// Smallest `σ ≥ 0` with `2^{−σ} x ≤ target`.
fn halvings(x: f64, target: f64) -> usize {
    let mut s = 0;
    let mut v = x;
    while v > target {
        v /= 2.0;
        s += 1;
    }
    s
}

/// `[φ₀(A), …, φ_p(A)]` in extended precision (`digits` decimal digits).
pub fn phi_reference(a: &DenseMatrix<f64>, p: usize, digits: u32) -> Result<Vec<ExtendedMatrix>> {
    let n = a.n();
    check_size(n, p)?;
    let bits = digits_to_bits(digits);
    // ‖W‖₁ = max(‖A‖₁, 1) since E and J have unit columns.
    let sigma = halvings(a.one_norm().max(1.0), 0.25);
    let a_s = ExtendedMatrix::from_dense(a, bits).mul_pow2(-(sigma as isize));
    let tol = -f64::from(digits) * std::f64::consts::LOG2_10;

    // First block row of W_s^k / k!: [c^k A^k, c^k A^{k−1}, …]/k!, c = 2^{−σ}.
    let mut term: Vec<ExtendedMatrix> = (0..=p)
        .map(|l| if l == 0 { ExtendedMatrix::identity(n, bits) } else { ExtendedMatrix::zeros(n, bits) })
        .collect();
    let mut sum = term.clone();
    let mut k = 0;
    loop {
        k += 1;
        if k > MAX_TERMS {
            return Err(PhiError::PrecisionBudget(MAX_TERMS));
        }
        let kk = UBig::from(k);
        let mut next = Vec::with_capacity(p + 1);
        next.push(term[0].mul(&a_s).div_int(&kk));
        for l in 1..=p {
            next.push(term[l - 1].mul_pow2(-(sigma as isize)).div_int(&kk));
        }
        term = next;
        let mut converged = k > p;
        for l in 0..=p {
            sum[l] = sum[l].add(&term[l]);
            let t = term[l].log2_one_norm();
            if t != f64::NEG_INFINITY && t - sum[l].log2_one_norm() >= tol {
                converged = false;
            }
        }
        if converged {
            break;
        }
    }

    // Squaring: the trailing block of exp(2^{i−σ} W) is Σ_d (2^{i−σ} J)^d/d!.
    let mut f = sum;
    for i in 0..sigma {
        let e = i as isize - sigma as isize;
        let mut g = Vec::with_capacity(p + 1);
        g.push(f[0].mul(&f[0]));
        for l in 1..=p {
            let mut v = f[0].mul(&f[l]);
            for kk in 1..=l {
                let d = l - kk;
                v = v.add(&f[kk].mul_pow2(e * d as isize).div_int(&factorial(d)));
            }
            g.push(v);
        }
        f = g;
    }
    Ok(f)
}

/// `Σ_{k=0}^{terms} A^k/(k+j)!` by Horner's rule; intended for `‖A‖₁ ≤ 1`.
pub fn phi_series_direct(a: &DenseMatrix<f64>, j: usize, digits: u32, terms: usize) -> ExtendedMatrix {
    let bits = digits_to_bits(digits);
    phi_series_ext(&ExtendedMatrix::from_dense(a, bits), j, terms)
}

fn phi_series_ext(a: &ExtendedMatrix, j: usize, terms: usize) -> ExtendedMatrix {
    let (n, bits) = (a.n(), a.bits());
    let inv = |k: usize| ExtendedMatrix::scalar_identity(n, &UBig::ONE, &factorial(k), bits);
    let mut s = inv(terms + j);
    for k in (0..terms).rev() {
        s = a.mul(&s).add(&inv(k + j));
    }
    s
}

/// Second oracle: direct series at `2^{−σ}A` (`‖·‖₁ ≤ 1/2`) lifted by `σ`
/// extended-precision double-argument sweeps.
pub fn phi_series_lifted(a: &DenseMatrix<f64>, p: usize, digits: u32) -> Result<Vec<ExtendedMatrix>> {
    check_size(a.n(), p)?;
    let bits = digits_to_bits(digits);
    let sigma = halvings(a.one_norm(), 0.5);
    let a_s = ExtendedMatrix::from_dense(a, bits).mul_pow2(-(sigma as isize));
    // 2^{−T}/T! below 10^{−digits−2}.
    let target = -(f64::from(digits) + 2.0) * std::f64::consts::LOG2_10;
    let mut terms = 1;
    let mut log_t = -1.0f64;
    while log_t > target {
        terms += 1;
        log_t += -1.0 - (terms as f64).log2();
    }
    let mut phis: Vec<ExtendedMatrix> = (0..=p).map(|j| phi_series_ext(&a_s, j, terms)).collect();
    for _ in 0..sigma {
        for j in (1..=p).rev() {
            let mut v = phis[0].mul(&phis[j]);
            for k in 1..=j {
                v = v.add(&phis[k].div_int(&factorial(j - k)));
            }
            phis[j] = v.mul_pow2(-(j as isize));
        }
        phis[0] = phis[0].mul(&phis[0]);
    }
    Ok(phis)
}

/// `[[B, −C], [C, B]]` for `A = B + iC`.
fn realify(a: &DenseMatrix<Complex64>) -> DenseMatrix<f64> {
    let n = a.n();
    DenseMatrix::from_fn(2 * n, |i, j| {
        let z = a[(i % n, j % n)];
        match (i < n, j < n) {
            (true, true) | (false, false) => z.re,
            (true, false) => -z.im,
            (false, true) => z.im,
        }
    })
}

/// [`phi_reference`] rounded to the element type; complex inputs go through
/// the real `2n x 2n` representation.
pub fn phi_reference_rounded<S: Scalar>(a: &DenseMatrix<S>, p: usize, digits: u32) -> Result<Vec<DenseMatrix<S>>> {
    match S::KIND {
        ScalarKind::Real => {
            let re = DenseMatrix::from_fn(a.n(), |i, j| a[(i, j)].re());
            Ok(phi_reference(&re, p, digits)?
                .iter()
                .map(|m| DenseMatrix::from_fn(a.n(), |i, j| S::from_real(m.entry_f64(i, j))))
                .collect())
        }
        ScalarKind::Complex => {
            let n = a.n();
            let z = DenseMatrix::from_fn(n, |i, j| Complex64::new(a[(i, j)].re(), a[(i, j)].im()));
            Ok(phi_reference(&realify(&z), p, digits)?
                .iter()
                .map(|m| DenseMatrix::from_fn(n, |i, j| S::from_parts(m.entry_f64(i, j), m.entry_f64(i + n, j))))
                .collect())
        }
    }
}

/// `[φ₀(z), …, φ_p(z)]` for a real scalar, correctly rounded.
pub fn phi_scalar(z: f64, p: usize, digits: u32) -> Vec<f64> {
    phi_reference(&DenseMatrix::from_diag(&[z]), p, digits)
        .expect("1x1 input is within limits")
        .iter()
        .map(|m| m.entry_f64(0, 0))
        .collect()
}

/// Leading block helper used by complex callers that want the extended values.
pub fn complex_parts(m: &ExtendedMatrix, n: usize) -> (ExtendedMatrix, ExtendedMatrix) {
    (m.block(0, 0, n), m.block(n, 0, n))
}
