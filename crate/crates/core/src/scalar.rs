//! Element types accepted by the dense kernel.
//!
//! Real inputs stay in `f64` arithmetic for the whole computation; complex
//! inputs use `Complex64`. Everything generic in this crate is written against
//! [`Scalar`].

use std::fmt::{Debug, Display};
use std::iter::Sum;
use std::ops::{AddAssign, DivAssign, MulAssign, SubAssign};

use num_complex::{Complex64, ComplexFloat};

/// Discriminates real and complex element kinds (uniform per matrix).
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScalarKind {
    Real,
    Complex,
}

pub trait Scalar:
    ComplexFloat<Real = f64>
    + AddAssign
    + SubAssign
    + MulAssign
    + DivAssign
    + Sum
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    const KIND: ScalarKind;

    fn from_real(x: f64) -> Self;

    /// Builds an element from real and imaginary parts. Real scalars drop `im`.
    fn from_parts(re: f64, im: f64) -> Self;

    fn scale(self, x: f64) -> Self;

    /// `x / |x|`, with the convention `sign(0) = 1`.
    fn unit_sign(self) -> Self;

    /// Returns `(cosh(√q), sinh(√q)/√q)`; both are entire functions of `q`.
    fn cosh_sinhc_of_square(q: Self) -> (Self, Self);
}

// Below this modulus the truncated series is used; the first neglected term is
// q^6/13! < 1e-22 relative.
const SMALL_SQUARE: f64 = 1e-2;

fn cosh_sinhc_series<S: Scalar>(q: S) -> (S, S) {
    // cosh: Σ q^k/(2k)!, sinhc: Σ q^k/(2k+1)!
    let mut c = S::one();
    let mut sc = S::one();
    let mut term_c = S::one();
    let mut term_s = S::one();
    for k in 1..=6u32 {
        let kk = f64::from(k);
        term_c = term_c * q / S::from_real((2.0 * kk - 1.0) * (2.0 * kk));
        term_s = term_s * q / S::from_real((2.0 * kk) * (2.0 * kk + 1.0));
        c += term_c;
        sc += term_s;
    }
    (c, sc)
}

impl Scalar for f64 {
    const KIND: ScalarKind = ScalarKind::Real;

    fn from_real(x: f64) -> Self {
        x
    }

    fn from_parts(re: f64, _im: f64) -> Self {
        re
    }

    fn scale(self, x: f64) -> Self {
        self * x
    }

    fn unit_sign(self) -> Self {
        if self < 0.0 {
            -1.0
        } else {
            1.0
        }
    }

    fn cosh_sinhc_of_square(q: Self) -> (Self, Self) {
        if q.abs() < SMALL_SQUARE {
            cosh_sinhc_series(q)
        } else if q > 0.0 {
            let d = q.sqrt();
            (d.cosh(), d.sinh() / d)
        } else {
            let d = (-q).sqrt();
            (d.cos(), d.sin() / d)
        }
    }
}

impl Scalar for Complex64 {
    const KIND: ScalarKind = ScalarKind::Complex;

    fn from_real(x: f64) -> Self {
        Complex64::new(x, 0.0)
    }

    fn from_parts(re: f64, im: f64) -> Self {
        Complex64::new(re, im)
    }

    fn scale(self, x: f64) -> Self {
        self * x
    }

    fn unit_sign(self) -> Self {
        let r = self.norm();
        if r == 0.0 {
            Complex64::new(1.0, 0.0)
        } else {
            self / r
        }
    }

    fn cosh_sinhc_of_square(q: Self) -> (Self, Self) {
        if q.norm() < SMALL_SQUARE {
            cosh_sinhc_series(q)
        } else {
            let d = q.sqrt();
            (d.cosh(), d.sinh() / d)
        }
    }
}
