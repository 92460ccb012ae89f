//! Shared-denominator Padé approximants to `φ_p`, the θ/ν design constants,
//! and the offline regeneration of θ from the backward-error series.
//!
//! The `[m/m]` approximant is `R^{(p)}_m = N_m / D_m` with
//!
//! ```text
//! N_m(z) = m!/(2m+p)! Σ_i [ Σ_{j≤i} (2m+p−j)! (−1)^j / (j! (m−j)! (p+i−j)!) ] z^i
//! D_m(z) = m!/(2m+p)! Σ_i (2m+p−i)! / (i! (m−i)!) (−z)^i
//! ```
//!
//! Lower-index approximants follow from `R^{(j)} = z R^{(j+1)} + 1/j!`, so all
//! of them share the denominator `D_m`.

use std::sync::OnceLock;

use dashu_float::round::mode::HalfEven;
use dashu_float::ops::Abs;
use dashu_float::FBig;
use dashu_int::{IBig, UBig};
use dashu_ratio::RBig;

use crate::error::{PhiError, Result};

/// Unit roundoff of IEEE double precision, `2⁻⁵³`.
pub const UNIT_ROUNDOFF: f64 = f64::EPSILON / 2.0;

/// Largest degree index visited by the selection loop.
pub const I_MAX: usize = 7;
pub const M_MAX: usize = 12;
/// θ for `p` above this index reuses the column for `p = 7`.
pub const P_CLAMP: usize = 7;
/// Largest `p` with tabulated θ values.
pub const P_TABLE: usize = 10;

/// Optimal Paterson–Stockmeyer degrees `m_i = ⌊(i+3)²/8⌋`.
pub const DEGREES: [usize; 8] = [1, 2, 3, 4, 6, 8, 10, 12];

/// Condition bound of the denominator for `(m, p) = (12, 1)`. Documentation
/// only; nothing evaluates it at runtime.
pub const DEN_COND_BOUND_12_1: f64 = 8.98e1;
/// Same for `(m, p) = (12, 7)`.
pub const DEN_COND_BOUND_12_7: f64 = 2.42e2;

/// Truncation offset used by [`regenerate_theta`] callers: `K = 2m + p + 250`.
pub const REGEN_EXTRA_TERMS: usize = 250;
/// Working precision (decimal digits) for the series generation.
pub const REGEN_DIGITS: u32 = 120;
/// Smallest accepted truncation offset.
pub const MIN_EXTRA_TERMS: usize = 150;

#[rustfmt::skip]
const THETA: [[f64; P_TABLE]; 8] = [
    [2.00e-5, 3.76e-5, 7.37e-5, 1.50e-4, 3.15e-4, 6.86e-4, 1.54e-3, 3.54e-3, 8.35e-3, 2.01e-2],
    [3.81e-3, 6.09e-3, 9.87e-3, 1.62e-2, 2.70e-2, 4.55e-2, 7.75e-2, 1.33e-1, 2.30e-1, 3.99e-1],
    [3.97e-2, 5.81e-2, 8.53e-2, 1.26e-1, 1.87e-1, 2.80e-1, 4.18e-1, 6.26e-1, 9.34e-1, 1.16],
    [1.54e-1, 2.13e-1, 2.94e-1, 4.06e-1, 5.62e-1, 7.79e-1, 1.05,    1.26,    1.48,    1.71],
    [7.26e-1, 9.28e-1, 1.16,    1.40,    1.66,    1.92,    2.20,    2.48,    2.77,    3.07],
    [1.76,    2.06,    2.37,    2.69,    3.01,    3.34,    3.68,    4.01,    4.35,    4.69],
    [3.17,    3.54,    3.91,    4.28,    4.65,    5.02,    5.40,    5.77,    6.14,    6.51],
    [4.87,    5.28,    5.69,    6.09,    6.50,    6.90,    7.30,    7.69,    8.08,    8.47],
];

/// Radius `ν_{m_i,1}` of the disc on which the `p = 1` series converges.
const NU1: [f64; 8] = [3.00, 4.47, 5.65, 7.05, 9.68, 12.3, 15.0, 17.6];

/// Embedded θ table: `theta[i][p-1]` for `p = 1..=10`.
#[derive(Debug, Clone, PartialEq)]
pub struct ThetaTable {
    pub theta: [[f64; P_TABLE]; 8],
    pub nu1: [f64; 8],
    pub u: f64,
}

impl ThetaTable {
    pub const EMBEDDED: ThetaTable = ThetaTable {
        theta: THETA,
        nu1: NU1,
        u: UNIT_ROUNDOFF,
    };

    /// θ_{m_i,p}, with `p > 7` mapped to `p = 7`.
    pub fn get(&self, i: usize, p: usize) -> f64 {
        assert!(i <= I_MAX, "degree index {i} out of range");
        assert!(p >= 1, "p must be positive");
        self.theta[i][p.min(P_CLAMP) - 1]
    }

    /// Unclamped entry; `p` must be in `1..=10`.
    pub fn raw(&self, i: usize, p: usize) -> f64 {
        self.theta[i][p - 1]
    }
}

pub fn theta(i: usize, p: usize) -> f64 {
    ThetaTable::EMBEDDED.get(i, p)
}

pub fn nu1(i: usize) -> f64 {
    NU1[i]
}

pub fn degree(i: usize) -> usize {
    (i + 3) * (i + 3) / 8
}

pub fn degree_index(m: usize) -> Option<usize> {
    DEGREES.iter().position(|&d| d == m)
}

fn factorial(n: usize) -> UBig {
    (1..=n).fold(UBig::ONE, |acc, k| acc * UBig::from(k))
}

fn ratio(num: IBig, den: UBig) -> RBig {
    RBig::from_parts(num, den)
}

/// Exact rational coefficients `(num, den)` of `N_m` and `D_m`, ascending.
pub fn pade_coeffs_exact(m: usize, p: usize) -> (Vec<RBig>, Vec<RBig>) {
    let n = 2 * m + p;
    let scale = ratio(IBig::from(factorial(m)), factorial(n));
    let num = (0..=m)
        .map(|i| {
            let inner = (0..=i).fold(RBig::ZERO, |acc, j| {
                let mut t = IBig::from(factorial(n - j));
                if j % 2 == 1 {
                    t = -t;
                }
                acc + ratio(t, factorial(j) * factorial(m - j) * factorial(p + i - j))
            });
            &scale * inner
        })
        .collect();
    let den = (0..=m)
        .map(|i| {
            let mut t = IBig::from(factorial(n - i));
            if i % 2 == 1 {
                t = -t;
            }
            &scale * ratio(t, factorial(i) * factorial(m - i))
        })
        .collect();
    (num, den)
}

/// `(m+p)! m! / ((2m+p)! (2m+p+1)!)`, the magnitude of the leading error term.
pub fn leading_error_coefficient(m: usize, p: usize) -> RBig {
    ratio(
        IBig::from(factorial(m + p) * factorial(m)),
        factorial(2 * m + p) * factorial(2 * m + p + 1),
    )
}

/// [`leading_error_coefficient`] rounded once to double.
pub fn leading_error_coefficient_f64(m: usize, p: usize) -> f64 {
    leading_error_coefficient(m, p).to_f64().value()
}

/// Coefficients of `N_m` and `D_m` in ascending powers, rounded once from
/// exact rationals. `den[0] = 1`.
#[derive(Debug, Clone, PartialEq)]
pub struct PadeCoeffs {
    pub m: usize,
    pub p: usize,
    pub num: Vec<f64>,
    pub den: Vec<f64>,
}

impl PadeCoeffs {
    /// `(N_m(z), D_m(z))` by Horner's rule.
    pub fn eval<S: crate::Scalar>(&self, z: S) -> (S, S) {
        let horner = |c: &[f64]| c.iter().rev().fold(S::zero(), |acc, &ci| acc * z + S::from_real(ci));
        (horner(&self.num), horner(&self.den))
    }
}

pub fn pade_coeffs(m: usize, p: usize) -> Result<PadeCoeffs> {
    if !(1..=M_MAX).contains(&m) {
        return Err(PhiError::UnsupportedDegree(m));
    }
    if p == 0 {
        return Err(PhiError::InvalidIndex);
    }
    let (num, den) = pade_coeffs_exact(m, p);
    let round = |v: Vec<RBig>| v.iter().map(|c| c.to_f64().value()).collect::<Vec<f64>>();
    Ok(PadeCoeffs {
        m,
        p,
        num: round(num),
        den: round(den),
    })
}

/// Embedded coefficient sets for every optimal degree and `p ≤ 10`.
pub fn cached_pade_coeffs(m: usize, p: usize) -> Result<PadeCoeffs> {
    static CACHE: OnceLock<Vec<Vec<PadeCoeffs>>> = OnceLock::new();
    match (degree_index(m), p) {
        (Some(i), 1..=P_TABLE) => {
            let table = CACHE.get_or_init(|| {
                DEGREES
                    .iter()
                    .map(|&d| (1..=P_TABLE).map(|q| pade_coeffs(d, q).expect("valid degree")).collect())
                    .collect()
            });
            Ok(table[i][p - 1].clone())
        }
        _ => pade_coeffs(m, p),
    }
}

type Big = FBig<HalfEven, 2>;

fn digits_to_bits(digits: u32) -> usize {
    (f64::from(digits) * std::f64::consts::LOG2_10).ceil() as usize + 16
}

/// Taylor coefficients `l_1..l_K` of `log P(x)` for a polynomial with `P(0) = 1`,
/// from `L' P = P'`.
fn log_series(poly: &[Big], k_max: usize, zero: &Big) -> Vec<Big> {
    let mut l: Vec<Big> = vec![zero.clone(); k_max + 1];
    for k in 1..=k_max {
        let mut acc = zero.clone();
        for i in 1..k {
            if let Some(pk) = poly.get(k - i) {
                acc += &l[i] * pk * Big::from(i);
            }
        }
        let pk = poly.get(k).cloned().unwrap_or_else(|| zero.clone());
        l[k] = pk - acc / Big::from(k);
    }
    l
}

/// Truncated absolute backward-error series `h̃_{m,p}(x) = Σ_{k ≥ 2m+p+1} |c_k| x^k`.
#[derive(Debug, Clone)]
pub struct HtildeSeries {
    pub m: usize,
    pub p: usize,
    /// Index of the first stored coefficient, `2m+p+1`.
    pub first_k: usize,
    /// `|c_k|` for `k = first_k ..= K`; entries may underflow to zero.
    pub coeffs: Vec<f64>,
    /// `log₂|c_k|`, never underflowing.
    log2_coeffs: Vec<f64>,
    pub precision_digits: u32,
    /// Radius on which the series is trusted (`ν_{m,1}`).
    pub limit: f64,
}

impl HtildeSeries {
    /// Generates the series of `log(e^{−x} R^{(0)}_m(x))` up to `x^K`.
    pub fn generate(m: usize, p: usize, k_max: usize, digits: u32) -> Result<Self> {
        let i = degree_index(m).ok_or(PhiError::UnsupportedDegree(m))?;
        if p == 0 {
            return Err(PhiError::InvalidIndex);
        }
        let first_k = 2 * m + p + 1;
        let min_k = 2 * m + p + MIN_EXTRA_TERMS;
        if k_max < min_k {
            return Err(PhiError::TruncationTooShort { k: k_max, min: min_k });
        }
        let bits = digits_to_bits(digits);
        let (num, den) = pade_coeffs_exact(m, p);

        // R^{(0)} = Q/D with Q = D·Σ_{i<p} x^i/i! + x^p N, computed exactly.
        let deg_q = m + p;
        let mut q = vec![RBig::ZERO; deg_q + 1];
        for (a, da) in den.iter().enumerate() {
            for b in 0..p {
                q[a + b] += da * ratio(IBig::ONE, factorial(b));
            }
        }
        for (a, na) in num.iter().enumerate() {
            q[a + p] += na;
        }

        let to_big = |v: &[RBig]| -> Vec<Big> { v.iter().map(|c| c.to_float::<HalfEven, 2>(bits).value()).collect() };
        let zero = Big::ZERO.with_precision(bits).value();
        let lq = log_series(&to_big(&q), k_max, &zero);
        let ld = log_series(&to_big(&den), k_max, &zero);

        let mut coeffs = Vec::with_capacity(k_max + 1 - first_k);
        let mut log2_coeffs = Vec::with_capacity(k_max + 1 - first_k);
        for k in first_k..=k_max {
            let c = (&lq[k] - &ld[k]).abs();
            coeffs.push(c.to_f64().value());
            let l2 = if c == zero {
                f64::NEG_INFINITY
            } else {
                let small = c.with_precision(64).value();
                small.ln().to_f64().value() / std::f64::consts::LN_2
            };
            log2_coeffs.push(l2);
        }
        Ok(Self {
            m,
            p,
            first_k,
            coeffs,
            log2_coeffs,
            precision_digits: digits,
            limit: NU1[i],
        })
    }

    /// `log₂ h̃(x)` for `0 < x ≤ limit`, evaluated term-wise so nothing overflows.
    fn log2_eval(&self, x: f64) -> f64 {
        let lx = x.log2();
        let terms: Vec<f64> = self
            .log2_coeffs
            .iter()
            .enumerate()
            .map(|(j, &lc)| lc + (self.first_k + j) as f64 * lx)
            .collect();
        let top = terms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if top == f64::NEG_INFINITY {
            return top;
        }
        top + terms.iter().map(|t| (t - top).exp2()).sum::<f64>().log2()
    }
}

/// Truncated series value at `x`; errors outside `[0, ν_{m,1}]`.
pub fn htilde_eval(s: &HtildeSeries, x: f64) -> Result<f64> {
    if !(0.0..=s.limit).contains(&x) {
        return Err(PhiError::Domain { x, limit: s.limit });
    }
    if x == 0.0 {
        return Ok(0.0);
    }
    Ok(s.log2_eval(x).exp2())
}

/// Solves `h̃(θ)/θ^δ = u` for θ in `(0, limit]` by bisection on `log₂ θ`.
fn solve_theta(s: &HtildeSeries, delta: usize) -> Result<f64> {
    let log2_u = UNIT_ROUNDOFF.log2();
    let g = |lt: f64| s.log2_eval(lt.exp2()) - delta as f64 * lt;
    // The leading term alone reaches u at theta0, so the root is no larger.
    let lead = s.log2_coeffs[0];
    let pow = (s.first_k - delta) as f64;
    let mut hi = ((log2_u - lead) / pow).min(s.limit.log2());
    if g(hi) < log2_u {
        return Err(PhiError::NoConvergence(format!(
            "no root below the validated radius for m={}, p={}",
            s.m, s.p
        )));
    }
    let mut lo = hi - 1.0;
    let mut steps = 0;
    while g(lo) >= log2_u {
        lo -= 1.0;
        steps += 1;
        if steps > 2000 {
            return Err(PhiError::NoConvergence("failed to bracket root".into()));
        }
    }
    for _ in 0..200 {
        if hi - lo <= 1e-14 {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if g(mid) < log2_u {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(lo.exp2())
}

/// Largest θ with `h̃_{m,p}(θ)/θ ≤ u`; when that root is below one the
/// condition is replaced by `h̃_{m,p}(θ)/θ^p ≤ u`.
pub fn regenerate_theta(m: usize, p: usize, k: usize) -> Result<f64> {
    let series = HtildeSeries::generate(m, p, k, REGEN_DIGITS)?;
    theta_from_series(&series)
}

/// The refinement rule of [`regenerate_theta`] applied to an existing series.
pub fn theta_from_series(series: &HtildeSeries) -> Result<f64> {
    let root = solve_theta(series, 1)?;
    if root < 1.0 && series.p > 1 {
        solve_theta(series, series.p)
    } else {
        Ok(root)
    }
}

/// Exponent `δ′` used for the stored θ of a given series (1 or `p`).
pub fn refinement_exponent(series: &HtildeSeries) -> Result<usize> {
    Ok(if solve_theta(series, 1)? < 1.0 { series.p } else { 1 })
}
