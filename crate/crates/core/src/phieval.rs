//! Scaling and recovering evaluation of `φ₀(A), …, φ_p(A)`.
//!
//! The pipeline is: scale `A` by `2^{−s}`, evaluate `N_m` and `D_m` with one
//! shared set of powers (Paterson–Stockmeyer), solve `D_m R = N_m` for
//! `R ≈ φ_p`, run the backward recurrence `R^{(j)} = A R^{(j+1)} + I/j!` for
//! the lower indices, then undo the scaling with `s` double-argument sweeps.

use num_rational::Rational64;
use num_traits::Zero;

use crate::densemat::{detect_structure, overwrite_exp_diagonal, DenseMatrix, EvalContext, StructureTag};
use crate::error::{PhiError, Result};
use crate::pade::{self, PadeCoeffs};
use crate::scalar::Scalar;
use crate::select::{self, AlphaSeq, SelectionResult};

/// `1/k!`, correctly rounded for `k ≤ 22` (the factorial is exact in `f64`).
pub fn inv_factorial(k: usize) -> f64 {
    1.0 / (1..=k).fold(1.0f64, |acc, i| acc * i as f64)
}

/// `x · 2^e` without intermediate overflow or underflow of the factor.
fn scale_pow2<S: Scalar>(a: &DenseMatrix<S>, e: i32) -> DenseMatrix<S> {
    let mut out = a.clone();
    let mut e = e;
    while e != 0 {
        let step = e.clamp(-1000, 1000);
        out = out.scaled(2f64.powi(step));
        e -= step;
    }
    out
}

/// `A^0, A^1, …, A^τ` of the scaled matrix, formed in ascending order.
#[derive(Debug, Clone)]
pub struct PowerCache<S: Scalar = f64> {
    pub tau: usize,
    powers: Vec<DenseMatrix<S>>,
}

impl<S: Scalar> PowerCache<S> {
    /// Costs `τ − 1` products.
    pub fn build(a: &DenseMatrix<S>, tau: usize, ctx: &mut EvalContext) -> Result<Self> {
        assert!(tau >= 1, "block size must be positive");
        let mut powers = Vec::with_capacity(tau + 1);
        powers.push(DenseMatrix::identity(a.n()));
        powers.push(a.clone());
        for k in 2..=tau {
            let next = ctx.matmul(&powers[k - 1], a)?;
            powers.push(next);
        }
        Ok(Self { tau, powers })
    }

    pub fn power(&self, k: usize) -> &DenseMatrix<S> {
        &self.powers[k]
    }

    fn combination(&self, coeffs: &[f64]) -> DenseMatrix<S> {
        let n = self.powers[0].n();
        let mut out = DenseMatrix::zeros(n);
        out.add_diag(S::from_real(coeffs[0]));
        for (j, &c) in coeffs.iter().enumerate().skip(1) {
            out.axpy(S::from_real(c), &self.powers[j]);
        }
        out
    }

    /// `q(A)` by Horner's rule over `A^τ`-blocks.
    pub fn eval_poly(&self, c: &[f64], ctx: &mut EvalContext) -> Result<DenseMatrix<S>> {
        let tau = self.tau;
        let m = c.len() - 1;
        let nu = m / tau;
        let top = &c[tau * nu..];
        let mut acc;
        let mut k = nu;
        if top.len() == 1 && nu > 0 {
            // Scalar top block: the first Horner step needs no product.
            let lead = S::from_real(top[0]);
            acc = self.powers[tau].map(|v| v * lead);
            k -= 1;
            let block = self.combination(&c[tau * k..tau * k + tau]);
            acc.axpy(S::one(), &block);
        } else {
            acc = self.combination(top);
        }
        while k > 0 {
            k -= 1;
            acc = ctx.matmul(&acc, &self.powers[tau])?;
            let block = self.combination(&c[tau * k..tau * k + tau]);
            acc.axpy(S::one(), &block);
        }
        Ok(acc)
    }
}

/// `(N_m(A), D_m(A))` sharing one power cache; `π_m(τ)` products in total.
pub fn ps_eval_pair<S: Scalar>(
    a_scaled: &DenseMatrix<S>,
    coeffs: &PadeCoeffs,
    tau: usize,
    ctx: &mut EvalContext,
) -> Result<(DenseMatrix<S>, DenseMatrix<S>)> {
    let cache = PowerCache::build(a_scaled, tau, ctx)?;
    let num = cache.eval_poly(&coeffs.num, ctx)?;
    let den = cache.eval_poly(&coeffs.den, ctx)?;
    Ok((num, den))
}

/// `[R^{(0)}, …, R^{(p)}]` from `R^{(p)}` via `R^{(j)} = A R^{(j+1)} + I/j!`.
pub fn recover_chain<S: Scalar>(
    rp: DenseMatrix<S>,
    a_scaled: &DenseMatrix<S>,
    p: usize,
    ctx: &mut EvalContext,
) -> Result<Vec<DenseMatrix<S>>> {
    let mut out = vec![DenseMatrix::zeros(a_scaled.n()); p + 1];
    out[p] = rp;
    for j in (0..p).rev() {
        let mut r = ctx.matmul(a_scaled, &out[j + 1])?;
        r.add_diag(S::from_real(inv_factorial(j)));
        out[j] = r;
    }
    Ok(out)
}

/// One double-argument sweep over `φ_p, …, φ_1`:
/// `φ_j(2X) = 2^{−j}(φ₀(X)φ_j(X) + Σ_{k=1}^{j} φ_k(X)/(j−k)!)`.
///
/// Slots are overwritten in descending `j`, so every operand on the right is
/// still at argument `X` when read. `φ₀` is left for the caller.
pub fn double_argument_step<S: Scalar>(phis: &mut [DenseMatrix<S>], ctx: &mut EvalContext) -> Result<()> {
    let p = phis.len() - 1;
    for j in (1..=p).rev() {
        let mut v = ctx.matmul(&phis[0], &phis[j])?;
        for k in 1..=j {
            v.axpy(S::from_real(inv_factorial(j - k)), &phis[k]);
        }
        phis[j] = scale_pow2(&v, -(j as i32));
    }
    Ok(())
}

/// Padé stage at the scaled argument: `[R^{(0)}, …, R^{(p)}]` before any sweep.
pub fn pade_stage<S: Scalar>(
    a_scaled: &DenseMatrix<S>,
    p: usize,
    m: usize,
    tau: usize,
    ctx: &mut EvalContext,
) -> Result<Vec<DenseMatrix<S>>> {
    let coeffs = pade::cached_pade_coeffs(m, p)?;
    let (num, den) = ps_eval_pair(a_scaled, &coeffs, tau, ctx)?;
    let rp = ctx.lu_solve_multi(&den, &num)?;
    recover_chain(rp, a_scaled, p, ctx)
}

#[derive(Debug, Clone)]
pub struct PhiResult<S: Scalar = f64> {
    /// `φ₀(A), …, φ_p(A)`.
    pub phis: Vec<DenseMatrix<S>>,
    /// `None` for the zero matrix, which bypasses selection.
    pub selection: Option<SelectionResult>,
    pub matmul_count: Rational64,
    pub structure: StructureTag,
    pub alphas: Option<AlphaSeq>,
    pub t_per_degree: Vec<u32>,
}

fn validate<S: Scalar>(a: &DenseMatrix<S>, p: usize) -> Result<()> {
    if p == 0 {
        return Err(PhiError::InvalidIndex);
    }
    if a.n() == 0 {
        return Err(PhiError::Empty);
    }
    let n = a.n();
    if let Some(k) = a.as_slice().iter().position(|v| !v.is_finite()) {
        return Err(PhiError::NonFinite { row: k / n, col: k % n });
    }
    Ok(())
}

fn zero_result<S: Scalar>(n: usize, p: usize, structure: StructureTag) -> PhiResult<S> {
    PhiResult {
        phis: (0..=p)
            .map(|j| DenseMatrix::scalar_identity(n, S::from_real(inv_factorial(j))))
            .collect(),
        selection: None,
        matmul_count: Rational64::zero(),
        structure,
        alphas: None,
        t_per_degree: Vec::new(),
    }
}

/// Scaling, Padé stage and `s` recovery sweeps for fixed parameters.
fn evaluate<S: Scalar>(
    a: &DenseMatrix<S>,
    p: usize,
    m: usize,
    tau: usize,
    s: u32,
    structure: StructureTag,
    ctx: &mut EvalContext,
) -> Result<Vec<DenseMatrix<S>>> {
    let a_s = scale_pow2(a, -(s as i32));
    let mut phis = pade_stage(&a_s, p, m, tau, ctx)?;
    let tri = structure.is_triangular_like();
    if tri {
        overwrite_exp_diagonal(&mut phis[0], &a_s, 0)?;
    }
    for k in 1..=s {
        double_argument_step(&mut phis, ctx)?;
        phis[0] = if tri {
            ctx.refresh_exp_diagonal(&phis[0], &a_s, k as i32)?
        } else {
            ctx.matmul(&phis[0], &phis[0])?
        };
    }
    Ok(phis)
}

/// `φ₀(A), …, φ_p(A)` with automatically chosen degree and scaling.
///
/// Resets the context's multiplication counter; on return it equals
/// `i + p + 4/3 + s(p+1)`.
pub fn phi_funm<S: Scalar>(a: &DenseMatrix<S>, p: usize, ctx: &mut EvalContext) -> Result<PhiResult<S>> {
    validate(a, p)?;
    ctx.reset_count();
    let structure = detect_structure(a);
    if a.is_zero() {
        return Ok(zero_result(a.n(), p, structure));
    }
    let sel = select::select(a, p, ctx)?;
    let r = &sel.result;
    let phis = evaluate(a, p, r.m, r.tau, r.s, structure, ctx)?;
    Ok(PhiResult {
        phis,
        matmul_count: ctx.matmul_count(),
        structure,
        t_per_degree: sel.costs.t_per_degree(),
        alphas: Some(sel.alphas),
        selection: Some(sel.result),
    })
}

/// Same pipeline with a caller-chosen degree `m` (one of the optimal degrees)
/// and scaling `s`; selection is skipped.
pub fn phi_funm_forced<S: Scalar>(
    a: &DenseMatrix<S>,
    p: usize,
    m: usize,
    s: u32,
    ctx: &mut EvalContext,
) -> Result<PhiResult<S>> {
    validate(a, p)?;
    let i = pade::degree_index(m).ok_or(PhiError::UnsupportedDegree(m))?;
    ctx.reset_count();
    let structure = detect_structure(a);
    let tau = select::choose_tau(m, i);
    let phis = evaluate(a, p, m, tau, s, structure, ctx)?;
    let p_hat = select::p_hat(pade::theta(i, p), p);
    let cost = Rational64::from_integer((i + p) as i64)
        + Rational64::new(4, 3)
        + Rational64::from_integer(i64::from(s) * (p as i64 + 1));
    Ok(PhiResult {
        phis,
        selection: Some(SelectionResult {
            m,
            i,
            tau,
            r: 0,
            s,
            p_hat,
            delta: select::delta(p, p_hat),
            t: 0,
            predicted_cost: cost,
        }),
        matmul_count: ctx.matmul_count(),
        structure,
        alphas: None,
        t_per_degree: Vec::new(),
    })
}
