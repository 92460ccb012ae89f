//! Choice of the Padé degree `m`, the block size `τ` and the scaling `s`.
//!
//! The cost of a run is `i + p + 4/3 + s(p+1)` products, where `i` indexes
//! the optimal degrees. For each degree the smallest admissible `s` is
//! `max(⌈log₂(α_r/θ_{m,p})⌉, t)`, with `α_r` a gauge built from norms of
//! powers of `A` and `t` a floor that keeps the Padé evaluation accurate for
//! strongly nonnormal inputs.

use num_rational::Rational64;
use num_traits::{ToPrimitive, Zero};
use serde::Serialize;

use crate::densemat::{DenseMatrix, EvalContext};
use crate::error::{PhiError, Result};
use crate::normest::{self, PowerActionSpec};
use crate::pade::{self, ThetaTable, I_MAX, M_MAX, UNIT_ROUNDOFF};
use crate::scalar::Scalar;

/// `α_r` for `r = 2..=r_max`, stored at index `r − 2`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AlphaSeq {
    pub values: Vec<f64>,
    pub r_max: usize,
}

impl AlphaSeq {
    pub fn get(&self, r: usize) -> f64 {
        self.values[r - 2]
    }
}

/// `α_r = max(‖A^r‖₁^{1/r}, ‖A^{r+1}‖₁^{1/(r+1)})` with estimated norms, or
/// explicitly formed powers when `ctx.exact_alpha` is set.
pub fn alpha_seq<S: Scalar>(a: &DenseMatrix<S>, r_max: usize, ctx: &EvalContext) -> Result<AlphaSeq> {
    assert!(r_max >= 2, "r_max must be at least 2");
    let root = |k: usize| -> Result<f64> {
        let norm = if ctx.exact_alpha {
            normest::exact_power_one_norm(a, k as u32)
        } else {
            let spec = PowerActionSpec::new(a, k as u32);
            normest::est_power_one_norm(&spec, normest::DEFAULT_T_COLS, ctx.seed)
        };
        if !norm.is_finite() {
            return Err(PhiError::InputMagnitude);
        }
        Ok(norm.powf(1.0 / k as f64))
    };
    let roots = (2..=r_max + 1).map(root).collect::<Result<Vec<f64>>>()?;
    let values = roots.windows(2).map(|w| w[0].max(w[1])).collect();
    Ok(AlphaSeq { values, r_max })
}

/// `p` when `θ ≥ 1`, else 0.
pub fn p_hat(theta_at_max: f64, p: usize) -> usize {
    if theta_at_max >= 1.0 {
        p
    } else {
        0
    }
}

/// Largest `r` with `r(r−1) ≤ 2m + p̂ + 1`.
pub fn r_max(m: usize, p_hat: usize) -> usize {
    let bound = 2 * m + p_hat + 1;
    let mut r = 2;
    while (r + 1) * r <= bound {
        r += 1;
    }
    r
}

/// `δ = (p−1)(p−p̂)/p + 1`; equals 1 when `p̂ = p` and `p` when `p̂ = 0`.
pub fn delta(p: usize, p_hat: usize) -> f64 {
    let (p, ph) = (p as f64, p_hat as f64);
    (p - 1.0) * (p - ph) / p + 1.0
}

/// Scaling floor from the first term of the backward-error series at `|A|`,
/// evaluated from base-2 logarithms of each factor so nothing overflows.
pub fn t_param<S: Scalar>(a: &DenseMatrix<S>, m: usize, p: usize, delta: f64) -> Result<u32> {
    let k = 2 * m + p + 1;
    let norm = a.one_norm();
    if norm == 0.0 {
        return Ok(0);
    }
    let log_pow = normest::log2_abs_power_one_norm(a, k as u32);
    if log_pow == f64::NEG_INFINITY {
        return Ok(0);
    }
    if !log_pow.is_finite() || !norm.is_finite() {
        return Err(PhiError::InputMagnitude);
    }
    let log_c = pade::leading_error_coefficient_f64(m, p).log2();
    let num = log_c + log_pow - UNIT_ROUNDOFF.log2() - delta * norm.log2();
    let t = (num / (k as f64 - delta)).ceil();
    Ok(if t > 0.0 { t as u32 } else { 0 })
}

/// Number of products Paterson–Stockmeyer needs for `N_m` and `D_m` together.
pub fn ps_count(m: usize, tau: usize) -> usize {
    let divides = usize::from(m.is_multiple_of(tau));
    tau - 1 + 2 * (m / tau - divides)
}

/// `⌊√(2m)⌋`, or `⌈√(2m)⌉` when the floor does not achieve `π_m(τ) = i`.
pub fn choose_tau(m: usize, i: usize) -> usize {
    let lo = (2 * m).isqrt();
    if ps_count(m, lo) == i {
        lo
    } else {
        lo + 1
    }
}

/// Cost-model terms of one degree index.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DegreeTerms {
    pub m: usize,
    pub theta: f64,
    pub p_hat: usize,
    pub delta: f64,
    pub t: u32,
}

/// `C_{m_i,r}` for `i = 0..=7`, `r = 2..=r_max`; `None` marks infeasible cells.
#[derive(Debug, Clone, PartialEq)]
pub struct CostMatrix {
    pub p: usize,
    pub r_max: usize,
    pub entries: Vec<Vec<Option<Rational64>>>,
    pub degrees: Vec<DegreeTerms>,
    /// `max(⌈log₂(α_r/θ)⌉, 0)` per cell, kept for diagnostics.
    pub s_alpha: Vec<Vec<Option<u32>>>,
}

impl CostMatrix {
    pub fn t_per_degree(&self) -> Vec<u32> {
        self.degrees.iter().map(|d| d.t).collect()
    }
}

fn cost(i: usize, p: usize, s: u32) -> Rational64 {
    Rational64::from_integer((i + p) as i64) + Rational64::new(4, 3) + Rational64::from_integer(i64::from(s) * (p as i64 + 1))
}

/// `max(⌈log₂(α/θ)⌉, 0)`.
pub fn s_from_alpha(alpha: f64, theta: f64) -> u32 {
    if alpha <= theta {
        return 0;
    }
    let s = (alpha.log2() - theta.log2()).ceil();
    // Guard against a logarithm landing just below an integer.
    let mut s = s.max(0.0) as u32;
    while alpha * 2f64.powi(-(s as i32)) > theta {
        s += 1;
    }
    s
}

pub fn build_cost_matrix<S: Scalar>(
    a: &DenseMatrix<S>,
    p: usize,
    alphas: &AlphaSeq,
    table: &ThetaTable,
) -> Result<CostMatrix> {
    let mut entries = Vec::with_capacity(I_MAX + 1);
    let mut s_alpha = Vec::with_capacity(I_MAX + 1);
    let mut degrees = Vec::with_capacity(I_MAX + 1);
    for i in 0..=I_MAX {
        let m = pade::degree(i);
        let theta = table.get(i, p);
        let ph = p_hat(theta, p);
        let d = delta(p, ph);
        let t = t_param(a, m, p, d)?;
        let mut row = Vec::with_capacity(alphas.r_max - 1);
        let mut srow = Vec::with_capacity(alphas.r_max - 1);
        for r in 2..=alphas.r_max {
            if 2 * m + ph + 1 >= r * (r - 1) {
                let s = s_from_alpha(alphas.get(r), theta);
                row.push(Some(cost(i, p, s.max(t))));
                srow.push(Some(s));
            } else {
                row.push(None);
                srow.push(None);
            }
        }
        entries.push(row);
        s_alpha.push(srow);
        degrees.push(DegreeTerms {
            m,
            theta,
            p_hat: ph,
            delta: d,
            t,
        });
    }
    Ok(CostMatrix {
        p,
        r_max: alphas.r_max,
        entries,
        degrees,
        s_alpha,
    })
}

fn ser_rational<S: serde::Serializer>(r: &Rational64, s: S) -> std::result::Result<S::Ok, S::Error> {
    s.serialize_str(&r.to_string())
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SelectionResult {
    pub m: usize,
    pub i: usize,
    pub tau: usize,
    pub r: usize,
    pub s: u32,
    pub p_hat: usize,
    pub delta: f64,
    pub t: u32,
    #[serde(serialize_with = "ser_rational")]
    pub predicted_cost: Rational64,
}

/// Minimal cell (ties: smaller `i`, then smaller `r`) and the parameters it encodes.
pub fn choose(costs: &CostMatrix, p: usize) -> Result<SelectionResult> {
    let mut best: Option<(usize, usize, Rational64)> = None;
    for (i, row) in costs.entries.iter().enumerate() {
        for (k, cell) in row.iter().enumerate() {
            if let Some(c) = *cell {
                if best.is_none_or(|(_, _, b)| c < b) {
                    best = Some((i, k + 2, c));
                }
            }
        }
    }
    let (i, r, c) = best.ok_or_else(|| PhiError::Inconsistent("no feasible cell".into()))?;
    let s = (c - Rational64::from_integer((i + p) as i64) - Rational64::new(4, 3)) / Rational64::from_integer(p as i64 + 1);
    if !s.is_integer() || s < Rational64::zero() {
        return Err(PhiError::Inconsistent(s.to_string()));
    }
    let s = s.to_integer().to_u32().ok_or_else(|| PhiError::Inconsistent(s.to_string()))?;
    let m = pade::degree(i);
    let deg = &costs.degrees[i];
    Ok(SelectionResult {
        m,
        i,
        tau: choose_tau(m, i),
        r,
        s,
        p_hat: deg.p_hat,
        delta: deg.delta,
        t: deg.t,
        predicted_cost: c,
    })
}

/// Everything the selection stage computed, for diagnostics.
#[derive(Debug, Clone)]
pub struct Selection {
    pub result: SelectionResult,
    pub alphas: AlphaSeq,
    pub costs: CostMatrix,
}

/// The full selection stage for `A` and `p`.
pub fn select<S: Scalar>(a: &DenseMatrix<S>, p: usize, ctx: &EvalContext) -> Result<Selection> {
    if p == 0 {
        return Err(PhiError::InvalidIndex);
    }
    let table = &ThetaTable::EMBEDDED;
    let global_p_hat = p_hat(table.get(I_MAX, p), p);
    let alphas = alpha_seq(a, r_max(M_MAX, global_p_hat), ctx)?;
    let costs = build_cost_matrix(a, p, &alphas, table)?;
    let result = choose(&costs, p)?;
    Ok(Selection { result, alphas, costs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pade::DEGREES;

    fn jordan(n: usize) -> DenseMatrix {
        DenseMatrix::from_fn(n, |i, j| if j == i + 1 { 1.0 } else { 0.0 })
    }

    #[test]
    fn alpha_examples() {
        let ctx = EvalContext::default();
        let a = alpha_seq(&DenseMatrix::<f64>::identity(5), 5, &ctx).unwrap();
        assert!(a.values.iter().all(|&v| v == 1.0));
        let a = alpha_seq(&jordan(4), 4, &ctx).unwrap();
        assert_eq!(a.get(4), 0.0);
        let a = alpha_seq(&DenseMatrix::from_diag(&[2.0, 1.0]), 6, &ctx).unwrap();
        for r in 2..=6 {
            assert!((a.get(r) - 2.0).abs() <= 4.0 * UNIT_ROUNDOFF * 2.0, "{}", a.get(r));
        }
    }

    #[test]
    fn p_hat_examples() {
        assert_eq!(p_hat(4.87, 10), 10);
        assert_eq!(p_hat(2.00e-5, 1), 0);
        assert_eq!(p_hat(1.0, 5), 5);
    }

    #[test]
    fn r_max_examples() {
        assert_eq!(r_max(12, 5), 6);
        assert_eq!(r_max(1, 0), 2);
        assert_eq!(r_max(12, 0), 5);
        for m in 1..=12 {
            for ph in 0..=10 {
                let closed = ((1.0 + (1.0 + 4.0 * (2 * m + ph + 1) as f64).sqrt()) / 2.0).floor() as usize;
                assert_eq!(r_max(m, ph), closed);
            }
        }
    }

    #[test]
    fn delta_endpoints() {
        for p in 1..=10 {
            assert_eq!(delta(p, p), 1.0);
            assert_eq!(delta(p, 0), p as f64);
        }
    }

    #[test]
    fn t_examples() {
        assert_eq!(t_param(&jordan(3), 12, 1, 1.0).unwrap(), 0);
        let a = DenseMatrix::scalar_identity(4, 1e-3);
        assert_eq!(t_param(&a, 3, 2, delta(2, 0)).unwrap(), 0);
    }

    #[test]
    fn t_scalar_plug_in() {
        // m = p = 1, δ = 1, A = [2]: log2((1/72) · 2^4 / (2^-53 · 2)) / 3
        //   = (52 − log2 9) / 3 ≈ 16.28 → 17.
        let a = DenseMatrix::from_diag(&[2.0]);
        assert_eq!(t_param(&a, 1, 1, 1.0).unwrap(), 17);
    }

    #[test]
    fn degree_and_ps_identities() {
        for i in 0..=I_MAX {
            let m = DEGREES[i];
            let tau = choose_tau(m, i);
            assert_eq!(ps_count(m, tau), i, "m={m} tau={tau}");
            let fl = (2 * m).isqrt();
            assert!(tau == fl || tau == fl + 1);
        }
        assert_eq!(choose_tau(12, 7), 4);
        assert_eq!(ps_count(12, 4), 7);
        assert_eq!(ps_count(6, 3), 4);
    }

    #[test]
    fn cost_cells() {
        let table = ThetaTable::EMBEDDED;
        // Unscaled cell: α ≤ θ and t = 0.
        let a = DenseMatrix::scalar_identity(3, 1e-6);
        let alphas = alpha_seq(&a, 5, &EvalContext::default()).unwrap();
        let c = build_cost_matrix(&a, 1, &alphas, &table).unwrap();
        assert_eq!(c.entries[7][0], Some(Rational64::new(7 * 3 + 3 + 4, 3)));
        // Infeasible: m = 1, p̂ = 0, r = 3.
        assert_eq!(c.entries[0][1], None);
        // α = 2·θ_{12,1} forces exactly one halving.
        assert_eq!(s_from_alpha(9.74, table.get(7, 1)), 1);
        assert_eq!(cost(7, 1, 1), Rational64::from_integer(7 + 1 + 2) + Rational64::new(4, 3));
        for row in &c.entries {
            for cell in row.iter().flatten() {
                assert!(*cell >= Rational64::from_integer(1) + Rational64::new(4, 3));
            }
        }
    }

    #[test]
    fn choose_single_cell_and_ties() {
        let degrees = (0..=I_MAX)
            .map(|i| DegreeTerms {
                m: DEGREES[i],
                theta: 1.0,
                p_hat: 1,
                delta: 1.0,
                t: 0,
            })
            .collect();
        let mut entries = vec![vec![None; 4]; I_MAX + 1];
        entries[3][2] = Some(cost(3, 2, 1));
        let costs = CostMatrix {
            p: 2,
            r_max: 5,
            entries: entries.clone(),
            degrees,
            s_alpha: vec![vec![None; 4]; I_MAX + 1],
        };
        let r = choose(&costs, 2).unwrap();
        assert_eq!((r.i, r.r, r.s, r.m), (3, 4, 1, 4));

        // p = 1: (i, s) = (1, 2) and (3, 1) cost the same; smaller i wins.
        let mut costs = costs;
        costs.p = 1;
        costs.entries = vec![vec![None; 4]; I_MAX + 1];
        costs.entries[3][0] = Some(cost(3, 1, 1));
        costs.entries[1][3] = Some(cost(1, 1, 2));
        costs.entries[1][1] = Some(cost(1, 1, 2));
        assert_eq!(cost(3, 1, 1), cost(1, 1, 2));
        let r = choose(&costs, 1).unwrap();
        assert_eq!((r.i, r.r, r.s), (1, 3, 2));
        costs.entries[1] = vec![None; 4];
        let r = choose(&costs, 1).unwrap();
        assert_eq!((r.i, r.r, r.s), (3, 2, 1));
    }

    #[test]
    fn inconsistent_cost_rejected() {
        let degrees = (0..=I_MAX)
            .map(|i| DegreeTerms {
                m: DEGREES[i],
                theta: 1.0,
                p_hat: 1,
                delta: 1.0,
                t: 0,
            })
            .collect();
        let mut entries = vec![vec![None; 1]; I_MAX + 1];
        entries[0][0] = Some(Rational64::new(7, 2));
        let costs = CostMatrix {
            p: 1,
            r_max: 2,
            entries,
            degrees,
            s_alpha: vec![vec![None; 1]; I_MAX + 1],
        };
        assert!(matches!(choose(&costs, 1), Err(PhiError::Inconsistent(_))));
    }

    #[test]
    fn gate_holds_on_random_inputs() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        for _ in 0..20 {
            let n = rng.gen_range(2..12);
            let scale = 10f64.powf(rng.gen_range(-3.0..3.0));
            let a = DenseMatrix::from_fn(n, |_, _| scale * rng.gen_range(-1.0..1.0));
            for p in [1, 3, 8] {
                let sel = select(&a, p, &EvalContext::default()).unwrap();
                let r = &sel.result;
                let alpha = sel.alphas.get(r.r);
                let theta = pade::theta(r.i, p);
                assert!(alpha * 2f64.powi(-(r.s as i32)) <= theta || r.s == r.t);
                assert_eq!(r.predicted_cost, cost(r.i, p, r.s));
            }
        }
    }
}
