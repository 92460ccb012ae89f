//! 1-norm information about matrix powers without forming them.
//!
//! [`est_power_one_norm`] is the block 1-norm estimator of Higham and Tisseur
//! applied to the implicit operator `A^r`; [`exact_abs_power_one_norm`]
//! evaluates `‖|A|^k‖₁ = ‖(|A|ᵀ)^k e‖_∞` with `k` matrix-vector products.

use std::collections::HashSet;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::densemat::DenseMatrix;
use crate::scalar::{Scalar, ScalarKind};

pub const DEFAULT_T_COLS: usize = 2;
pub const MAX_ITER: usize = 5;

/// The implicit operator `A^r` (or its adjoint when `transposed`).
#[derive(Debug, Clone, Copy)]
pub struct PowerActionSpec<'a, S: Scalar> {
    pub base: &'a DenseMatrix<S>,
    pub exponent: u32,
    pub transposed: bool,
}

impl<'a, S: Scalar> PowerActionSpec<'a, S> {
    pub fn new(base: &'a DenseMatrix<S>, exponent: u32) -> Self {
        assert!(exponent >= 1, "power exponent must be at least 1");
        Self {
            base,
            exponent,
            transposed: false,
        }
    }

    fn apply_with(&self, m: &DenseMatrix<S>, cols: &[Vec<S>]) -> Vec<Vec<S>> {
        let mut y = cols.to_vec();
        for _ in 0..self.exponent {
            y = m.mul_block(&y);
        }
        y
    }
}

struct PowerOperator<S: Scalar> {
    forward: DenseMatrix<S>,
    backward: DenseMatrix<S>,
    exponent: u32,
}

impl<S: Scalar> PowerOperator<S> {
    fn new(spec: &PowerActionSpec<'_, S>) -> Self {
        let adj = spec.base.adjoint();
        let (forward, backward) = if spec.transposed {
            (adj, spec.base.clone())
        } else {
            (spec.base.clone(), adj)
        };
        Self {
            forward,
            backward,
            exponent: spec.exponent,
        }
    }

    fn apply(&self, x: &[Vec<S>]) -> Vec<Vec<S>> {
        let spec = PowerActionSpec {
            base: &self.forward,
            exponent: self.exponent,
            transposed: false,
        };
        spec.apply_with(&self.forward, x)
    }

    fn apply_adjoint(&self, x: &[Vec<S>]) -> Vec<Vec<S>> {
        let spec = PowerActionSpec {
            base: &self.backward,
            exponent: self.exponent,
            transposed: false,
        };
        spec.apply_with(&self.backward, x)
    }
}

fn col_one_norm<S: Scalar>(v: &[S]) -> f64 {
    v.iter().map(|x| x.abs()).sum()
}

fn unit_vector<S: Scalar>(n: usize, i: usize) -> Vec<S> {
    let mut v = vec![S::zero(); n];
    v[i] = S::one();
    v
}

fn random_sign_column<S: Scalar>(n: usize, rng: &mut ChaCha8Rng) -> Vec<S> {
    (0..n)
        .map(|_| S::from_real(if rng.gen::<bool>() { 1.0 } else { -1.0 }))
        .collect()
}

/// `|sᵀt| = n` for ±1 vectors.
fn parallel<S: Scalar>(s: &[S], t: &[S]) -> bool {
    let dot: S = s.iter().zip(t).map(|(&a, &b)| a * b).sum();
    dot.abs() == s.len() as f64
}

/// Lower bound for `‖A^r‖₁` from a few products of `A^r` and its adjoint with
/// `n x t_cols` blocks. Deterministic for a given seed.
pub fn est_power_one_norm<S: Scalar>(spec: &PowerActionSpec<'_, S>, t_cols: usize, seed: u64) -> f64 {
    let n = spec.base.n();
    let op = PowerOperator::new(spec);

    // Small problems: every unit vector, i.e. the exact norm.
    if n <= 4 || t_cols >= n {
        let cols: Vec<Vec<S>> = (0..n).map(|i| unit_vector(n, i)).collect();
        return op.apply(&cols).iter().map(|y| col_one_norm(y)).fold(0.0, f64::max);
    }

    let t = t_cols.max(1);
    let real = S::KIND == ScalarKind::Real;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let inv_n = 1.0 / n as f64;

    let mut x: Vec<Vec<S>> = Vec::with_capacity(t);
    x.push(vec![S::from_real(inv_n); n]);
    while x.len() < t {
        let mut c = random_sign_column::<S>(n, &mut rng);
        let mut tries = 0;
        while real && tries < 100 && x.iter().any(|prev| {
            let scaled: Vec<S> = prev.iter().map(|v| v.unit_sign()).collect();
            parallel(&c, &scaled)
        }) {
            c = random_sign_column(n, &mut rng);
            tries += 1;
        }
        x.push(c.into_iter().map(|v| v.scale(inv_n)).collect());
    }

    let mut est_old = 0.0f64;
    let mut est = 0.0f64;
    let mut ind: Vec<usize> = Vec::new();
    let mut ind_best: Option<usize> = None;
    let mut hist: HashSet<usize> = HashSet::new();
    let mut s_old: Option<Vec<Vec<S>>> = None;

    for k in 1..=MAX_ITER + 1 {
        let y = op.apply(&x);
        let (jmax, est_k) = y
            .iter()
            .map(|c| col_one_norm(c))
            .enumerate()
            .fold((0, -1.0), |b, c| if c.1 > b.1 { c } else { b });
        est = est_k;
        if k >= 2 && (est > est_old || k == 2) {
            ind_best = ind.get(jmax).copied();
        }
        if k >= 2 && est <= est_old {
            est = est_old;
            break;
        }
        est_old = est;
        if k > MAX_ITER {
            break;
        }

        let mut s: Vec<Vec<S>> = y
            .iter()
            .map(|c| c.iter().map(|v| v.unit_sign()).collect())
            .collect();
        if real {
            if let Some(old) = &s_old {
                if s.iter().all(|c| old.iter().any(|o| parallel(c, o))) {
                    break;
                }
            }
            if t > 1 {
                for j in 0..s.len() {
                    let mut tries = 0;
                    while tries < 100
                        && (s[..j].iter().any(|c| parallel(&s[j], c))
                            || s_old.iter().flatten().any(|c| parallel(&s[j], c)))
                    {
                        s[j] = random_sign_column(n, &mut rng);
                        tries += 1;
                    }
                }
            }
        }

        let z = op.apply_adjoint(&s);
        let h: Vec<f64> = (0..n)
            .map(|i| z.iter().map(|c| c[i].abs()).fold(0.0, f64::max))
            .collect();
        let hmax = h.iter().copied().fold(0.0, f64::max);
        if let (true, Some(best)) = (k >= 2, ind_best) {
            if hmax == h[best] {
                break;
            }
        }
        let mut order: Vec<usize> = (0..n).collect();
        order.sort_by(|&a, &b| h[b].total_cmp(&h[a]).then(a.cmp(&b)));
        if t > 1 && order[..t].iter().all(|i| hist.contains(i)) {
            break;
        }
        let fresh: Vec<usize> = order.iter().copied().filter(|i| !hist.contains(i)).take(t).collect();
        if fresh.is_empty() {
            break;
        }
        x = fresh.iter().map(|&i| unit_vector(n, i)).collect();
        hist.extend(fresh.iter().copied());
        ind = fresh;
        s_old = Some(s);
    }
    est.max(0.0)
}

/// `‖A^r‖₁` with the power formed explicitly (uncounted products).
pub fn exact_power_one_norm<S: Scalar>(a: &DenseMatrix<S>, r: u32) -> f64 {
    let mut p = a.clone();
    for _ in 1..r {
        p = p.mul(a).expect("square operands");
    }
    p.one_norm()
}

/// `‖|A|^k‖₁` from `k` products of `|A|ᵀ` with the ones vector. May overflow
/// to `+inf`; see [`log2_abs_power_one_norm`] for the overflow-free variant.
pub fn exact_abs_power_one_norm<S: Scalar>(a: &DenseMatrix<S>, k: u32) -> f64 {
    let abs_t = a.abs().transpose();
    let mut v = vec![1.0f64; a.n()];
    for _ in 0..k {
        v = abs_t.mul_vec(&v);
    }
    v.into_iter().fold(0.0, f64::max)
}

/// `log₂ ‖|A|^k‖₁`, rescaling after every product so the value never
/// overflows. Returns `-inf` when the power vanishes.
pub fn log2_abs_power_one_norm<S: Scalar>(a: &DenseMatrix<S>, k: u32) -> f64 {
    let abs_t = a.abs().transpose();
    let mut v = vec![1.0f64; a.n()];
    let mut log_scale = 0.0;
    for _ in 0..k {
        v = abs_t.mul_vec(&v);
        let m = v.iter().copied().fold(0.0, f64::max);
        if m == 0.0 {
            return f64::NEG_INFINITY;
        }
        let e = m.log2().floor();
        let f = 2f64.powf(-e);
        v.iter_mut().for_each(|x| *x *= f);
        log_scale += e;
    }
    log_scale + v.into_iter().fold(0.0, f64::max).log2()
}
