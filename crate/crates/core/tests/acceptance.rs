//! Acceptance suite: one PASS/FAIL line per criterion, non-zero exit if any fails.

use std::time::{Duration, Instant};

use dashu_int::{IBig, UBig};
use dashu_ratio::RBig;
use num_rational::Rational64;
use phi_core::cli::corpus::{build_corpus, CorpusMember};
use phi_core::cli::theta_table;
use phi_core::densemat::{DenseMatrix, EvalContext, StructureTag, DEFAULT_SEED};
use phi_core::normest::{est_power_one_norm, exact_power_one_norm, PowerActionSpec, DEFAULT_T_COLS};
use phi_core::oracle::{self, ExtendedMatrix};
use phi_core::pade::{self, DEGREES, REGEN_EXTRA_TERMS, UNIT_ROUNDOFF as U};
use phi_core::phieval::{double_argument_step, phi_funm, ps_eval_pair};
use phi_core::select::choose_tau;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

const CORPUS_SEED: u64 = 0;
const ORACLE_DIGITS: u32 = 64;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs()
}

fn theta_regeneration() -> Outcome {
    let start = Instant::now();
    let rows = match theta_table(REGEN_EXTRA_TERMS) {
        Ok(r) => r,
        Err(e) => return outcome(false, format!("error: {e}")),
    };
    let elapsed = start.elapsed();
    let bad: Vec<String> = rows
        .iter()
        .filter(|r| !r.matches)
        .map(|r| format!("({},{}) {:.3e} vs {:.3e}", r.m, r.p, r.regenerated, r.embedded))
        .collect();
    let find = |m, p| rows.iter().find(|r| r.m == m && r.p == p).map(|r| r.regenerated).unwrap_or(f64::NAN);
    let (t11, t1210) = (find(1, 1), find(12, 10));
    let pass = bad.is_empty() && rows.len() == 80 && elapsed <= Duration::from_secs(300);
    outcome(
        pass,
        format!(
            "{}/80 entries to 3 digits; theta(1,1)={t11:.3e}, theta(12,10)={t1210:.3e}; {:.1}s{}",
            rows.len() - bad.len(),
            elapsed.as_secs_f64(),
            if bad.is_empty() { String::new() } else { format!("; mismatches {bad:?}") }
        ),
    )
}

fn fact(n: usize) -> UBig {
    (1..=n).fold(UBig::ONE, |a, k| a * UBig::from(k))
}

fn ratio(num: IBig, den: UBig) -> RBig {
    RBig::from_parts(num, den)
}

/// Taylor coefficients of `num/den` through degree `k`, exactly.
fn series_quotient(num: &[RBig], den: &[RBig], k: usize) -> Vec<RBig> {
    let mut q: Vec<RBig> = Vec::with_capacity(k + 1);
    for d in 0..=k {
        let mut acc = num.get(d).cloned().unwrap_or(RBig::ZERO);
        for i in 1..=d.min(den.len() - 1) {
            acc -= &den[i] * &q[d - i];
        }
        q.push(acc / &den[0]);
    }
    q
}

fn order_conditions() -> Outcome {
    let start = Instant::now();
    let mut worst = 0.0f64;
    let mut problems = Vec::new();
    for (m, p) in [(1usize, 1usize), (2, 2), (3, 1)] {
        let (num, den) = pade::pade_coeffs_exact(m, p);
        let kmax = 2 * m + p + 2;
        // R^{(p)} = N/D, then R^{(j)} = z R^{(j+1)} + 1/j!.
        let mut r = series_quotient(&num, &den, kmax);
        for j in (0..=p).rev() {
            if j < p {
                let mut shifted = vec![ratio(IBig::ONE, fact(j))];
                shifted.extend(r.iter().take(kmax).cloned());
                r = shifted;
            }
            let first = 2 * m + p - j + 1;
            for d in 0..first {
                let phi = ratio(IBig::ONE, fact(d + j));
                if r[d] != phi {
                    problems.push(format!("(m={m},p={p},j={j}) degree {d} mismatch"));
                }
            }
            // Error convention: φ_j − R^{(j)}.
            let err = ratio(IBig::ONE, fact(first + j)) - &r[first];
            let sign = if m % 2 == 0 { IBig::ONE } else { -IBig::ONE };
            let want = ratio(sign * IBig::from(fact(m + p) * fact(m)), fact(2 * m + p) * fact(2 * m + p + 1));
            let diff = ((&err - &want) / &want).to_f64().value().abs();
            worst = worst.max(diff);
            if !(diff <= 1e-8) {
                problems.push(format!("(m={m},p={p},j={j}) leading coefficient off by {diff:e}"));
            }
        }
    }
    let elapsed = start.elapsed();
    outcome(
        problems.is_empty() && elapsed <= Duration::from_secs(10),
        format!("worst relative mismatch {worst:e}; {:.2}s {problems:?}", elapsed.as_secs_f64()),
    )
}

struct MemberRun {
    name: String,
    well_conditioned: bool,
    errors: Vec<f64>,
    counted: Rational64,
    formula: Option<Rational64>,
}

fn run_corpus(corpus: &[CorpusMember], p: usize) -> Result<(Vec<MemberRun>, Duration), String> {
    let start = Instant::now();
    let mut runs = Vec::new();
    for m in corpus {
        let res = phi_funm(&m.matrix, p, &mut EvalContext::default()).map_err(|e| format!("{}: {e}", m.entry.name))?;
        let reference = oracle::phi_reference(&m.matrix, p, ORACLE_DIGITS).map_err(|e| format!("{}: {e}", m.entry.name))?;
        let errors = res
            .phis
            .iter()
            .zip(&reference)
            .map(|(x, r)| ExtendedMatrix::from_dense(x, r.bits()).rel_diff(r))
            .collect();
        let formula = res.selection.as_ref().map(|s| {
            Rational64::from_integer((s.i + p) as i64) + Rational64::new(4, 3) + Rational64::from_integer(i64::from(s.s) * (p as i64 + 1))
        });
        runs.push(MemberRun {
            name: m.entry.name.clone(),
            well_conditioned: m.entry.well_conditioned,
            errors,
            counted: res.matmul_count,
            formula,
        });
    }
    Ok((runs, start.elapsed()))
}

fn oracle_accuracy(runs: &[MemberRun], elapsed: Duration) -> Outcome {
    let mut violations = Vec::new();
    let (mut worst_wc, mut worst_all) = (0.0f64, 0.0f64);
    for r in runs {
        for (j, &e) in r.errors.iter().enumerate() {
            worst_all = worst_all.max(e);
            if r.well_conditioned {
                worst_wc = worst_wc.max(e);
            }
            let bound = if r.well_conditioned { 1e-12 } else { 1e-9 };
            if !(e <= bound) {
                violations.push(format!("{} j={j}: {e:.2e} > {bound:e}", r.name));
            }
        }
    }
    let fast = elapsed <= Duration::from_secs(120);
    outcome(
        violations.is_empty() && fast,
        format!(
            "{} members, p=10; worst well-conditioned {worst_wc:.2e}, worst overall {worst_all:.2e}; {:.1}s{}",
            runs.len(),
            elapsed.as_secs_f64(),
            if violations.is_empty() { String::new() } else { format!("; violations {violations:?}") }
        ),
    )
}

fn exact_cost(runs: &[MemberRun]) -> Outcome {
    let bad: Vec<String> = runs
        .iter()
        .filter(|r| r.formula.map_or(r.counted != Rational64::from_integer(0), |f| f != r.counted))
        .map(|r| format!("{}: counted {} formula {:?}", r.name, r.counted, r.formula))
        .collect();
    outcome(bad.is_empty(), format!("{} runs compared exactly {bad:?}", runs.len()))
}

fn ps_counts() -> Outcome {
    let mut problems = Vec::new();
    let a = DenseMatrix::from_fn(5, |i, j| ((i * 3 + j) % 5) as f64 / 10.0 - 0.2);
    let measure = |m: usize, tau: usize| {
        let mut ctx = EvalContext::default();
        let coeffs = pade::cached_pade_coeffs(m, 3).unwrap();
        ps_eval_pair(&a, &coeffs, tau, &mut ctx).unwrap();
        ctx.matmul_count()
    };
    let c = measure(12, 4);
    if c != Rational64::from_integer(7) {
        problems.push(format!("m=12,tau=4 counted {c}"));
    }
    for (i, &m) in DEGREES.iter().enumerate() {
        let c = measure(m, choose_tau(m, i));
        if c != Rational64::from_integer(i as i64) {
            problems.push(format!("m={m} counted {c}, want {i}"));
        }
    }
    outcome(problems.is_empty(), format!("m=12,tau=4 -> {}; all m_i -> i: {problems:?}", measure(12, 4)))
}

fn triangular_path(corpus: &[CorpusMember]) -> Outcome {
    let mut problems = Vec::new();
    let mut checked = 0;
    let mut worst = 0.0f64;
    for m in corpus.iter().filter(|m| m.entry.structure == StructureTag::UpperTriangular) {
        checked += 1;
        let res = match phi_funm(&m.matrix, 10, &mut EvalContext::default()) {
            Ok(r) => r,
            Err(e) => {
                problems.push(format!("{}: {e}", m.entry.name));
                continue;
            }
        };
        let n = m.matrix.n();
        for (j, f) in res.phis.iter().enumerate() {
            if (0..n).any(|i| (0..i).any(|k| f[(i, k)] != 0.0)) {
                problems.push(format!("{} phi{j} not triangular", m.entry.name));
            }
        }
        for i in 0..n {
            let want = m.matrix[(i, i)].exp();
            let e = rel(res.phis[0][(i, i)], want);
            worst = worst.max(e);
            if !(e <= 2.0 * U) {
                problems.push(format!("{} diag {i}: {e:.2e}", m.entry.name));
            }
        }
    }
    outcome(
        problems.is_empty() && checked > 0,
        format!("{checked} triangular members; worst diagonal error {:.2}u {problems:?}", worst / U),
    )
}

fn scalar_closed_forms() -> Outcome {
    let mut worst = 0.0f64;
    let mut problems = Vec::new();
    for z in [1.0, -1.0, 5.0, -5.0, 20.0, -20.0] {
        let res = phi_funm(&DenseMatrix::from_diag(&[z]), 5, &mut EvalContext::default()).unwrap();
        // φ₀ = e^z, φ_j = (φ_{j−1} − 1/(j−1)!)/z, evaluated in extended precision.
        let want = oracle::phi_scalar(z, 5, ORACLE_DIGITS);
        for j in 0..=5 {
            let e = rel(res.phis[j][(0, 0)], want[j]);
            worst = worst.max(e);
            if !(e <= 100.0 * U) {
                problems.push(format!("z={z} j={j}: {:.1}u", e / U));
            }
        }
    }
    outcome(problems.is_empty(), format!("worst {:.1}u {problems:?}", worst / U))
}

fn double_argument() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(42);
    let four = DenseMatrix::from_fn(4, |_, _| rng.gen_range(-1.0..1.0));
    let p = 6;
    let mut worst = 0.0f64;
    let mut problems = Vec::new();
    for (label, x) in [("scalar", DenseMatrix::from_diag(&[0.3])), ("4x4", four)] {
        let at_x = oracle::phi_reference(&x, p, ORACLE_DIGITS).unwrap();
        let at_2x = oracle::phi_reference(&x.scaled(2.0), p, ORACLE_DIGITS).unwrap();
        let mut phis: Vec<DenseMatrix> = at_x.iter().map(ExtendedMatrix::to_dense).collect();
        let mut ctx = EvalContext::default();
        double_argument_step(&mut phis, &mut ctx).unwrap();
        phis[0] = ctx.matmul(&phis[0], &phis[0]).unwrap();
        for (j, (got, want)) in phis.iter().zip(&at_2x).enumerate() {
            let e = ExtendedMatrix::from_dense(got, want.bits()).rel_diff(want);
            worst = worst.max(e);
            if !(e <= 50.0 * U) {
                problems.push(format!("{label} j={j}: {:.1}u", e / U));
            }
        }
    }
    outcome(problems.is_empty(), format!("p={p}; worst {:.1}u {problems:?}", worst / U))
}

fn estimator_bounds(corpus: &[CorpusMember]) -> Outcome {
    let mut problems = Vec::new();
    let mut checks = 0;
    for m in corpus.iter().filter(|m| m.entry.n <= 40) {
        for r in 1..=8 {
            let exact = exact_power_one_norm(&m.matrix, r);
            let est = est_power_one_norm(&PowerActionSpec::new(&m.matrix, r), DEFAULT_T_COLS, DEFAULT_SEED);
            checks += 1;
            if !(est <= exact + 10.0 * U * exact) {
                problems.push(format!("{} r={r}: {est:e} > {exact:e}", m.entry.name));
            }
        }
    }
    outcome(problems.is_empty(), format!("{checks} (member, r) pairs {problems:?}"))
}

fn main() {
    let corpus = build_corpus(CORPUS_SEED).expect("corpus builds");
    let mut results: Vec<(&str, Outcome)> = Vec::new();

    results.push(("theta-table regeneration", theta_regeneration()));
    results.push(("order conditions", order_conditions()));
    match run_corpus(&corpus, 10) {
        Ok((runs, elapsed)) => {
            results.push(("oracle accuracy", oracle_accuracy(&runs, elapsed)));
            results.push(("exact cost accounting", exact_cost(&runs)));
        }
        Err(e) => {
            results.push(("oracle accuracy", outcome(false, e.clone())));
            results.push(("exact cost accounting", outcome(false, e)));
        }
    }
    results.push(("Paterson-Stockmeyer counts", ps_counts()));
    results.push(("triangular path", triangular_path(&corpus)));
    results.push(("scalar closed forms", scalar_closed_forms()));
    results.push(("double-argument identity", double_argument()));
    results.push(("norm estimator bounds", estimator_bounds(&corpus)));

    let failed = results.iter().filter(|(_, o)| !o.pass).count();
    for (name, o) in &results {
        println!("{} {name}: {}", if o.pass { "PASS" } else { "FAIL" }, o.detail);
    }
    println!("acceptance: {}/{} criteria passed", results.len() - failed, results.len());
    if failed > 0 {
        std::process::exit(1);
    }
}
