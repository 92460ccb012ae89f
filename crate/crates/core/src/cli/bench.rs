//! Forward-error and cost benchmark of `phi_funm` against the oracle.

use std::fmt::Write as _;
use std::fs;
use std::path::PathBuf;

use num_rational::Rational64;
use num_traits::Zero;
use serde::Serialize;

use super::corpus::{load_corpus, CorpusMember};
use super::CliError;
use crate::densemat::EvalContext;
use crate::oracle::{self, ExtendedMatrix};
use crate::phieval::phi_funm;

#[derive(Debug, Clone)]
pub struct BenchConfig {
    pub corpus_dir: PathBuf,
    pub p: usize,
    pub digits: u32,
    pub seed: u64,
    pub exact_alpha: bool,
    pub out_dir: PathBuf,
}

/// One `(matrix, j)` row. `rel_err` is empty exactly when `status` is a failure tag.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BenchRow {
    pub matrix: String,
    pub n: usize,
    pub j: usize,
    pub rel_err: Option<f64>,
    pub matmul_count: String,
    pub predicted_cost: String,
    pub cost_matches: bool,
    pub m: Option<usize>,
    pub s: Option<u32>,
    pub well_conditioned: bool,
    pub status: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct JSummary {
    pub j: usize,
    pub max: f64,
    pub median: f64,
    pub evaluated: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BenchReport {
    pub rows: Vec<BenchRow>,
    pub per_j: Vec<JSummary>,
    pub total_cost: Rational64,
    pub failures: usize,
    pub cost_mismatches: usize,
}

impl BenchReport {
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        for r in &self.rows {
            w.serialize(r).expect("rows serialize");
        }
        String::from_utf8(w.into_inner().expect("in-memory writer")).expect("utf-8")
    }

    pub fn summary(&self) -> String {
        let mut s = String::new();
        let matrices = self.rows.iter().filter(|r| r.j == 0).count();
        writeln!(s, "matrices: {matrices}").unwrap();
        writeln!(s, "rows: {}", self.rows.len()).unwrap();
        writeln!(s, "failures: {}", self.failures).unwrap();
        writeln!(s, "cost mismatches: {}", self.cost_mismatches).unwrap();
        writeln!(s, "total matmul cost: {} (~{:.2})", self.total_cost, ratio_f64(self.total_cost)).unwrap();
        writeln!(s, "{:>3} {:>12} {:>12} {:>6}", "j", "max err", "median err", "count").unwrap();
        for js in &self.per_j {
            writeln!(s, "{:>3} {:>12.3e} {:>12.3e} {:>6}", js.j, js.max, js.median, js.evaluated).unwrap();
        }
        s
    }
}

fn ratio_f64(r: Rational64) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

fn failed_rows(m: &CorpusMember, p: usize, tag: &str) -> Vec<BenchRow> {
    (0..=p)
        .map(|j| BenchRow {
            matrix: m.entry.name.clone(),
            n: m.entry.n,
            j,
            rel_err: None,
            matmul_count: String::new(),
            predicted_cost: String::new(),
            cost_matches: false,
            m: None,
            s: None,
            well_conditioned: m.entry.well_conditioned,
            status: format!("failed:{tag}"),
        })
        .collect()
}

/// Evaluates every member at index `p`; per-matrix failures become tagged rows.
pub fn bench_members(members: &[CorpusMember], p: usize, digits: u32, seed: u64, exact_alpha: bool) -> BenchReport {
    let mut rows = Vec::new();
    let mut total = Rational64::zero();
    for m in members {
        let mut ctx = EvalContext::new(seed).with_exact_alpha(exact_alpha);
        let res = match phi_funm(&m.matrix, p, &mut ctx) {
            Ok(r) => r,
            Err(e) => {
                rows.extend(failed_rows(m, p, &format!("phi_funm: {e}")));
                continue;
            }
        };
        let reference = match oracle::phi_reference(&m.matrix, p, digits) {
            Ok(r) => r,
            Err(e) => {
                rows.extend(failed_rows(m, p, &format!("oracle: {e}")));
                continue;
            }
        };
        total += res.matmul_count;
        let predicted = res.selection.as_ref().map_or(Rational64::zero(), |s| s.predicted_cost);
        for (j, (x, r)) in res.phis.iter().zip(&reference).enumerate() {
            let err = ExtendedMatrix::from_dense(x, r.bits()).rel_diff(r);
            let ok = err.is_finite();
            rows.push(BenchRow {
                matrix: m.entry.name.clone(),
                n: m.entry.n,
                j,
                rel_err: ok.then_some(err),
                matmul_count: res.matmul_count.to_string(),
                predicted_cost: predicted.to_string(),
                cost_matches: res.matmul_count == predicted,
                m: res.selection.as_ref().map(|s| s.m),
                s: res.selection.as_ref().map(|s| s.s),
                well_conditioned: m.entry.well_conditioned,
                status: if ok { "ok".into() } else { "failed:non-finite error".into() },
            });
        }
    }
    let per_j = (0..=p)
        .map(|j| {
            let mut e: Vec<f64> = rows.iter().filter(|r| r.j == j).filter_map(|r| r.rel_err).collect();
            e.sort_by(f64::total_cmp);
            JSummary {
                j,
                max: e.last().copied().unwrap_or(f64::NAN),
                median: if e.is_empty() { f64::NAN } else { e[e.len() / 2] },
                evaluated: e.len(),
            }
        })
        .collect();
    let failures = rows.iter().filter(|r| r.rel_err.is_none()).count();
    let cost_mismatches = rows.iter().filter(|r| r.rel_err.is_some() && !r.cost_matches).count();
    BenchReport {
        rows,
        per_j,
        total_cost: total,
        failures,
        cost_mismatches,
    }
}

/// Benchmarks a corpus directory and writes `bench.csv` and `summary.txt`.
pub fn bench(cfg: &BenchConfig) -> Result<BenchReport, CliError> {
    if cfg.p == 0 {
        return Err(CliError::Usage("p must be at least 1".into()));
    }
    let members = load_corpus(&cfg.corpus_dir)?;
    let report = bench_members(&members, cfg.p, cfg.digits, cfg.seed, cfg.exact_alpha);
    fs::create_dir_all(&cfg.out_dir).map_err(|e| super::io_err(&cfg.out_dir, e))?;
    for (name, body) in [("bench.csv", report.to_csv()), ("summary.txt", report.summary())] {
        let path = cfg.out_dir.join(name);
        fs::write(&path, body).map_err(|e| super::io_err(&path, e))?;
    }
    Ok(report)
}
