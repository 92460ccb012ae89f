//! Command-line front end: `phi run | corpus | bench | verify | theta`.
//!
//! Exit status is 0 on success, 1 on numerical failure (including failed
//! verification) and 2 on input errors. Failures are reported on stderr as a
//! one-line JSON record.

pub mod bench;
pub mod corpus;
pub mod mmio;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use num_rational::Rational64;
use serde::Serialize;
use thiserror::Error;

use crate::densemat::{rel_err_one_norm, DenseMatrix, EvalContext, StructureTag, DEFAULT_SEED};
use crate::error::PhiError;
use crate::oracle::{self, ExtendedMatrix};
use crate::pade::{self, DEGREES, P_TABLE, REGEN_EXTRA_TERMS};
use crate::phieval::{phi_funm, phi_funm_forced, PhiResult};
use crate::scalar::{Scalar, ScalarKind};
use mmio::InputMatrix;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CliError {
    #[error("{}: {reason}", path.display())]
    Io { path: PathBuf, reason: String },
    #[error("parse error at line {line}, column {col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },
    #[error("dimension error: {0}")]
    Dimension(String),
    #[error("invalid arguments: {0}")]
    Usage(String),
    #[error(transparent)]
    Numerical(#[from] PhiError),
    #[error("verification failed: {0}")]
    Verification(String),
}

impl CliError {
    pub fn exit_code(&self) -> u8 {
        match self {
            Self::Numerical(e) => match e {
                PhiError::DimensionMismatch { .. }
                | PhiError::NotSquare { .. }
                | PhiError::Empty
                | PhiError::NonFinite { .. }
                | PhiError::InvalidIndex
                | PhiError::UnsupportedDegree(_) => 2,
                _ => 1,
            },
            Self::Verification(_) => 1,
            Self::Io { .. } | Self::Parse { .. } | Self::Dimension(_) | Self::Usage(_) => 2,
        }
    }

    fn kind(&self) -> &'static str {
        match self {
            Self::Io { .. } => "io",
            Self::Parse { .. } => "parse",
            Self::Dimension(_) => "dimension",
            Self::Usage(_) => "usage",
            Self::Numerical(_) => "numerical",
            Self::Verification(_) => "verification",
        }
    }

    /// Machine-readable form written to stderr on failure.
    pub fn record(&self) -> serde_json::Value {
        let mut err = serde_json::json!({
            "kind": self.kind(),
            "message": self.to_string(),
            "exit_code": self.exit_code(),
        });
        if let Self::Parse { line, col, .. } = self {
            err["line"] = (*line).into();
            err["column"] = (*col).into();
        }
        serde_json::json!({ "schema": 1, "error": err })
    }
}

pub(crate) fn io_err(path: &Path, e: std::io::Error) -> CliError {
    CliError::Io {
        path: path.to_path_buf(),
        reason: e.to_string(),
    }
}

fn write_file(path: &Path, body: &str) -> Result<(), CliError> {
    fs::write(path, body).map_err(|e| io_err(path, e))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum InputFormat {
    MatrixMarket,
    Csv,
}

impl InputFormat {
    /// `.csv` files are CSV; everything else is Matrix Market.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => Self::Csv,
            _ => Self::MatrixMarket,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub input: PathBuf,
    pub p: usize,
    pub out_dir: PathBuf,
    pub format: InputFormat,
    /// Forced `(m, s)`; selection is skipped.
    pub forced: Option<(usize, u32)>,
    pub exact_alpha: bool,
    pub seed: u64,
    /// When set, also compares against the oracle at this many digits.
    pub digits: Option<u32>,
    pub emit_diagnostics: bool,
}

impl RunConfig {
    pub fn new(input: impl Into<PathBuf>, p: usize, out_dir: impl Into<PathBuf>) -> Self {
        let input = input.into();
        Self {
            format: InputFormat::from_path(&input),
            input,
            p,
            out_dir: out_dir.into(),
            forced: None,
            exact_alpha: false,
            seed: DEFAULT_SEED,
            digits: None,
            emit_diagnostics: true,
        }
    }

    fn validate(&self) -> Result<(), CliError> {
        if self.p == 0 {
            return Err(CliError::Usage("p must be at least 1".into()));
        }
        if let Some((m, _)) = self.forced {
            if !DEGREES.contains(&m) {
                return Err(CliError::Usage(format!("forced m must be one of {DEGREES:?}, got {m}")));
            }
        }
        Ok(())
    }
}

/// Flat run record written as `diagnostics.json`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Diagnostics {
    pub schema: u32,
    pub n: usize,
    pub p: usize,
    pub kind: ScalarKind,
    pub forced: bool,
    pub m: Option<usize>,
    pub i: Option<usize>,
    pub s: Option<u32>,
    pub r: Option<usize>,
    pub tau: Option<usize>,
    pub p_hat: Option<usize>,
    pub delta: Option<f64>,
    pub t: Option<u32>,
    pub t_per_degree: Vec<u32>,
    pub alphas: Vec<f64>,
    pub matmul_count: String,
    pub predicted_cost: String,
    pub cost_consistent: bool,
    pub structure: StructureTag,
    pub seed: u64,
    pub exact_alpha: bool,
    pub wall_time_s: f64,
    /// Per-`j` relative 1-norm error against the oracle, when requested.
    pub oracle_rel_err: Option<Vec<f64>>,
}

impl Diagnostics {
    fn new<S: Scalar>(res: &PhiResult<S>, cfg: &RunConfig, n: usize, wall: f64) -> Self {
        let sel = res.selection.as_ref();
        let predicted = sel.map_or(Rational64::from_integer(0), |s| s.predicted_cost);
        Self {
            schema: 1,
            n,
            p: cfg.p,
            kind: S::KIND,
            forced: cfg.forced.is_some(),
            m: sel.map(|s| s.m),
            i: sel.map(|s| s.i),
            s: sel.map(|s| s.s),
            r: sel.map(|s| s.r),
            tau: sel.map(|s| s.tau),
            p_hat: sel.map(|s| s.p_hat),
            delta: sel.map(|s| s.delta),
            t: sel.map(|s| s.t),
            t_per_degree: res.t_per_degree.clone(),
            alphas: res.alphas.as_ref().map(|a| a.values.clone()).unwrap_or_default(),
            matmul_count: res.matmul_count.to_string(),
            predicted_cost: predicted.to_string(),
            cost_consistent: res.matmul_count == predicted,
            structure: res.structure,
            seed: cfg.seed,
            exact_alpha: cfg.exact_alpha,
            wall_time_s: wall,
            oracle_rel_err: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunOutcome {
    pub files: Vec<PathBuf>,
    pub diagnostics: Diagnostics,
}

pub fn read_input(path: &Path, format: InputFormat) -> Result<InputMatrix, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    match format {
        InputFormat::MatrixMarket => mmio::read_matrix_market(&text),
        InputFormat::Csv => mmio::read_csv(&text),
    }
}

fn run_typed<S: Scalar>(a: &DenseMatrix<S>, cfg: &RunConfig) -> Result<RunOutcome, CliError> {
    let mut ctx = EvalContext::new(cfg.seed).with_exact_alpha(cfg.exact_alpha);
    let start = Instant::now();
    let res = match cfg.forced {
        Some((m, s)) => phi_funm_forced(a, cfg.p, m, s, &mut ctx)?,
        None => phi_funm(a, cfg.p, &mut ctx)?,
    };
    let wall = start.elapsed().as_secs_f64();
    let mut diag = Diagnostics::new(&res, cfg, a.n(), wall);
    if let Some(digits) = cfg.digits {
        let reference = oracle::phi_reference_rounded(a, cfg.p, digits)?;
        diag.oracle_rel_err = Some(res.phis.iter().zip(&reference).map(|(x, r)| rel_err_one_norm(x, r)).collect());
    }

    fs::create_dir_all(&cfg.out_dir).map_err(|e| io_err(&cfg.out_dir, e))?;
    let mut files = Vec::new();
    for (j, f) in res.phis.iter().enumerate() {
        let path = cfg.out_dir.join(format!("phi{j}.mtx"));
        write_file(&path, &mmio::write_matrix_market(f))?;
        files.push(path);
    }
    if cfg.emit_diagnostics {
        let path = cfg.out_dir.join("diagnostics.json");
        let json = serde_json::to_string_pretty(&diag).expect("diagnostics serialize");
        write_file(&path, &(json + "\n"))?;
        files.push(path);
    }
    Ok(RunOutcome { files, diagnostics: diag })
}

/// Reads the input, evaluates `φ₀…φ_p` and writes `phi{j}.mtx` (+ diagnostics).
pub fn run(cfg: &RunConfig) -> Result<RunOutcome, CliError> {
    cfg.validate()?;
    match read_input(&cfg.input, cfg.format)? {
        InputMatrix::Real(a) => run_typed(&a, cfg),
        InputMatrix::Complex(a) => run_typed(&a, cfg),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct VerifyReport {
    pub p: usize,
    pub digits: u32,
    pub tolerance: f64,
    /// `phi_funm` vs `phi_reference`, per `j`.
    pub rel_err: Vec<f64>,
    /// `phi_reference` vs the lifted direct series, per `j` (real inputs only).
    pub dual_oracle_diff: Option<Vec<f64>>,
    pub passed: bool,
}

/// Cross-checks `phi_funm` against the oracle (and the two oracles against
/// each other); fails when any error exceeds `tol`.
pub fn verify(input: &Path, format: InputFormat, p: usize, digits: u32, tol: f64, seed: u64) -> Result<VerifyReport, CliError> {
    if p == 0 {
        return Err(CliError::Usage("p must be at least 1".into()));
    }
    let (rel_err, dual) = match read_input(input, format)? {
        InputMatrix::Real(a) => {
            let res = phi_funm(&a, p, &mut EvalContext::new(seed))?;
            let reference = oracle::phi_reference(&a, p, digits)?;
            let lifted = oracle::phi_series_lifted(&a, p, digits)?;
            let errs: Vec<f64> = res
                .phis
                .iter()
                .zip(&reference)
                .map(|(x, r)| ExtendedMatrix::from_dense(x, r.bits()).rel_diff(r))
                .collect();
            let dual = lifted.iter().zip(&reference).map(|(l, r)| l.rel_diff(r)).collect();
            (errs, Some(dual))
        }
        InputMatrix::Complex(a) => {
            let res = phi_funm(&a, p, &mut EvalContext::new(seed))?;
            let reference = oracle::phi_reference_rounded(&a, p, digits)?;
            (res.phis.iter().zip(&reference).map(|(x, r)| rel_err_one_norm(x, r)).collect(), None)
        }
    };
    let dual_tol = 10f64.powi(4 - digits as i32);
    let passed = rel_err.iter().all(|&e: &f64| e <= tol)
        && dual.as_ref().is_none_or(|d: &Vec<f64>| d.iter().all(|&e| e <= dual_tol));
    Ok(VerifyReport {
        p,
        digits,
        tolerance: tol,
        rel_err,
        dual_oracle_diff: dual,
        passed,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ThetaRow {
    pub m: usize,
    pub p: usize,
    pub regenerated: f64,
    pub embedded: f64,
    /// Agreement to three significant digits.
    pub matches: bool,
}

fn three_digits(x: f64) -> String {
    format!("{x:.2e}")
}

/// Regenerates every θ_{m,p}, `p = 1..=10`, with `2m + p + extra_terms`
/// series terms.
pub fn theta_table(extra_terms: usize) -> Result<Vec<ThetaRow>, CliError> {
    let mut rows = Vec::new();
    for (i, &m) in DEGREES.iter().enumerate() {
        for p in 1..=P_TABLE {
            let regenerated = pade::regenerate_theta(m, p, 2 * m + p + extra_terms)?;
            let embedded = pade::ThetaTable::EMBEDDED.raw(i, p);
            rows.push(ThetaRow {
                m,
                p,
                regenerated,
                embedded,
                matches: three_digits(regenerated) == three_digits(embedded),
            });
        }
    }
    Ok(rows)
}

// ---------------------------------------------------------------------------
// Argument parsing
// ---------------------------------------------------------------------------

#[derive(Debug, Parser)]
#[command(name = "phi", version, about = "Matrix φ-functions by scaling and recovering")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Evaluate φ₀…φ_p of a matrix and write phi0.mtx … phip.mtx.
    Run {
        input: PathBuf,
        #[arg(short, long)]
        p: usize,
        #[arg(short, long, default_value = "phi_out")]
        out: PathBuf,
        /// Input format; inferred from the extension when omitted.
        #[arg(long, value_enum)]
        format: Option<InputFormat>,
        #[arg(long, requires = "force_s")]
        force_m: Option<usize>,
        #[arg(long, requires = "force_m")]
        force_s: Option<u32>,
        /// Form matrix powers explicitly instead of estimating their norms.
        #[arg(long)]
        exact_alpha: bool,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Also compare against the extended-precision oracle at this many digits.
        #[arg(long)]
        digits: Option<u32>,
        #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
        emit_diagnostics: bool,
    },
    /// Write the synthetic test corpus and its manifest.
    Corpus {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(short, long, default_value = "corpus")]
        out: PathBuf,
    },
    /// Forward error and cost of every corpus member against the oracle.
    Bench {
        #[arg(long, default_value = "corpus")]
        corpus: PathBuf,
        #[arg(short, long, default_value_t = 10)]
        p: usize,
        #[arg(long, default_value_t = oracle::DEFAULT_DIGITS)]
        digits: u32,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long)]
        exact_alpha: bool,
        #[arg(short, long, default_value = "bench_out")]
        out: PathBuf,
    },
    /// Cross-check one matrix against the oracle.
    Verify {
        input: PathBuf,
        #[arg(short, long)]
        p: usize,
        #[arg(long, value_enum)]
        format: Option<InputFormat>,
        #[arg(long, default_value_t = oracle::DEFAULT_DIGITS)]
        digits: u32,
        #[arg(long, default_value_t = 1e-9)]
        tol: f64,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
    /// Regenerate the θ table and compare it with the embedded values.
    Theta {
        #[arg(long, default_value_t = REGEN_EXTRA_TERMS)]
        extra_terms: usize,
    },
}

fn to_json<T: Serialize>(v: &T) -> String {
    serde_json::to_string_pretty(v).expect("serializable")
}

/// Executes a parsed command, returning the text for stdout.
pub fn execute(cmd: Command) -> Result<String, CliError> {
    match cmd {
        Command::Run {
            input,
            p,
            out,
            format,
            force_m,
            force_s,
            exact_alpha,
            seed,
            digits,
            emit_diagnostics,
        } => {
            let cfg = RunConfig {
                format: format.unwrap_or_else(|| InputFormat::from_path(&input)),
                input,
                p,
                out_dir: out,
                forced: force_m.zip(force_s),
                exact_alpha,
                seed,
                digits,
                emit_diagnostics,
            };
            let outcome = run(&cfg)?;
            let files: Vec<String> = outcome.files.iter().map(|f| f.display().to_string()).collect();
            Ok(files.join("\n"))
        }
        Command::Corpus { seed, out } => {
            let manifest = corpus::gen_corpus(seed, &out)?;
            Ok(format!("wrote {} matrices to {}", manifest.members.len(), out.display()))
        }
        Command::Bench {
            corpus,
            p,
            digits,
            seed,
            exact_alpha,
            out,
        } => {
            let report = bench::bench(&bench::BenchConfig {
                corpus_dir: corpus,
                p,
                digits,
                seed,
                exact_alpha,
                out_dir: out,
            })?;
            Ok(report.summary())
        }
        Command::Verify {
            input,
            p,
            format,
            digits,
            tol,
            seed,
        } => {
            let fmt = format.unwrap_or_else(|| InputFormat::from_path(&input));
            let report = verify(&input, fmt, p, digits, tol, seed)?;
            let text = to_json(&report);
            if report.passed {
                Ok(text)
            } else {
                Err(CliError::Verification(text))
            }
        }
        Command::Theta { extra_terms } => {
            let rows = theta_table(extra_terms)?;
            let mut text = format!("{:>3} {:>3} {:>12} {:>12} {}\n", "m", "p", "regenerated", "embedded", "match");
            for r in &rows {
                text += &format!(
                    "{:>3} {:>3} {:>12} {:>12} {}\n",
                    r.m,
                    r.p,
                    three_digits(r.regenerated),
                    three_digits(r.embedded),
                    if r.matches { "yes" } else { "NO" }
                );
            }
            let bad = rows.iter().filter(|r| !r.matches).count();
            text += &format!("{}/{} entries reproduced", rows.len() - bad, rows.len());
            if bad == 0 {
                Ok(text)
            } else {
                Err(CliError::Verification(text))
            }
        }
    }
}

/// Process entry point for the `phi` binary.
pub fn main_with_args<I, T>(args: I) -> ExitCode
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = e.exit_code();
            let _ = e.print();
            return ExitCode::from(code.clamp(0, 255) as u8);
        }
    };
    match execute(cli.command) {
        Ok(text) => {
            println!("{text}");
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("{}", e.record());
            ExitCode::from(e.exit_code())
        }
    }
}
