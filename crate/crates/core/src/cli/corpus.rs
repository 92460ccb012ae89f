//! Deterministic synthetic test corpus.
//!
//! Families target the stressors of the algorithm: nonnormality (Jordan
//! blocks, large superdiagonals), triangular and quasi-triangular structure,
//! nilpotency, a wide range of norms, and norms sitting on θ boundaries.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::mmio::{read_matrix_market, write_matrix_market, InputMatrix};
use super::{io_err, CliError};
use crate::densemat::{detect_structure, DenseMatrix, EvalContext, StructureTag};
use crate::normest::exact_power_one_norm;
use crate::pade;
use crate::phieval::phi_funm;

pub const MANIFEST: &str = "manifest.json";
/// Members with a κ proxy at or below this are flagged well-conditioned.
pub const WELL_CONDITIONED_KAPPA: f64 = 1e3;
const KAPPA_GRID: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusEntry {
    pub name: String,
    pub file: String,
    pub family: String,
    pub n: usize,
    pub one_norm: f64,
    /// `max(‖A²‖₁^{1/2}, ‖A³‖₁^{1/3})`, from explicit powers.
    pub alpha2: f64,
    pub kappa_proxy: f64,
    pub well_conditioned: bool,
    pub structure: StructureTag,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema: u32,
    pub seed: u64,
    pub members: Vec<CorpusEntry>,
}

#[derive(Debug, Clone)]
pub struct CorpusMember {
    pub entry: CorpusEntry,
    pub matrix: DenseMatrix<f64>,
}

/// `‖A‖₁ · max_s ‖e^{sA}‖₁‖e^{(1−s)A}‖₁ / ‖e^A‖₁` over `s = k/8`: an upper
/// bound (up to quadrature) on the relative condition number of `e^A`.
pub fn kappa_proxy(a: &DenseMatrix<f64>) -> Result<f64, CliError> {
    let norm = a.one_norm();
    if norm == 0.0 {
        return Ok(0.0);
    }
    let mut ctx = EvalContext::default();
    let exps = (0..=KAPPA_GRID)
        .map(|k| {
            let s = k as f64 / KAPPA_GRID as f64;
            Ok(phi_funm(&a.scaled(s), 1, &mut ctx)?.phis[0].one_norm())
        })
        .collect::<Result<Vec<f64>, CliError>>()?;
    let worst = (0..=KAPPA_GRID)
        .map(|k| exps[k] * exps[KAPPA_GRID - k])
        .fold(0.0, f64::max);
    Ok(norm * worst / exps[KAPPA_GRID])
}

fn uniform(rng: &mut ChaCha8Rng, n: usize) -> DenseMatrix<f64> {
    DenseMatrix::from_fn(n, |_, _| rng.gen_range(-1.0..1.0))
}

fn with_norm(a: DenseMatrix<f64>, target: f64) -> DenseMatrix<f64> {
    a.scaled(target / a.one_norm())
}

fn jordan(n: usize, lambda: f64, off: f64) -> DenseMatrix<f64> {
    DenseMatrix::from_fn(n, |i, j| {
        if i == j {
            lambda
        } else if j == i + 1 {
            off
        } else {
            0.0
        }
    })
}

fn upper(rng: &mut ChaCha8Rng, n: usize, diag: (f64, f64)) -> DenseMatrix<f64> {
    DenseMatrix::from_fn(n, |i, j| match i.cmp(&j) {
        std::cmp::Ordering::Less => rng.gen_range(-1.0..1.0),
        std::cmp::Ordering::Equal => rng.gen_range(diag.0..diag.1),
        std::cmp::Ordering::Greater => 0.0,
    })
}

/// Real-Schur-like: 2x2 blocks `[[a, b], [−c, a]]` (b, c > 0) on the
/// diagonal, a trailing 1x1 block when `n` is odd, random strictly upper part.
fn quasi_triangular(rng: &mut ChaCha8Rng, n: usize, scale: f64) -> DenseMatrix<f64> {
    let mut data = vec![0.0; n * n];
    for i in 0..n {
        for j in i + 1..n {
            data[i * n + j] = scale * rng.gen_range(-1.0..1.0);
        }
    }
    let mut k = 0;
    while k < n {
        let re = rng.gen_range(-2.0..0.5);
        data[k * n + k] = re;
        if k + 1 < n {
            data[k * n + k + 1] = rng.gen_range(0.5..3.0);
            data[(k + 1) * n + k] = -rng.gen_range(0.5..3.0);
            data[(k + 1) * n + k + 1] = re;
        }
        k += 2;
    }
    DenseMatrix::from_row_major(n, n, data).expect("square")
}

/// The default corpus for `seed`, with every manifest field filled in.
pub fn build_corpus(seed: u64) -> Result<Vec<CorpusMember>, CliError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let r = &mut rng;
    let mut list: Vec<(&str, &str, DenseMatrix<f64>)> = Vec::new();

    list.push(("identity_4", "identity", DenseMatrix::identity(4)));
    list.push(("nilpotent_jordan_6", "nilpotent", jordan(6, 0.0, 1.0)));
    let strict = DenseMatrix::from_fn(10, |i, j| if j > i { r.gen_range(-1.0..1.0) } else { 0.0 });
    list.push(("nilpotent_strict_upper_10", "nilpotent", with_norm(strict, 20.0)));
    list.push(("jordan_neg_8", "jordan", jordan(8, -1.0, 1.0)));
    list.push(("jordan_pos_5", "jordan", jordan(5, 2.0, 1.0)));
    list.push(("jordan_stiff_12", "jordan", jordan(12, -5.0, 10.0)));

    let sup = DenseMatrix::from_fn(10, |i, j| {
        if i == j {
            r.gen_range(-1.0..1.0)
        } else if j == i + 1 {
            100.0
        } else {
            0.0
        }
    });
    list.push(("triangular_superdiag_10", "triangular-nonnormal", sup));
    // 2x2 diagonal blocks [[λ, 1e3], [0, −λ]]: ‖A‖₁ ≈ 1e3 while A² = diag(λ²).
    let lam: Vec<f64> = (0..4).map(|_| r.gen_range(0.1..0.5)).collect();
    let dec = DenseMatrix::from_fn(8, |i, j| {
        let l = lam[i / 2];
        match (i % 2, j as isize - i as isize) {
            (0, 0) => l,
            (1, 0) => -l,
            (0, 1) => 1e3,
            _ => 0.0,
        }
    });
    list.push(("triangular_decoupled_8", "triangular-nonnormal", dec));
    list.push(("triangular_random_12", "triangular", upper(r, 12, (-3.0, 0.0))));
    let big = upper(r, 40, (-1.0, 1.0));
    list.push(("triangular_random_40", "triangular", with_norm(big, 30.0)));

    list.push(("dense_norm_1e-2_8", "dense", with_norm(uniform(r, 8), 1e-2)));
    list.push(("dense_norm_1_16", "dense", with_norm(uniform(r, 16), 1.0)));
    list.push(("dense_norm_10_20", "dense", with_norm(uniform(r, 20), 10.0)));
    let mut stiff = with_norm(uniform(r, 40), 5.0);
    stiff.add_diag(-50.0);
    list.push(("dense_stiff_40", "dense", stiff));
    list.push(("dense_norm_200_30", "dense", with_norm(uniform(r, 30), 200.0)));
    list.push(("dense_random_2", "dense", uniform(r, 2)));

    list.push(("quasi_triangular_10", "quasi-triangular", quasi_triangular(r, 10, 1.0)));
    list.push(("quasi_triangular_21", "quasi-triangular", quasi_triangular(r, 21, 2.0)));
    list.push((
        "complex_pair_2",
        "complex-eigenvalues",
        DenseMatrix::from_rows(&[vec![0.5, 3.0], vec![-2.0, 0.5]]).expect("2x2"),
    ));
    list.push((
        "rotation_2",
        "complex-eigenvalues",
        DenseMatrix::from_rows(&[vec![-1.0, 10.0], vec![-10.0, -1.0]]).expect("2x2"),
    ));

    // Norms just inside and just outside θ_{m,p} for p = 10.
    for (label, i, f) in [("theta_m4_inside_6", 3, 1.0 - 1e-6), ("theta_m8_outside_6", 5, 1.0 + 1e-6), ("theta_m12_inside_9", 7, 1.0 - 1e-9)] {
        let n = label.rsplit('_').next().and_then(|s| s.parse().ok()).expect("size suffix");
        list.push((label, "theta-boundary", with_norm(uniform(r, n), f * pade::theta(i, 10))));
    }

    let lap_n = 20;
    let h2 = ((lap_n + 1) * (lap_n + 1)) as f64;
    let lap = DenseMatrix::from_fn(lap_n, |i, j| match i.abs_diff(j) {
        0 => -2.0 * h2,
        1 => h2,
        _ => 0.0,
    });
    list.push(("laplacian_20", "stiff-normal", lap));
    let adv = DenseMatrix::from_fn(25, |i, j| if i == j { -25.0 } else if i == j + 1 { 25.0 } else { 0.0 });
    list.push(("upwind_advection_25", "nonnormal", adv));
    let grcar = DenseMatrix::from_fn(12, |i, j| {
        if i == j + 1 {
            -1.0
        } else if j >= i && j <= i + 3 {
            1.0
        } else {
            0.0
        }
    });
    list.push(("grcar_12", "nonnormal", grcar));
    let b = uniform(r, 15);
    let spd = b.transpose().mul(&b).expect("square");
    list.push(("symmetric_negdef_15", "stiff-normal", with_norm(spd, 8.0).scaled(-1.0)));

    list.into_iter()
        .map(|(name, family, matrix)| {
            let kappa = kappa_proxy(&matrix)?;
            let alpha2 = exact_power_one_norm(&matrix, 2)
                .sqrt()
                .max(exact_power_one_norm(&matrix, 3).cbrt());
            Ok(CorpusMember {
                entry: CorpusEntry {
                    name: name.to_string(),
                    file: format!("{name}.mtx"),
                    family: family.to_string(),
                    n: matrix.n(),
                    one_norm: matrix.one_norm(),
                    alpha2,
                    kappa_proxy: kappa,
                    well_conditioned: kappa <= WELL_CONDITIONED_KAPPA,
                    structure: detect_structure(&matrix),
                },
                matrix,
            })
        })
        .collect()
}

/// Writes the corpus and its manifest under `outdir`.
pub fn gen_corpus(seed: u64, outdir: &Path) -> Result<Manifest, CliError> {
    fs::create_dir_all(outdir).map_err(|e| io_err(outdir, e))?;
    let members = build_corpus(seed)?;
    for m in &members {
        let path = outdir.join(&m.entry.file);
        fs::write(&path, write_matrix_market(&m.matrix)).map_err(|e| io_err(&path, e))?;
    }
    let manifest = Manifest {
        schema: 1,
        seed,
        members: members.into_iter().map(|m| m.entry).collect(),
    };
    let path = outdir.join(MANIFEST);
    let json = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&path, json + "\n").map_err(|e| io_err(&path, e))?;
    Ok(manifest)
}

/// Reads a corpus directory written by [`gen_corpus`].
pub fn load_corpus(dir: &Path) -> Result<Vec<CorpusMember>, CliError> {
    let path = dir.join(MANIFEST);
    let text = fs::read_to_string(&path).map_err(|e| io_err(&path, e))?;
    let manifest: Manifest = serde_json::from_str(&text).map_err(|e| CliError::Parse {
        line: e.line(),
        col: e.column(),
        msg: format!("{}: {e}", path.display()),
    })?;
    manifest
        .members
        .into_iter()
        .map(|entry| {
            let p: PathBuf = dir.join(&entry.file);
            let text = fs::read_to_string(&p).map_err(|e| io_err(&p, e))?;
            match read_matrix_market(&text)? {
                InputMatrix::Real(matrix) => Ok(CorpusMember { entry, matrix }),
                InputMatrix::Complex(_) => Err(CliError::Dimension(format!("{}: corpus matrices are real", p.display()))),
            }
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn shape_and_finiteness() {
        let c = build_corpus(0).unwrap();
        assert!(c.len() >= 20);
        for m in &c {
            assert!((2..=40).contains(&m.matrix.n()), "{}", m.entry.name);
            assert!(m.matrix.as_slice().iter().all(|v| v.is_finite()));
            assert_eq!(m.entry.n, m.matrix.n());
            assert_eq!(m.entry.well_conditioned, m.entry.kappa_proxy <= WELL_CONDITIONED_KAPPA);
        }
        let mut names: Vec<_> = c.iter().map(|m| &m.entry.name).collect();
        names.dedup();
        assert_eq!(names.len(), c.len());
    }

    #[test]
    fn deterministic_and_seed_dependent() {
        let a = build_corpus(0).unwrap();
        let b = build_corpus(0).unwrap();
        let c = build_corpus(1).unwrap();
        assert!(a.iter().zip(&b).all(|(x, y)| x.matrix == y.matrix && x.entry == y.entry));
        assert!(a.iter().zip(&c).any(|(x, y)| x.matrix != y.matrix));
    }

    #[test]
    fn contains_small_alpha_member() {
        // α₂ from explicit products, independent of the manifest value.
        let found = build_corpus(0).unwrap().into_iter().any(|m| {
            let a2 = m.matrix.mul(&m.matrix).unwrap();
            let a3 = a2.mul(&m.matrix).unwrap();
            let alpha = a2.one_norm().sqrt().max(a3.one_norm().cbrt());
            alpha < m.matrix.one_norm() / 10.0
        });
        assert!(found);
    }

    #[test]
    fn kappa_proxy_examples() {
        assert_eq!(kappa_proxy(&DenseMatrix::zeros(3)).unwrap(), 0.0);
        // Normal matrix with a real spectrum: the bound collapses to ‖A‖₁.
        let d = DenseMatrix::from_diag(&[-2.0, 1.0]);
        assert!((kappa_proxy(&d).unwrap() - 2.0).abs() < 1e-12);
    }

    #[test]
    fn files_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let manifest = gen_corpus(7, dir.path()).unwrap();
        let loaded = load_corpus(dir.path()).unwrap();
        let built = build_corpus(7).unwrap();
        assert_eq!(manifest.members.len(), loaded.len());
        for (l, b) in loaded.iter().zip(&built) {
            assert_eq!(l.matrix, b.matrix);
            assert_eq!(l.entry, b.entry);
        }
    }
}
