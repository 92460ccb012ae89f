//! End-to-end behaviour of the `phi` binary.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use phi_core::cli::mmio::{read_matrix_market, write_matrix_market, InputMatrix};
use phi_core::pade::UNIT_ROUNDOFF as U;
use phi_core::DenseMatrix;

fn phi(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_phi")).args(args).output().expect("binary runs")
}

fn read_real(path: &Path) -> DenseMatrix {
    match read_matrix_market(&fs::read_to_string(path).unwrap()).unwrap() {
        InputMatrix::Real(a) => a,
        InputMatrix::Complex(_) => panic!("expected real output"),
    }
}

fn write_input(dir: &Path, name: &str, a: &DenseMatrix) -> String {
    let path = dir.join(name);
    fs::write(&path, write_matrix_market(a)).unwrap();
    path.display().to_string()
}

#[test]
fn run_identity() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_input(dir.path(), "eye.mtx", &DenseMatrix::identity(2));
    let out = dir.path().join("out");
    let o = phi(&["run", &input, "-p", "1", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let e = std::f64::consts::E;
    let phi0 = read_real(&out.join("phi0.mtx"));
    let phi1 = read_real(&out.join("phi1.mtx"));
    for i in 0..2 {
        assert!((phi0[(i, i)] - e).abs() <= 4.0 * U * e);
        assert!((phi1[(i, i)] - (e - 1.0)).abs() <= 8.0 * U * e);
    }
    assert_eq!(phi0[(0, 1)], 0.0);

    let diag: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("diagnostics.json")).unwrap()).unwrap();
    assert_eq!(diag["schema"], 1);
    assert_eq!(diag["cost_consistent"], true);
    for key in ["m", "s", "r", "tau", "p_hat", "delta", "alphas", "t", "matmul_count", "structure", "wall_time_s"] {
        assert!(diag.get(key).is_some(), "missing {key}");
    }
}

#[test]
fn run_zero_matrix() {
    let dir = tempfile::tempdir().unwrap();
    let input = write_input(dir.path(), "zero.mtx", &DenseMatrix::zeros(3));
    let out = dir.path().join("out");
    assert!(phi(&["run", &input, "-p", "3", "--out", out.to_str().unwrap()]).status.success());
    for (j, f) in [1.0, 1.0, 0.5, 1.0 / 6.0].into_iter().enumerate() {
        assert_eq!(read_real(&out.join(format!("phi{j}.mtx"))), DenseMatrix::scalar_identity(3, f));
    }
}

#[test]
fn input_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let ns = dir.path().join("ns.mtx");
    fs::write(&ns, "%%MatrixMarket matrix array real general\n2 3\n1\n2\n3\n4\n5\n6\n").unwrap();
    let o = phi(&["run", ns.to_str().unwrap(), "-p", "1", "--out", dir.path().join("o").to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    let rec: serde_json::Value = serde_json::from_str(String::from_utf8_lossy(&o.stderr).trim()).unwrap();
    assert_eq!(rec["schema"], 1);
    assert_eq!(rec["error"]["kind"], "dimension");

    let bad = dir.path().join("bad.mtx");
    fs::write(&bad, "%%MatrixMarket matrix array real general\n2 2\n1\n2\nfoo\n4\n").unwrap();
    let o = phi(&["run", bad.to_str().unwrap(), "-p", "1"]);
    assert_eq!(o.status.code(), Some(2));
    let rec: serde_json::Value = serde_json::from_str(String::from_utf8_lossy(&o.stderr).trim()).unwrap();
    assert_eq!(rec["error"]["line"], 5);
    assert_eq!(rec["error"]["column"], 1);

    let o = phi(&["run", "/nonexistent/a.mtx", "-p", "1"]);
    assert_eq!(o.status.code(), Some(2));
    let good = write_input(dir.path(), "g.mtx", &DenseMatrix::identity(2));
    assert_eq!(phi(&["run", &good, "-p", "0"]).status.code(), Some(2));
    assert_eq!(phi(&["run", &good, "-p", "2", "--force-m", "5", "--force-s", "1"]).status.code(), Some(2));
    assert_eq!(phi(&["run", &good]).status.code(), Some(2));
}

#[test]
fn non_finite_input_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("a.csv");
    fs::write(&csv, "1,inf\n0,1\n").unwrap();
    assert_eq!(phi(&["run", csv.to_str().unwrap(), "-p", "1"]).status.code(), Some(2));
}

#[test]
fn csv_forced_and_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let csv = dir.path().join("a.csv");
    fs::write(&csv, "-1.5,2,0.25\n0.5,-3,1\n0,4,-0.75\n").unwrap();
    let outs: Vec<_> = (0..2).map(|k| dir.path().join(format!("o{k}"))).collect();
    for o in &outs {
        let r = phi(&["run", csv.to_str().unwrap(), "-p", "4", "--out", o.to_str().unwrap(), "--seed", "17"]);
        assert!(r.status.success());
    }
    for j in 0..=4 {
        let f = format!("phi{j}.mtx");
        assert_eq!(fs::read(outs[0].join(&f)).unwrap(), fs::read(outs[1].join(&f)).unwrap());
    }

    let forced = dir.path().join("forced");
    let r = phi(&[
        "run", csv.to_str().unwrap(), "-p", "4", "--out", forced.to_str().unwrap(),
        "--force-m", "8", "--force-s", "4", "--digits", "32",
    ]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    let diag: serde_json::Value = serde_json::from_str(&fs::read_to_string(forced.join("diagnostics.json")).unwrap()).unwrap();
    assert_eq!(diag["m"], 8);
    assert_eq!(diag["s"], 4);
    assert_eq!(diag["forced"], true);
    // i = 5 for m = 8: 5 + 4 + 4/3 + 4·5.
    assert_eq!(diag["matmul_count"], "91/3");
    for e in diag["oracle_rel_err"].as_array().unwrap() {
        assert!(e.as_f64().unwrap() < 1e-13);
    }
}

#[test]
fn complex_input() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("z.mtx");
    fs::write(&path, "%%MatrixMarket matrix coordinate complex general\n1 1 1\n1 1 0.0 3.141592653589793\n").unwrap();
    let out = dir.path().join("o");
    assert!(phi(&["run", path.to_str().unwrap(), "-p", "1", "--out", out.to_str().unwrap()]).status.success());
    match read_matrix_market(&fs::read_to_string(out.join("phi0.mtx")).unwrap()).unwrap() {
        InputMatrix::Complex(z) => {
            assert!((z[(0, 0)].re + 1.0).abs() < 1e-15);
            assert!(z[(0, 0)].im.abs() < 1e-15);
        }
        InputMatrix::Real(_) => panic!("expected complex output"),
    }
}

#[test]
fn corpus_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    for d in [&a, &b] {
        assert!(phi(&["corpus", "--seed", "0", "--out", d.to_str().unwrap()]).status.success());
    }
    let mut names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
    names.sort();
    assert!(names.len() >= 21);
    for n in names {
        assert_eq!(fs::read(a.join(&n)).unwrap(), fs::read(b.join(&n)).unwrap(), "{n:?}");
    }
}

#[test]
fn bench_and_verify() {
    let dir = tempfile::tempdir().unwrap();
    let corpus = dir.path().join("c");
    fs::create_dir_all(&corpus).unwrap();
    // A two-member corpus keeps this quick; the full corpus runs in the acceptance suite.
    let manifest = serde_json::json!({
        "schema": 1, "seed": 0,
        "members": [
            {"name": "eye", "file": "eye.mtx", "family": "identity", "n": 3, "one_norm": 1.0,
             "alpha2": 1.0, "kappa_proxy": 1.0, "well_conditioned": true, "structure": "upper-triangular"},
            {"name": "j", "file": "j.mtx", "family": "jordan", "n": 4, "one_norm": 2.0,
             "alpha2": 1.0, "kappa_proxy": 2.0, "well_conditioned": true, "structure": "upper-triangular"}
        ]
    });
    fs::write(corpus.join("manifest.json"), manifest.to_string()).unwrap();
    write_input(&corpus, "eye.mtx", &DenseMatrix::identity(3));
    let j = DenseMatrix::from_fn(4, |i, k| if i == k { -1.0 } else if k == i + 1 { 1.0 } else { 0.0 });
    let jpath = write_input(&corpus, "j.mtx", &j);
    let out = dir.path().join("b");
    let o = phi(&["bench", "--corpus", corpus.to_str().unwrap(), "-p", "3", "--digits", "32", "--out", out.to_str().unwrap()]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let csv = fs::read_to_string(out.join("bench.csv")).unwrap();
    assert_eq!(csv.lines().count(), 1 + 2 * 4);
    assert!(fs::read_to_string(out.join("summary.txt")).unwrap().contains("failures: 0"));

    let o = phi(&["verify", &jpath, "-p", "5", "--digits", "32"]);
    assert!(o.status.success());
    let rep: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(rep["passed"], true);
    let o = phi(&["verify", &jpath, "-p", "5", "--digits", "32", "--tol", "1e-30"]);
    assert_eq!(o.status.code(), Some(1));
}
