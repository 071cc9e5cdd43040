use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

const BIN: &str = env!("CARGO_BIN_EXE_graphsplit");

fn run(args: &[&str], envs: &[(&str, &str)]) -> Output {
    let mut cmd = Command::new(BIN);
    cmd.args(args);
    for (k, v) in envs {
        cmd.env(k, v);
    }
    cmd.output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn lasso_file(dir: &Path) -> String {
    let p = dir.join("lasso.json");
    let o = run(
        &["generate", "--family", "lasso", "--m", "20", "--n", "60", "--seed", "3", "--out", p.to_str().unwrap()],
        &[],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    p.to_str().unwrap().to_string()
}

#[test]
fn solve_valid_file() {
    let dir = TempDir::new().unwrap();
    let p = lasso_file(dir.path());
    let o = run(&["solve", &p], &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let v: Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v["status"], "Solved");
    for k in ["objective", "iterations", "primal_residual", "dual_residual", "solve_time", "setup_time"] {
        assert!(v.get(k).is_some(), "missing {k}");
    }
    assert_eq!(v["x"].as_array().unwrap().len(), 60);
    assert!(dir.path().join("lasso.meta.json").exists());
}

#[test]
fn solve_report_to_file_without_vectors() {
    let dir = TempDir::new().unwrap();
    let p = lasso_file(dir.path());
    let out = dir.path().join("r.json");
    let o = run(&["solve", &p, "--summary-only", "--out", out.to_str().unwrap()], &[]);
    assert_eq!(code(&o), 0);
    let v: Value = serde_json::from_str(&fs::read_to_string(out).unwrap()).unwrap();
    assert!(v.get("x").is_none());
    assert_eq!(v["status"], "Solved");
}

#[test]
fn malformed_file_cites_field() {
    let dir = TempDir::new().unwrap();
    let p = dir.path().join("bad.json");
    fs::write(
        &p,
        r#"{"m": 2, "n": 2, "A": [1, 0, 0, 1],
            "f": [{"h": "square"}, {"h": "square"}],
            "g": [{"h": "abs"}]}"#,
    )
    .unwrap();
    let o = run(&["solve", p.to_str().unwrap()], &[]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("field `g`"), "{}", stderr(&o));

    fs::write(&p, "{ not json").unwrap();
    let o = run(&["solve", p.to_str().unwrap()], &[]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("line 1"), "{}", stderr(&o));

    let o = run(&["solve", dir.path().join("missing.json").to_str().unwrap()], &[]);
    assert_eq!(code(&o), 1);
}

#[test]
fn exit_codes_follow_status() {
    let dir = TempDir::new().unwrap();
    let p = lasso_file(dir.path());
    for (cap, want, status) in [("1", 2, "MaxIterations"), ("3", 2, "MaxIterations"), ("10000", 0, "Solved")] {
        let o = run(&["solve", &p, "--summary-only", "--max-iter", cap], &[]);
        assert_eq!(code(&o), want, "cap {cap}");
        let v: Value = serde_json::from_slice(&o.stdout).unwrap();
        assert_eq!(v["status"], status);
    }
}

#[test]
fn env_vars_and_flag_precedence() {
    let dir = TempDir::new().unwrap();
    let p = lasso_file(dir.path());
    let o = run(&["solve", &p, "--summary-only"], &[("GRAPHSPLIT_MAX_ITER", "1")]);
    assert_eq!(code(&o), 2);
    let o = run(&["solve", &p, "--summary-only", "--max-iter", "10000"], &[("GRAPHSPLIT_MAX_ITER", "1")]);
    assert_eq!(code(&o), 0);
    let o = run(&["solve", &p, "--summary-only"], &[("GRAPHSPLIT_ALPHA", "2.5")]);
    assert_eq!(code(&o), 1, "{}", stderr(&o));
}

#[test]
fn usage_errors_are_input_errors() {
    assert_eq!(code(&run(&["solve"], &[])), 1);
    assert_eq!(code(&run(&["frobnicate"], &[])), 1);
    assert_eq!(code(&run(&["--help"], &[])), 0);
}

#[test]
fn binary_matrix_round_trip() {
    let dir = TempDir::new().unwrap();
    let p = dir.path().join("nnls.json");
    let o = run(
        &["generate", "--family", "nnls", "--m", "30", "--n", "10", "--out", p.to_str().unwrap(), "--binary"],
        &[],
    );
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let text = fs::read_to_string(&p).unwrap();
    assert!(text.contains(r#""A":"nnls.bin""#), "{text}");
    let bin = fs::read(dir.path().join("nnls.bin")).unwrap();
    assert_eq!(&bin[..8], b"GSPLTMAT");
    assert_eq!(bin.len(), 16 + 30 * 10 * 8);
    let o = run(&["solve", p.to_str().unwrap(), "--summary-only"], &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
}

#[test]
fn generate_rejects_bad_orientation() {
    let dir = TempDir::new().unwrap();
    let p = dir.path().join("x.json");
    let o = run(&["generate", "--family", "lasso", "--m", "50", "--n", "10", "--out", p.to_str().unwrap()], &[]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("m < n"), "{}", stderr(&o));
    let o = run(&["generate", "--family", "qp", "--m", "5", "--n", "10", "--out", p.to_str().unwrap()], &[]);
    assert_eq!(code(&o), 1);
}

fn bench(dir: &Path, name: &str, extra: &[&str]) -> (Output, String) {
    let out = dir.join(name);
    let mut args = vec!["bench", "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    let o = run(&args, &[]);
    let csv = fs::read_to_string(&out).unwrap_or_default();
    (o, csv)
}

#[test]
fn bench_schema_and_rows() {
    let dir = TempDir::new().unwrap();
    let (o, csv) = bench(dir.path(), "b.csv", &["--families", "all", "--nnz", "1e2", "--aspects", "2,10"]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "family,m,n,nnz,iterations,status,solve_time_s,setup_time_s,objective,r_pri,r_dual"
    );
    let rows: Vec<Vec<String>> = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    assert_eq!(rows.len(), 9 * 2);
    for r in &rows {
        assert_eq!(r.len(), 11);
        assert_eq!(r[5], "Solved", "{r:?}");
        let (m, n, nnz): (usize, usize, usize) = (r[1].parse().unwrap(), r[2].parse().unwrap(), r[3].parse().unwrap());
        assert_eq!(m * n, nnz);
    }
    let summary = fs::read_to_string(dir.path().join("b_summary.csv")).unwrap();
    let header = summary.lines().next().unwrap();
    assert!(header.starts_with("family,target_nnz,"), "{header}");
    assert_eq!(summary.lines().count(), 1 + 9);
}

#[test]
fn bench_is_deterministic_across_jobs() {
    let dir = TempDir::new().unwrap();
    let args = ["--families", "lasso,lp,svm", "--nnz", "1e2,1e3", "--seeds", "2"];
    let (o1, a) = bench(dir.path(), "a.csv", &args);
    let mut more = args.to_vec();
    more.extend(["--jobs", "3"]);
    let (o2, b) = bench(dir.path(), "b.csv", &more);
    assert_eq!((code(&o1), code(&o2)), (0, 0));
    let objectives = |csv: &str| -> Vec<String> {
        csv.lines().skip(1).map(|l| l.split(',').nth(8).unwrap().to_string()).collect()
    };
    assert_eq!(objectives(&a), objectives(&b));
    assert_eq!(objectives(&a).len(), 3 * 2 * 2 * 2);
}

#[test]
fn bench_input_errors() {
    let dir = TempDir::new().unwrap();
    let (o, _) = bench(dir.path(), "e.csv", &["--families", ""]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("Usage"), "{}", stderr(&o));
    let (o, _) = bench(dir.path(), "e.csv", &["--families", "lasso", "--nnz", "1e6", "--max-elements", "1000"]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("element budget"));
    assert!(!dir.path().join("e.csv").exists());
}

fn write_mtx(dir: &Path, name: &str, body: &str) -> String {
    let p = dir.join(name);
    fs::write(&p, body).unwrap();
    p.to_str().unwrap().to_string()
}

fn read_vec(p: &Path) -> Vec<f64> {
    fs::read_to_string(p).unwrap().lines().map(|l| l.parse().unwrap()).collect()
}

#[test]
fn equilibrate_identity_and_diagonal() {
    let dir = TempDir::new().unwrap();
    let id = write_mtx(dir.path(), "i.mtx", "%%MatrixMarket matrix coordinate real general\n3 3 3\n1 1 1\n2 2 1\n3 3 1\n");
    let out = dir.path().join("eq_i");
    let o = run(&["equilibrate", &id, "--out", out.to_str().unwrap()], &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let rep: Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert!(rep["report"]["row_deviation"].as_f64().unwrap() < 1e-12);
    assert!(rep["report"]["col_deviation"].as_f64().unwrap() < 1e-12);

    let dg = write_mtx(dir.path(), "d.mtx", "%%MatrixMarket matrix array real general\n2 2\n1\n0\n0\n2\n");
    let out = dir.path().join("eq_d");
    let o = run(&["equilibrate", &dg, "--gamma", "0", "--out", out.to_str().unwrap()], &[]);
    assert_eq!(code(&o), 0, "{}", stderr(&o));
    let d = read_vec(&out.join("d.txt"));
    let e = read_vec(&out.join("e.txt"));
    assert!((d[0] - 2f64.sqrt()).abs() < 1e-12 && (d[1] - 0.5f64.sqrt()).abs() < 1e-12, "{d:?}");
    assert_eq!(e, vec![1.0, 1.0]);

    let out = dir.path().join("eq_r");
    let o = run(&["equilibrate", &dg, "--gamma", "0", "--rescale", "--out", out.to_str().unwrap()], &[]);
    assert_eq!(code(&o), 0);
    let rep: Value = serde_json::from_str(&fs::read_to_string(out.join("report.json")).unwrap()).unwrap();
    assert!((rep["report"]["frobenius_ratio"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn equilibrate_zero_matrix_fails() {
    let dir = TempDir::new().unwrap();
    let z = write_mtx(dir.path(), "z.mtx", "%%MatrixMarket matrix coordinate real general\n2 3 0\n");
    let o = run(&["equilibrate", &z, "--out", dir.path().to_str().unwrap()], &[]);
    assert_eq!(code(&o), 1);
    assert!(stderr(&o).contains("degenerate"), "{}", stderr(&o));
}
