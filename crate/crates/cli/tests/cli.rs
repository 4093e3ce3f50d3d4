use std::path::Path;
use std::process::{Command, Output};

fn walkdual(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_walkdual")).args(args).output().expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).unwrap()
}

fn csv_rows(text: &str) -> Vec<Vec<String>> {
    text.lines().skip(1).map(|l| l.split(',').map(str::to_string).collect()).collect()
}

#[test]
fn esscher_table_has_one_row_per_n() {
    let o = walkdual(&["esscher", "--rv", "asymmetric-binomial", "--n", "1,4,16,64"]);
    assert!(o.status.success());
    let text = stdout(&o);
    assert!(text.starts_with("n,a_n,b_n,asymptotic_a,scaled_residual\n"));
    let rows = csv_rows(&text);
    assert_eq!(rows.len(), 4);
    for (row, n) in rows.iter().zip(["1", "4", "16", "64"]) {
        assert_eq!(row[0], n);
        let a: f64 = row[1].parse().unwrap();
        assert!(a > 0.5 && a < 0.57);
    }
}

#[test]
fn counterexample_certificate_meets_its_targets() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("cert.json");
    let o = walkdual(&[
        "counterex",
        "--rv",
        "asymmetric-binomial",
        "--kmax",
        "5",
        "--lambda-grid",
        "0.1:1.0:0.1",
        "--format",
        "json",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let v: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(&out).unwrap()).unwrap();
    let records = v["records"].as_array().unwrap();
    assert_eq!(records.len(), 5);
    for r in records {
        let k = r["k"].as_f64().unwrap();
        assert!(r["log2_m"].as_f64().unwrap() >= 2.0 * k);
    }
    assert_eq!(v["growth"].as_array().unwrap().len(), 5);
}

#[test]
fn divergence_scan_brackets_the_threshold() {
    let o = walkdual(&["prop1b", "--scan-y", "0.70:0.86:0.02"]);
    assert!(o.status.success());
    let threshold = (-0.25f64).exp();
    let mut seen = std::collections::BTreeMap::new();
    for row in csv_rows(&stdout(&o)) {
        seen.insert(row[0].clone(), row[4].clone());
    }
    assert_eq!(seen.len(), 9);
    for (y, class) in &seen {
        let y: f64 = y.parse().unwrap();
        if y < threshold - 0.01 {
            assert_eq!(class, "diverges", "y = {y}");
        } else if y > threshold + 0.01 {
            assert_eq!(class, "converges", "y = {y}");
        }
    }
}

#[test]
fn shifted_scan_moves_the_threshold() {
    let o = walkdual(&["prop1b", "--scan-y", "0.96,1.04", "--y0", "1", "--format", "json"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v[0]["classification"], "diverges");
    assert_eq!(v[1]["classification"], "converges");
}

#[test]
fn relaxation_matrix_is_ok() {
    let o = walkdual(&[
        "relax-compare",
        "--rv",
        "trinomial",
        "--utility",
        r#"{"family":"crra","gamma":0.3333333333333333}"#,
        "--n",
        "2,4,8",
        "--x",
        "0.5,1,2",
    ]);
    assert!(o.status.success());
    let rows = csv_rows(&stdout(&o));
    assert_eq!(rows.len(), 9);
    assert!(rows.iter().all(|r| r[6] == "true"));
}

#[test]
fn dual_curve_and_tails() {
    let power = r#"{"family":"power_conjugate","alpha":1,"beta":1}"#;
    let o = walkdual(&["dual-curve", "--rv", "symmetric-binomial", "--utility", power, "--n", "16", "--y", "1"]);
    assert!(o.status.success());
    let rows = csv_rows(&stdout(&o));
    let v_bsm: f64 = rows[0][4].parse().unwrap();
    assert!((v_bsm - 0.25f64.exp()).abs() < 1e-10);
    let o = walkdual(&[
        "dual-curve",
        "--rv",
        "symmetric-binomial",
        "--utility",
        power,
        "--n",
        "16",
        "--y",
        "1",
        "--tail-m",
        "1e6",
    ]);
    assert!(o.status.success());
    let rows = csv_rows(&stdout(&o));
    assert_eq!(rows[0][3], "0");
}

#[test]
fn lemma1_and_dp_run() {
    let o = walkdual(&["lemma1", "--rv", "symmetric-binomial", "--n", "100,1000", "--gamma", "1"]);
    assert!(o.status.success());
    for row in csv_rows(&stdout(&o)) {
        let n: f64 = row[0].parse().unwrap();
        let gap: f64 = row[4].parse().unwrap();
        assert!(gap.abs() <= 1.0 / (8.0 * n));
    }
    let crra = r#"{"family":"crra","gamma":0.5}"#;
    let o = walkdual(&["dp", "--rv", "trinomial", "--utility", crra, "--n", "4", "--x", "1,4"]);
    assert!(o.status.success());
    let rows = csv_rows(&stdout(&o));
    let (u1, u4): (f64, f64) = (rows[0][2].parse().unwrap(), rows[1][2].parse().unwrap());
    assert!((u4 / u1 - 2.0).abs() < 1e-12);
}

#[test]
fn exit_codes() {
    // Usage error.
    assert_eq!(walkdual(&["esscher", "--bogus"]).status.code(), Some(2));
    assert_eq!(walkdual(&["no-such-command"]).status.code(), Some(2));
    // Validation: mean is not zero.
    let bad = r#"{"atoms":[{"value":-1,"prob":0.3},{"value":1,"prob":0.7}]}"#;
    assert_eq!(walkdual(&["rv-check", "--rv", bad]).status.code(), Some(2));
    assert_eq!(walkdual(&["esscher", "--rv", "trinomial", "--n", "4,1"]).status.code(), Some(2));
    // Numeric: four incommensurate atoms grow the support cubically past the cap.
    let wide = r#"{"atoms":[{"value":-1.3425533280635922,"prob":0.25},{"value":-0.3122430350795335,"prob":0.25},{"value":0.22288211618792272,"prob":0.25},{"value":1.431914246955203,"prob":0.25}]}"#;
    let o = walkdual(&["rv-check", "--rv", wide, "--n", "400", "--merge-tol", "0"]);
    assert_eq!(o.status.code(), Some(3), "{}", String::from_utf8_lossy(&o.stderr));
    // Numeric: divergent dual value.
    let v0 = r#"{"family":"prop1b_v0","z0":0.1}"#;
    assert_eq!(
        walkdual(&["dual-curve", "--rv", "trinomial", "--utility", v0, "--n", "4", "--y", "0.5"]).status.code(),
        Some(3)
    );
    // Search: no Laplace margin.
    assert_eq!(walkdual(&["counterex", "--rv", "symmetric-binomial"]).status.code(), Some(4));
}

fn files_in(dir: &Path) -> Vec<String> {
    let mut v: Vec<String> =
        std::fs::read_dir(dir).unwrap().map(|e| e.unwrap().file_name().to_string_lossy().into_owned()).collect();
    v.sort();
    v
}

#[test]
fn output_is_deterministic_and_written_atomically() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a.csv"), dir.path().join("b.csv"));
    for p in [&a, &b] {
        let o =
            walkdual(&["esscher", "--rv", "trinomial", "--n", "1:64:7", "--out", p.to_str().unwrap(), "--seedless"]);
        assert!(o.status.success());
    }
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    assert_eq!(files_in(dir.path()), vec!["a.csv", "b.csv"]);
}

#[test]
fn config_file_with_flag_overrides() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    std::fs::write(&cfg, r#"{"rv": "asymmetric-binomial", "n": "1,4", "format": "json"}"#).unwrap();
    let o = walkdual(&["esscher", "--config", cfg.to_str().unwrap(), "--n", "16"]);
    assert!(o.status.success());
    let v: serde_json::Value = serde_json::from_slice(&o.stdout).unwrap();
    assert_eq!(v.as_array().unwrap().len(), 1);
    assert_eq!(v[0]["n"], 16);
    std::fs::write(&cfg, r#"{"rv": "trinomial", "unknown-key": 1}"#).unwrap();
    assert_eq!(walkdual(&["esscher", "--config", cfg.to_str().unwrap(), "--n", "1"]).status.code(), Some(2));
}
