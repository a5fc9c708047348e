use std::path::Path;
use std::process::{Command, Output};

fn chb(args: &[&str], config: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chb"))
        .args(args)
        .arg("--config")
        .arg(config)
        .env("RUST_LOG", "warn")
        .output()
        .expect("chb runs")
}

fn write_config(dir: &Path, text: &str) -> std::path::PathBuf {
    let path = dir.join("run.toml");
    std::fs::write(&path, text).unwrap();
    path
}

const SMALL_RUN: &str = "[physics]\nepsilon = 0.2\n\n[numerics]\ndt = 1e-3\nt_end = 0.003\n\n[mesh]\nn = 16\n";

#[test]
fn run_writes_diagnostics_and_fields() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), SMALL_RUN);
    let out = dir.path().join("out");
    let res = chb(&["run", "--out", out.to_str().unwrap()], &config);
    assert_eq!(res.status.code(), Some(0), "{}", String::from_utf8_lossy(&res.stderr));
    let csv = std::fs::read_to_string(out.join("diagnostics.csv")).unwrap();
    // header, the initial record and one per step
    assert_eq!(csv.lines().count(), 5);
    let fields = std::fs::read_dir(&out).unwrap().filter(|e| e.as_ref().unwrap().path() != out.join("diagnostics.csv")).count();
    assert!(fields > 0);
}

#[test]
fn radial_writes_a_series() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "[numerics]\nt_end = 0.1\n");
    let out = dir.path().join("radial");
    let res = chb(&["radial", "--out", out.to_str().unwrap()], &config);
    assert_eq!(res.status.code(), Some(0));
    let csv = std::fs::read_to_string(out.join("radial.csv")).unwrap();
    assert!(csv.lines().count() > 2);
}

#[test]
fn validate_reports_warnings_but_succeeds() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(dir.path(), "[physics]\nepsilon = 0.01\n\n[mesh]\nn = 32\n");
    let res = chb(&["validate"], &config);
    assert_eq!(res.status.code(), Some(0));
    let text = String::from_utf8_lossy(&res.stdout);
    assert!(text.contains("warning: interface under-resolved"), "{text}");
    assert!(text.trim_end().ends_with("ok"));
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    for text in [
        "[physics]\nepsilon = -1.0\n",
        "[physics]\nno_such_key = 1\n",
        "[mesh]\nno_slip = [\"left\", \"right\", \"bottom\", \"top\"]\n",
        "this is not toml",
    ] {
        let config = write_config(dir.path(), text);
        let res = chb(&["validate"], &config);
        assert_eq!(res.status.code(), Some(2), "validate accepted {text:?}");
        let res = chb(&["run", "--out", dir.path().join("x").to_str().unwrap()], &config);
        assert_eq!(res.status.code(), Some(2), "run accepted {text:?}");
    }
}

#[test]
fn solver_failure_exits_with_three() {
    let dir = tempfile::tempdir().unwrap();
    let config = write_config(
        dir.path(),
        "[physics]\nepsilon = 0.2\n\n[numerics]\ndt = 1e-3\nt_end = 0.003\nvi_maxit = 1\nvi_tol = 1e-14\n\n[mesh]\nn = 16\n",
    );
    let res = chb(&["run", "--out", dir.path().join("out").to_str().unwrap()], &config);
    assert_eq!(res.status.code(), Some(3), "{}", String::from_utf8_lossy(&res.stderr));
}
