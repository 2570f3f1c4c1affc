use std::path::Path;
use std::process::{Command, Output};

fn kpzlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kpzlab")).args(args).output().unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.to_string_lossy().into_owned()
}

const SMALL_EJS: &str = "[suite]\nmodels = invgamma\nsizes = 1x1, 2x2\nlambdas = 0.1\nreplicas = 4000\n";

#[test]
fn psi_check_defaults_pass() {
    let out = kpzlab(&["psi-check"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let text = String::from_utf8_lossy(&out.stdout);
    assert!(text.contains("result: PASS") && text.contains("config hash:"));
}

#[test]
fn out_directory_receives_tables_and_summaries() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "ejs.ini", SMALL_EJS);
    let out_dir = dir.path().join("run");
    let out = kpzlab(&["ejs-discrete", "--config", &cfg, "--seed", "3", "--out", out_dir.to_str().unwrap()]);
    assert!(matches!(out.status.code(), Some(0 | 1)), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["ejs.csv", "summary.json", "summary.txt"] {
        assert!(out_dir.join(f).exists(), "{f}");
    }
    let csv = std::fs::read_to_string(out_dir.join("ejs.csv")).unwrap();
    assert!(csv.lines().next().unwrap().contains("zscore"));
    assert_eq!(csv.lines().count(), 1 + 2 * 2);
    let summary = std::fs::read_to_string(out_dir.join("summary.txt")).unwrap();
    assert!(summary.contains("seed: 3") && summary.contains("lambdas = 0.1"));
}

#[test]
fn identical_runs_are_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "ejs.ini", SMALL_EJS);
    let mut bodies = Vec::new();
    for (k, workers) in ["1", "3"].iter().enumerate() {
        let o = dir.path().join(format!("r{k}"));
        kpzlab(&["ejs-discrete", "--config", &cfg, "--workers", workers, "--out", o.to_str().unwrap()]);
        bodies.push(std::fs::read(o.join("ejs.csv")).unwrap());
    }
    assert_eq!(bodies[0], bodies[1]);
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let bad_value = write(dir.path(), "a.ini", "[suite]\nreplicas = many\n");
    assert_eq!(kpzlab(&["burke", "--config", &bad_value]).status.code(), Some(2));
    let wrong_kind = write(dir.path(), "b.ini", "[experiment]\nkind = burke\n");
    assert_eq!(kpzlab(&["psi-check", "--config", &wrong_kind]).status.code(), Some(2));
    let missing = dir.path().join("nope.ini");
    let out = kpzlab(&["psi-check", "--config", missing.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("config"));
}

#[test]
fn failed_or_empty_checks_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    let strict = write(dir.path(), "strict.ini", "[suite]\ntolerance = 1e-30\n");
    assert_eq!(kpzlab(&["psi-check", "--config", &strict]).status.code(), Some(1));
    let empty = write(
        dir.path(),
        "empty.ini",
        "[suite]\nmodels = invgamma\nsizes = 1x1\nlambdas = 5\nreplicas = 2\n",
    );
    let out = kpzlab(&["ejs-discrete", "--config", &empty]);
    assert_eq!(out.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&out.stdout).contains("checks: 0/0"));
}
