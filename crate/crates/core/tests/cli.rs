use std::path::Path;
use std::process::{Command, Output};

fn volpriv(dir: &Path, config: &str, args: &[&str]) -> Output {
    let cfg = dir.join("cfg.toml");
    std::fs::write(&cfg, config).unwrap();
    Command::new(env!("CARGO_BIN_EXE_volpriv"))
        .arg("-c")
        .arg(&cfg)
        .arg("-o")
        .arg(dir.join("out"))
        .args(args)
        .output()
        .unwrap()
}

const SMALL: &str = "horizon = 8\nruns = 2\neps_x = [0.05, 0.1, 0.5]\n";

#[test]
fn simulate_writes_one_row_per_step() {
    let dir = tempfile::tempdir().unwrap();
    let out = volpriv(dir.path(), SMALL, &["simulate"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("out/timeseries.csv")).unwrap();
    // header + runs * budgets * (K + 1)
    assert_eq!(csv.lines().count(), 1 + 2 * 3 * 9);
}

#[test]
fn audit_passes_and_prints_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = volpriv(dir.path(), SMALL, &["audit"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(!out.stdout.is_empty());
    assert!(dir.path().join("out/audit.csv").exists());
}

#[test]
fn lp_dump_prints_a_minimization() {
    let dir = tempfile::tempdir().unwrap();
    let out = volpriv(dir.path(), SMALL, &["lp-dump"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("minimize"));
}

#[test]
fn config_errors_exit_with_2_and_name_the_field() {
    let dir = tempfile::tempdir().unwrap();
    let out = volpriv(dir.path(), "horizon = 0\nruns = 0\n", &["simulate"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("horizon") && err.contains("runs"), "{err}");

    let out = volpriv(dir.path(), "horizn = 5\n", &["simulate"]);
    assert_eq!(out.status.code(), Some(2));

    let out = volpriv(dir.path(), "eps_x = [0.1, 0.2]\n", &["tradeoff"]);
    assert_eq!(out.status.code(), Some(2));
}
