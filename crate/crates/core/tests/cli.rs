//! The binary's exit codes, config handling and output layout.

use std::process::Command;

fn ffpe(root: &std::path::Path, args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_ffpe"))
        .args(args)
        .env("FFPE_OUTPUT_ROOT", root)
        .output()
        .expect("binary runs")
}

const SMALL: [&str; 8] = ["--set", "grid.nx=32", "--set", "grid.nv=32", "--set", "grid.lx=8", "--set", "grid.lv=8"];

#[test]
fn solve_writes_arrays_csv_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["solve"];
    args.extend(SMALL);
    let out = ffpe(dir.path(), &args);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let solve = dir.path().join("solve");
    for f in ["manifest.json", "samples.csv", "diagnostics.json", "initial.bin", "f_000.bin", "plots/plot.py"] {
        assert!(solve.join(f).exists(), "missing {f}");
    }
    let manifest: serde_json::Value = serde_json::from_str(&std::fs::read_to_string(solve.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["command"], "solve");

    let mut args = vec!["norms", "--input"];
    let input = solve.join("initial.bin");
    args.push(input.to_str().unwrap());
    let out = ffpe(dir.path(), &args);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("norms/norms.csv").exists());
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(ffpe(dir.path(), &["solve", "--set", "grid.width=3"]).status.code(), Some(2));
    assert_eq!(ffpe(dir.path(), &["solve", "--set", "params.alpha=2.5"]).status.code(), Some(2));
    assert_eq!(ffpe(dir.path(), &["verify", "-e", "no-such-experiment"]).status.code(), Some(2));
    assert_eq!(ffpe(dir.path(), &["frobnicate"]).status.code(), Some(2));
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[solver]\nmethod = \"picard\"\nunknown = 1\n").unwrap();
    assert_eq!(ffpe(dir.path(), &["--config", cfg.to_str().unwrap(), "solve"]).status.code(), Some(2));
}

#[test]
fn verify_reports_are_written() {
    let dir = tempfile::tempdir().unwrap();
    let out = ffpe(dir.path(), &["verify", "-e", "interpolation", "-e", "gaussian-oracle", "--threads", "2"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let summary = std::fs::read_to_string(dir.path().join("verify/summary.csv")).unwrap();
    assert!(summary.starts_with("experiment,criterion,measured,target,tolerance,passed"));
    assert!(summary.contains("interpolation-ratio"));
    assert!(dir.path().join("verify/gaussian-oracle/report.json").exists());
}

#[test]
fn failed_criteria_exit_with_one() {
    // an unconverged Picard run is reported, not treated as an error
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["solve", "--set", "solver.max_iter=1", "--set", "solver.tol=1e-14"];
    args.extend(SMALL);
    assert_eq!(ffpe(dir.path(), &args).status.code(), Some(1));
}
