use std::path::Path;
use std::process::{Command, Output};

fn onefield(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_onefield"))
        .args(args)
        .arg("--output-dir")
        .arg(out)
        .arg("--log-level")
        .arg("warn")
        .output()
        .unwrap()
}

const SMALL: &[&str] = &[
    "--override",
    "domain.nx=6",
    "--override",
    "domain.ny=6",
    "--override",
    "refinement.levels=0",
    "--override",
    "solid.boundary_nodes=18",
    "--override",
    "time.dt=0.01",
    "--override",
    "time.end_time=0.02",
];

#[test]
fn lists_presets() {
    let dir = tempfile::tempdir().unwrap();
    let out = onefield(&["presets"], dir.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in ["cavity_disc", "oscillating_disc", "falling_disc", "leaflet_across", "leaflet_along"] {
        assert!(text.lines().any(|l| l == name), "{name} missing from {text}");
    }
}

#[test]
fn preset_run_writes_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["preset", "cavity_disc", "--dump-matrices"];
    args.extend_from_slice(SMALL);
    let out = onefield(&args, dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("timeseries.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    assert!(dir.path().join("matrices/saddle.mtx").exists());
}

#[test]
fn run_accepts_a_printed_config() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec!["preset", "cavity_disc", "--print"];
    args.extend_from_slice(SMALL);
    let out = onefield(&args, dir.path());
    assert!(out.status.success());
    let cfg = dir.path().join("case.toml");
    std::fs::write(&cfg, &out.stdout).unwrap();
    let out = onefield(&["run", cfg.to_str().unwrap()], &dir.path().join("run"));
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(dir.path().join("run/timeseries.csv").exists());
}

#[test]
fn failures_exit_nonzero_with_stage_tag() {
    let dir = tempfile::tempdir().unwrap();
    let out = onefield(&["preset", "no_such_case"], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("[config]"));

    let out = onefield(&["preset", "cavity_disc", "--override", "time.dt=-1"], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("[config]"));

    let out = onefield(&["run", "/nonexistent/case.toml"], dir.path());
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("aborted ["));
}
