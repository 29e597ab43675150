use std::path::Path;
use std::process::{Command, Output};

fn chemonsk(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_chemonsk"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

const SMALL: &str = r#"
schema_version = 1
t_final = 0.1
record_every = 0.05

[grid]
dim = 1
n = 16

[initial]
band = 2
amplitude = 0.3
"#;

fn write_small(dir: &Path) -> String {
    let path = dir.join("small.toml");
    std::fs::write(&path, SMALL).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn missing_config_is_usage_error() {
    let out = chemonsk(&["simulate", "--config", "/nonexistent/run.toml"]);
    assert_eq!(code(&out), 2);
}

#[test]
fn invalid_config_is_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("bad.toml");
    std::fs::write(&path, "[grid]\nn = 7\n").unwrap();
    let out = chemonsk(&["simulate", "--config", path.to_str().unwrap()]);
    assert_eq!(code(&out), 2);
    assert!(String::from_utf8_lossy(&out.stderr).contains("grid.n"));
}

#[test]
fn unknown_presets_and_flags_are_usage_errors() {
    assert_eq!(code(&chemonsk(&["verify-inequalities", "--preset", "nope"])), 2);
    assert_eq!(code(&chemonsk(&["sweep", "--preset", "nope", "--out", "/tmp/x"])), 2);
    assert_eq!(code(&chemonsk(&["simulate", "--bogus"])), 2);
}

#[test]
fn simulate_then_report_is_pure() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_small(dir.path());
    let run_dir = dir.path().join("run");
    let out = chemonsk(&["simulate", "--config", &cfg, "--out", run_dir.to_str().unwrap(), "--seed", "5"]);
    assert_eq!(code(&out), 0, "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["manifest.json", "energy.csv", "diagnostics.json", "config.toml", "fields/snap_00000.bin"] {
        assert!(run_dir.join(f).exists(), "{f}");
    }
    let manifest = std::fs::read_to_string(run_dir.join("manifest.json")).unwrap();
    assert!(manifest.contains("\"seeds\": [\n    5\n  ]"));
    let out = chemonsk(&["report", "--run", run_dir.to_str().unwrap()]);
    assert_eq!(code(&out), 0);
    assert!(String::from_utf8_lossy(&out.stdout).contains("identical"));
}

#[test]
fn report_on_missing_run_is_usage_error() {
    assert_eq!(code(&chemonsk(&["report", "--run", "/nonexistent/run"])), 2);
}

#[test]
fn quantum_preset_emits_passing_verdicts() {
    let dir = tempfile::tempdir().unwrap();
    let out = chemonsk(&[
        "verify-inequalities",
        "--preset",
        "quantum",
        "--count",
        "12",
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code(&out), 0);
    let lines = std::fs::read_to_string(dir.path().join("verdicts.jsonl")).unwrap();
    assert_eq!(lines.lines().count(), 12);
    assert!(lines.lines().all(|l| l.contains("\"pass\":true")));
}

#[test]
fn weak_residual_needs_two_levels() {
    assert_eq!(code(&chemonsk(&["weak-residual", "--levels", "1"])), 2);
}
