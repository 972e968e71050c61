use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn mtlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_mtlab"))
        .args(args)
        .env_remove("MTLAB_SEED")
        .output()
        .unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn run_in(dir: &Path, extra: &[&str]) -> Output {
    let mut args = vec!["run", "--out", dir.to_str().unwrap()];
    args.extend_from_slice(extra);
    mtlab(&args)
}

#[test]
fn help_and_version_exit_zero() {
    assert!(mtlab(&["--help"]).status.success());
    assert!(mtlab(&["--version"]).status.success());
    assert_eq!(mtlab(&["no-such-command"]).status.code(), Some(1));
}

#[test]
fn run_selected_relations() {
    let dir = tempfile::tempdir().unwrap();
    let o = run_in(dir.path(), &["--mrs", "1,2"]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert!(out.contains("MR1 ") && out.contains("MR2 ") && !out.contains("MR3 "));
    assert!(out.contains("overall detection"));
    let csv = fs::read_to_string(dir.path().join("per_mr.csv")).unwrap();
    assert_eq!(csv.lines().count(), 3);
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("kill_matrix.json")).unwrap())
            .unwrap();
    assert_eq!(json["meta"]["seed"], 42);
}

#[test]
fn format_selects_outputs() {
    let dir = tempfile::tempdir().unwrap();
    assert!(run_in(dir.path(), &["--mrs", "9", "--format", "csv"])
        .status
        .success());
    assert!(dir.path().join("per_mr.csv").exists());
    assert!(!dir.path().join("kill_matrix.json").exists());
}

#[test]
fn seed_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_mtlab"))
        .args([
            "run",
            "--mrs",
            "13",
            "--format",
            "json",
            "--out",
            dir.path().to_str().unwrap(),
        ])
        .env("MTLAB_SEED", "7")
        .output()
        .unwrap();
    assert!(o.status.success());
    let json: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(dir.path().join("kill_matrix.json")).unwrap())
            .unwrap();
    assert_eq!(json["meta"]["seed"], 7);
}

#[test]
fn report_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let run = run_in(dir.path(), &["--mrs", "1,2,5"]);
    assert!(run.status.success());
    let matrix = dir.path().join("kill_matrix.json");
    let report = mtlab(&["report", matrix.to_str().unwrap()]);
    assert!(report.status.success());
    assert_eq!(stdout(&report), stdout(&run));
    let plot = fs::read_to_string(dir.path().join("plot_data.csv")).unwrap();
    assert!(plot.starts_with("mr_id,kill_rate\n"));
    assert_eq!(plot.lines().count(), 4);
}

#[test]
fn corrupted_matrix_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("kill_matrix.json");
    fs::write(&bad, "{\"meta\": 3}").unwrap();
    let o = mtlab(&["report", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&o.stderr).contains("SCHEMA_ERROR"));
}

#[test]
fn config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.json");
    fs::write(&cfg, "{\"organisers\": 2}").unwrap();
    assert_eq!(
        run_in(dir.path(), &["--config", cfg.to_str().unwrap()])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(run_in(dir.path(), &["--mrs", "18"]).status.code(), Some(1));
    assert_eq!(
        run_in(dir.path(), &["--mutants", "NOT_AN_OPERATOR"])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn baseline_failure_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("cfg.json");
    // the configured campaign itself cannot deploy
    fs::write(&cfg, "{\"duration\": 0}").unwrap();
    let o = run_in(
        dir.path(),
        &["--config", cfg.to_str().unwrap(), "--mrs", "1"],
    );
    assert_eq!(
        o.status.code(),
        Some(2),
        "{}",
        String::from_utf8_lossy(&o.stderr)
    );
    assert!(!dir.path().join("kill_matrix.json").exists());
}

#[test]
fn list_mutants_by_kind_and_operator() {
    let all = stdout(&mtlab(&["list-mutants"]));
    let guards = stdout(&mtlab(&["list-mutants", "--kind", "GUARD"]));
    assert!(guards.lines().count() > 1);
    assert!(guards
        .lines()
        .skip(1)
        .all(|l| l.contains("GUARD/MODIFIER_REMOVAL")));
    assert!(guards.lines().count() < all.lines().count());
    let boundary = stdout(&mtlab(&["list-mutants", "--kind", "CONDITION_BOUNDARY"]));
    assert!(boundary
        .lines()
        .skip(1)
        .all(|l| l.contains("/CONDITION_BOUNDARY")));
    assert_eq!(
        mtlab(&["list-mutants", "--kind", "NOPE"]).status.code(),
        Some(1)
    );
}

#[test]
fn sites_and_catalog() {
    let sites = stdout(&mtlab(&["list-sites"]));
    assert!(sites.starts_with("id,kind/operator,label"));
    let catalog: serde_json::Value = serde_json::from_str(&stdout(&mtlab(&["catalog"]))).unwrap();
    assert_eq!(catalog.as_array().unwrap().len(), 17);
}
