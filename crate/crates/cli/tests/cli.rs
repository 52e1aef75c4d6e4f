use std::path::Path;
use std::process::{Command, Output};

fn boed_lab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_boed-lab"))
        .args(args)
        .output()
        .expect("spawn boed-lab")
}

fn tiny(out: &Path) -> Vec<String> {
    [
        "--testbed",
        "poly",
        "--spec",
        "mis",
        "--methods",
        "random,ri",
        "--steps",
        "2",
        "--seeds",
        "2",
        "--set",
        "grid.per_dim=21",
        "--set",
        "eig.outer=40",
        "--set",
        "eig.inner=40",
        "--set",
        "metrics.test_samples=20",
        "--set",
        "metrics.mse_reps=2",
    ]
    .iter()
    .map(|s| s.to_string())
    .chain(["--out".to_string(), out.display().to_string()])
    .collect()
}

fn run_tiny(extra: &[&str], out: &Path) -> Output {
    let mut args = vec!["run".to_string()];
    args.extend(tiny(out));
    args.extend(extra.iter().map(|s| s.to_string()));
    boed_lab(&args.iter().map(String::as_str).collect::<Vec<_>>())
}

#[test]
fn run_writes_metrics_manifest_and_plots() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_tiny(&["--oracle-diagnostics"], dir.path());
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );

    let mut reader = csv::Reader::from_path(dir.path().join("metrics.csv")).unwrap();
    let header: Vec<String> = reader.headers().unwrap().iter().map(String::from).collect();
    assert_eq!(
        header,
        ["seed", "step", "method", "mse", "mmd2", "design", "score", "B", "C", "A", "Ahat"]
    );
    let rows: Vec<csv::StringRecord> = reader.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 2 * 2 * 2);
    assert!(rows.iter().all(|r| !r[7].is_empty() && !r[10].is_empty()));
    assert!(rows
        .iter()
        .filter(|r| &r[2] == "random")
        .all(|r| r[6].is_empty()));

    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["tool"], "boed-lab");
    assert_eq!(manifest["config"]["steps"], 2);
    for metric in ["mse", "mmd2"] {
        assert!(dir.path().join(format!("plot_{metric}.csv")).exists());
    }
}

#[test]
fn manifest_replay_is_byte_identical() {
    let first = tempfile::tempdir().unwrap();
    let second = tempfile::tempdir().unwrap();
    assert_eq!(run_tiny(&[], first.path()).status.code(), Some(0));
    let manifest = first.path().join("manifest.json");
    let out = boed_lab(&[
        "run",
        "--manifest",
        manifest.to_str().unwrap(),
        "--out",
        second.path().to_str().unwrap(),
    ]);
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let a = std::fs::read(first.path().join("metrics.csv")).unwrap();
    let b = std::fs::read(second.path().join("metrics.csv")).unwrap();
    assert_eq!(a, b);
}

#[test]
fn flags_override_config_file() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("exp.cfg");
    std::fs::write(&cfg, "# base\nrun.steps = 5\nacquisition.lambda = 0.25\n").unwrap();
    let out_dir = dir.path().join("out");
    let out = run_tiny(
        &["--config", cfg.to_str().unwrap(), "--lambda", "0.5"],
        &out_dir,
    );
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["config"]["steps"], 2);
    assert_eq!(manifest["config"]["lambda"], 0.5);
}

#[test]
fn sweep_writes_one_directory_per_value() {
    let dir = tempfile::tempdir().unwrap();
    let mut args = vec![
        "sweep".to_string(),
        "--param".into(),
        "lambda".into(),
        "--values".into(),
        "0.25,1".into(),
    ];
    args.extend(tiny(dir.path()));
    let out = boed_lab(&args.iter().map(String::as_str).collect::<Vec<_>>());
    assert_eq!(
        out.status.code(),
        Some(0),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(dir.path().join("lambda=0.25/metrics.csv").exists());
    assert!(dir.path().join("lambda=1/metrics.csv").exists());
}

#[test]
fn config_errors_exit_with_one() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(
        run_tiny(&["--lambda", "-1"], dir.path()).status.code(),
        Some(1)
    );
    assert_eq!(
        boed_lab(&["run", "--testbed", "cubic"]).status.code(),
        Some(1)
    );
    assert_eq!(boed_lab(&["run", "--steps", "many"]).status.code(), Some(1));
    assert_eq!(
        boed_lab(&["run", "--set", "nonsense"]).status.code(),
        Some(1)
    );
    assert_eq!(boed_lab(&["frobnicate"]).status.code(), Some(1));
    let mut args = vec![
        "sweep".to_string(),
        "--param".into(),
        "kappa".into(),
        "--values".into(),
        "1".into(),
    ];
    args.extend(tiny(dir.path()));
    assert_eq!(
        boed_lab(&args.iter().map(String::as_str).collect::<Vec<_>>())
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn help_and_version_succeed() {
    let help = boed_lab(&["--help"]);
    assert_eq!(help.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&help.stdout).contains("validate"));
    assert_eq!(boed_lab(&["--version"]).status.code(), Some(0));
}

#[test]
fn validate_reports_each_check() {
    let out = boed_lab(&["validate", "--json"]);
    // the approximate-region inclusion is expected to fail, which maps to exit code 2
    let code = out.status.code().unwrap();
    let report: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let checks = report["checks"].as_array().unwrap();
    assert_eq!(checks.len(), 5);
    let all = checks.iter().all(|c| c["passed"].as_bool().unwrap());
    assert_eq!(code, if all { 0 } else { 2 });
}
