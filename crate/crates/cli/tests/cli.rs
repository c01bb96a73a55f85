use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn xover(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_xover")).args(args).output().unwrap()
}

fn configs() -> Vec<PathBuf> {
    let dir = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs");
    let mut v: Vec<PathBuf> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "toml"))
        .collect();
    v.sort();
    v
}

fn error_json(out: &Output) -> serde_json::Value {
    serde_json::from_slice(&out.stderr).unwrap_or_else(|_| panic!("stderr: {}", String::from_utf8_lossy(&out.stderr)))
}

#[test]
fn shipped_configs_round_trip() {
    for path in configs() {
        let first = xover(&["validate", path.to_str().unwrap()]);
        assert!(
            first.status.success(),
            "{}: {}",
            path.display(),
            String::from_utf8_lossy(&first.stderr)
        );
        let dir = tempfile::tempdir().unwrap();
        let normalized = dir.path().join("normalized.toml");
        std::fs::write(&normalized, &first.stdout).unwrap();
        let second = xover(&["validate", normalized.to_str().unwrap()]);
        assert!(second.status.success());
        assert_eq!(first.stdout, second.stdout, "{}", path.display());
    }
}

#[test]
fn wrong_theta_length_is_a_config_error() {
    let out = xover(&[
        "optimize",
        "--fixture",
        "ab-ba-theta1",
        "--set",
        "problem.theta=[0.5, 1.0]",
    ]);
    assert_eq!(out.status.code(), Some(2));
    let err = error_json(&out);
    assert_eq!(err["error"], "config");
    assert_eq!(err["path"], "problem.theta");
}

#[test]
fn unknown_keys_and_fixtures_are_reported() {
    let out = xover(&["optimize", "--fixture", "no-such-theta1"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["path"], "problem.fixture");
    let out = xover(&["optimize", "--fixture", "ab-ba-theta1", "--set", "optimizer.restart=2"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["path"], "optimizer.restart");
}

#[test]
fn conflicting_command_is_rejected() {
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/optimize-ab-ba-theta1.toml");
    let out = xover(&["simulate", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(error_json(&out)["path"], "command");
}

#[test]
fn singular_support_is_a_numerical_failure() {
    let out = xover(&[
        "optimize",
        "--set",
        "problem.t=2",
        "--set",
        "problem.p=2",
        "--set",
        "problem.family=\"binary\"",
        "--set",
        "problem.sequences=[\"AA\", \"AB\"]",
        "--set",
        "problem.theta=[0.1, 0.2, 0.3, 0.4]",
    ]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(error_json(&out)["error"], "numerical");
}

#[test]
fn iteration_budget_exhaustion_is_nonconvergence() {
    let out = xover(&[
        "optimize",
        "--fixture",
        "latin-square-theta1",
        "--structure",
        "Corr(6)",
        "--set",
        "optimizer.max_iters=1",
        "--set",
        "optimizer.restarts=2",
    ]);
    assert_eq!(out.status.code(), Some(4));
    assert_eq!(error_json(&out)["error"], "nonconvergence");
}

#[test]
fn optimize_writes_six_decimal_weights() {
    let dir = tempfile::tempdir().unwrap();
    let out = xover(&[
        "optimize",
        "--fixture",
        "ab-ba-theta1",
        "--structure",
        "Corr(1)",
        "--out",
        dir.path().to_str().unwrap(),
        "--no-timestamp",
    ]);
    assert!(out.status.success());
    let csv = std::fs::read_to_string(dir.path().join("weights.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "sequence,weight,objective,converged,restarts");
    let cells: Vec<&str> = lines[1].split(',').collect();
    assert_eq!(cells[0], "AB");
    let ab: f64 = cells[1].parse().unwrap();
    assert!((ab - 0.1770).abs() < 2e-3);
    assert_eq!(cells[1].split('.').nth(1).unwrap().len(), 6);
    assert_eq!(cells[3], "true");
    assert_eq!(cells[4], "8");
    let json: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("result.json")).unwrap()).unwrap();
    assert_eq!(json["converged"], true);
    assert!(json.get("generated_at").is_none());
}

#[test]
fn timestamp_only_changes_the_header_line() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let base = [
        "optimize",
        "--fixture",
        "latin-square-theta2",
        "--structure",
        "Corr(3)",
        "--quiet",
        "--out",
    ];
    let mut with = base.to_vec();
    with.push(a.path().to_str().unwrap());
    let mut without = base.to_vec();
    without.push(b.path().to_str().unwrap());
    without.push("--no-timestamp");
    assert!(xover(&with).status.success());
    assert!(xover(&without).status.success());
    let stamped = std::fs::read_to_string(a.path().join("weights.csv")).unwrap();
    let plain = std::fs::read_to_string(b.path().join("weights.csv")).unwrap();
    let (header, rest) = stamped.split_once('\n').unwrap();
    assert!(header.starts_with("# generated_at="));
    assert_eq!(rest, plain);
}

#[test]
fn dump_matrices_follows_the_computation_order() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/dump-latin-square.toml");
    let out = xover(&[
        "run",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--no-timestamp",
        "--quiet",
    ]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let seq_dir = dir.path().join("01_ABCD");
    let mut names: Vec<String> = std::fs::read_dir(&seq_dir)
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    names.sort();
    assert_eq!(
        names,
        [
            "1_X.csv",
            "2_eta.csv",
            "3_mu.csv",
            "4_D.csv",
            "5_W_inv.csv",
            "6_dmu_dtheta.csv"
        ]
    );
    let x = std::fs::read_to_string(seq_dir.join("1_X.csv")).unwrap();
    assert_eq!(x.lines().count(), 4);
    assert_eq!(x.lines().next().unwrap().split(',').count(), 10);
    // first period carries no carryover
    assert!(x.lines().next().unwrap().ends_with("0.000000,0.000000,0.000000"));
}

#[test]
fn simulate_is_reproducible_from_flags() {
    let cfg = Path::new(env!("CARGO_MANIFEST_DIR")).join("configs/simulate-latin-theta2.toml");
    let run = |dir: &Path| {
        let out = xover(&[
            "run",
            cfg.to_str().unwrap(),
            "--set",
            "simulation.replications=5",
            "--seed",
            "99",
            "--out",
            dir.to_str().unwrap(),
            "--no-timestamp",
            "--quiet",
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        std::fs::read(dir.join("replications.csv")).unwrap()
    };
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let first = run(a.path());
    assert_eq!(first, run(b.path()));
    assert_eq!(String::from_utf8(first).unwrap().lines().count(), 6);
}

#[test]
fn list_fixtures_names_every_problem() {
    let out = xover(&["list-fixtures"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    for name in [
        "ab-ba-theta1",
        "latin-square-theta2",
        "all-orders-4-theta1",
        "poisson-ab-ba-theta2",
    ] {
        assert!(text.contains(name), "{name}");
    }
}
