//! End-to-end tests of the `kpz-selfsim` binary: exit-code contract,
//! artifact formats, output-directory resolution, and sweep behavior.

use std::path::{Path, PathBuf};
use std::process::{Command, Output};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_kpz-selfsim")
}

fn run_in(dir: &Path, args: &[&str]) -> Output {
    Command::new(bin())
        .args(args)
        .arg("--out-dir")
        .arg(dir)
        .output()
        .expect("binary runs")
}

fn exit_code(out: &Output) -> i32 {
    out.status.code().expect("no signal")
}

fn read_json(path: PathBuf) -> serde_json::Value {
    let text = std::fs::read_to_string(&path).unwrap_or_else(|e| panic!("{path:?}: {e}"));
    serde_json::from_str(&text).expect("valid JSON artifact")
}

#[test]
fn profile_run_writes_csv_and_checks() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &[
            "profile", "--lambda", "1", "--q", "3", "--f0", "-1", "--xi-max", "1e6",
        ],
    );
    assert_eq!(
        exit_code(&out),
        0,
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = std::fs::read_to_string(dir.path().join("profile.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "xi,f,fp,fpp");
    assert_eq!(lines.len(), 1 + 512);
    let checks = read_json(dir.path().join("profile_checks.json"));
    assert!(checks["xi0"].as_f64().unwrap() > 0.0);
    assert_eq!(
        checks["checks"]["monotonicity"]["violations"]
            .as_array()
            .unwrap()
            .len(),
        0
    );
    // The stdout record is schema version 1 with empty failures.
    let record: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(record["schema_version"], 1);
    assert_eq!(record["invariant_failures"].as_array().unwrap().len(), 0);
    assert!(record["wall_time_seconds"].as_f64().unwrap() >= 0.0);
}

#[test]
fn usage_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    // The regime is q > 2.
    let out = run_in(dir.path(), &["profile", "--lambda", "1", "--q", "2"]);
    assert_eq!(exit_code(&out), 2);
    // Degenerate initial value.
    let out = run_in(
        dir.path(),
        &["profile", "--lambda", "1", "--q", "3", "--f0", "0"],
    );
    assert_eq!(exit_code(&out), 2);
    // Breakdown detection needs f0 > 0.
    let out = run_in(
        dir.path(),
        &["blowup", "--lambda", "1", "--q", "3", "--f0", "-1"],
    );
    assert_eq!(exit_code(&out), 2);
    // Unknown flag.
    let out = run_in(
        dir.path(),
        &["profile", "--lambda", "1", "--q", "3", "--bogus"],
    );
    assert_eq!(exit_code(&out), 2);
    // Reserved determinism flag is rejected.
    let out = run_in(
        dir.path(),
        &["profile", "--lambda", "1", "--q", "3", "--seedless"],
    );
    assert_eq!(exit_code(&out), 2);
}

#[test]
fn asymptotics_reports_constants_within_tolerance() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &["asymptotics", "--lambda", "1", "--q", "3", "--report-g"],
    );
    assert_eq!(
        exit_code(&out),
        0,
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let ratio = read_json(dir.path().join("asymptotics.json"));
    assert!((ratio["exact"].as_f64().unwrap() - 0.3849002).abs() < 1e-6);
    assert!(ratio["rel_error"].as_f64().unwrap() < 1e-2);
    let g = read_json(dir.path().join("asymptotics_g.json"));
    assert!((g["exact"].as_f64().unwrap() - 0.5773503).abs() < 1e-6);
    assert!(g["rel_error"].as_f64().unwrap() < 1e-2);

    // A second lambda moves the constant where the closed form says.
    let out = run_in(dir.path(), &["asymptotics", "--lambda", "2", "--q", "3"]);
    assert_eq!(exit_code(&out), 0);
    let ratio = read_json(dir.path().join("asymptotics.json"));
    assert!((ratio["exact"].as_f64().unwrap() - 0.2721655).abs() < 1e-6);
}

#[test]
fn tolerance_failure_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    // An absurd tolerance cannot be met; exit 1 with a recorded failure.
    let out = run_in(
        dir.path(),
        &["asymptotics", "--lambda", "1", "--q", "3", "--tol", "1e-15"],
    );
    assert_eq!(exit_code(&out), 1);
    let record: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(!record["invariant_failures"].as_array().unwrap().is_empty());
}

#[test]
fn blowup_writes_bracket_json() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &["blowup", "--lambda", "0.5", "--q", "4", "--f0", "2"],
    );
    assert_eq!(
        exit_code(&out),
        0,
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let doc = read_json(dir.path().join("blowup.json"));
    let lo = doc["bracket"]["lo"].as_f64().unwrap();
    let hi = doc["bracket"]["hi"].as_f64().unwrap();
    assert!(lo.is_finite() && lo < hi);
    assert!(doc["fp_at_collapse"].as_f64().unwrap().abs() > 1e6);
}

#[test]
fn sweep_grid_is_ordered_and_complete() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &[
            "sweep",
            "--command",
            "asymptotics",
            "--lambda",
            "2,0.5,1",
            "--q",
            "4,2.5,3",
            "--parallelism",
            "4",
        ],
    );
    assert_eq!(
        exit_code(&out),
        0,
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(dir.path().join("sweep.jsonl")).unwrap();
    let rows: Vec<serde_json::Value> = text
        .lines()
        .map(|l| serde_json::from_str(l).unwrap())
        .collect();
    assert_eq!(rows.len(), 9);
    // Lexicographic (λ, q) order regardless of the flag order given.
    let keys: Vec<(f64, f64)> = rows
        .iter()
        .map(|r| (r["lambda"].as_f64().unwrap(), r["q"].as_f64().unwrap()))
        .collect();
    let mut sorted = keys.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    assert_eq!(keys, sorted);
    assert!(rows.iter().all(|r| r["ok"].as_bool().unwrap()));
}

#[test]
fn profile_accepts_breakdown_regime_without_checks() {
    // For f0 > 0 the collapse is the expected outcome; the sign/bound
    // checks do not apply and the run exits 0.
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(dir.path(), &["profile", "--lambda", "1", "--q", "3", "--f0", "1"]);
    assert_eq!(exit_code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let checks = read_json(dir.path().join("profile_checks.json"));
    assert!(checks["termination"].as_str().unwrap().starts_with("step_collapsed"));
}

#[test]
fn sweep_runs_profile_cells() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &["sweep", "--command", "profile", "--lambda", "1,2", "--q", "3", "--xi-max", "100"],
    );
    assert_eq!(exit_code(&out), 0, "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let text = std::fs::read_to_string(dir.path().join("sweep.jsonl")).unwrap();
    let rows: Vec<serde_json::Value> =
        text.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r["ok"].as_bool().unwrap()));
    assert!(rows[0]["outputs"]["xi0"].as_f64().unwrap() > 0.0);
}

#[test]
fn sweep_accepts_q_just_above_two() {
    // The regime boundary is open: q = 2.1 runs.
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &[
            "sweep",
            "--command",
            "blowup",
            "--lambda",
            "1",
            "--q",
            "2.1",
            "--f0",
            "1",
        ],
    );
    assert_eq!(
        exit_code(&out),
        0,
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let text = std::fs::read_to_string(dir.path().join("sweep.jsonl")).unwrap();
    assert_eq!(text.lines().count(), 1);
}

#[test]
fn sweep_failure_lists_cells_and_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_in(
        dir.path(),
        &[
            "sweep",
            "--command",
            "asymptotics",
            "--lambda",
            "1",
            "--q",
            "3",
            "--tol",
            "1e-15",
        ],
    );
    assert_eq!(exit_code(&out), 1);
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("cell"), "stderr: {err}");
}

#[test]
fn sweep_guard_rail_rejects_oversized_grids() {
    let dir = tempfile::tempdir().unwrap();
    let lambdas: Vec<String> = (1..=101).map(|i| format!("{}", i as f64 * 0.1)).collect();
    let qs: Vec<String> = (1..=101)
        .map(|i| format!("{}", 2.0 + i as f64 * 0.1))
        .collect();
    let out = run_in(
        dir.path(),
        &[
            "sweep",
            "--command",
            "asymptotics",
            "--lambda",
            &lambdas.join(","),
            "--q",
            &qs.join(","),
        ],
    );
    assert_eq!(exit_code(&out), 2);
}

#[test]
fn out_dir_env_is_honored_and_flag_wins() {
    let env_dir = tempfile::tempdir().unwrap();
    let flag_dir = tempfile::tempdir().unwrap();

    // Only the environment variable: artifacts land there.
    let out = Command::new(bin())
        .args(["blowup", "--lambda", "1", "--q", "3", "--f0", "1"])
        .env("KPZ_SELFSIM_OUT", env_dir.path())
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 0);
    assert!(env_dir.path().join("blowup.json").exists());

    // Flag beats the environment.
    let out = Command::new(bin())
        .args([
            "blowup",
            "--lambda",
            "1",
            "--q",
            "3",
            "--f0",
            "1",
            "--out-dir",
        ])
        .arg(flag_dir.path())
        .env("KPZ_SELFSIM_OUT", env_dir.path())
        .output()
        .unwrap();
    assert_eq!(exit_code(&out), 0);
    assert!(flag_dir.path().join("blowup.json").exists());
}

#[test]
fn repeated_runs_are_byte_identical() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let args = [
        "pde-check",
        "--lambda",
        "1",
        "--q",
        "3",
        "--grid-points",
        "129",
        "--t-end",
        "0.1",
    ];
    assert_eq!(exit_code(&run_in(a.path(), &args)), 0);
    assert_eq!(exit_code(&run_in(b.path(), &args)), 0);
    for name in ["pde_snapshot.csv", "pde_summary.json"] {
        let pa = std::fs::read(a.path().join(name)).unwrap();
        let pb = std::fs::read(b.path().join(name)).unwrap();
        assert_eq!(pa, pb, "{name} differs between identical runs");
    }
}
