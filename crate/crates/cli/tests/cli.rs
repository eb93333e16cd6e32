use std::path::Path;
use std::process::Command;

use serde_json::Value;

fn heatctl(args: &[&str], out: &Path) -> (i32, Value) {
    let status = Command::new(env!("CARGO_BIN_EXE_heatctl"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env("HEATCTL_THREADS", "2")
        .output()
        .unwrap();
    let manifest = std::fs::read_to_string(out.join("manifest.json")).unwrap();
    (status.status.code().unwrap(), serde_json::from_str(&manifest).unwrap())
}

#[test]
fn unknown_key_is_a_usage_error_with_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let (code, m) = heatctl(&["hardy", "--set", "zeta=1"], dir.path());
    assert_eq!(code, 2);
    assert_eq!(m["status"], "error");
    assert!(m["error"].as_str().unwrap().contains("zeta"));
}

#[test]
fn bad_config_file_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.json");
    std::fs::write(&cfg, "[1, 2]").unwrap();
    let (code, _) = heatctl(&["spectrum", "--config", cfg.to_str().unwrap()], &dir.path().join("o"));
    assert_eq!(code, 2);
}

#[test]
fn bogus_experiment() {
    let dir = tempfile::tempdir().unwrap();
    let (code, m) = heatctl(&["nonsense"], dir.path());
    assert_eq!(code, 2);
    assert!(m["error"].as_str().unwrap().contains("expected one of"));
}

#[test]
fn precondition_failure_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    // h = 1/61 is too coarse for eps = 0.0125
    let (code, m) = heatctl(&["blowup", "--set", "mesh_n=60"], dir.path());
    assert_eq!(code, 2, "{m}");
}

#[test]
fn small_control_run_passes() {
    let dir = tempfile::tempdir().unwrap();
    let (code, m) = heatctl(
        &[
            "control",
            "--set",
            "mesh_n=60",
            "--set",
            "nt=60",
            "--set",
            "target_ratio=0.05",
            "--set",
            "dump_trajectory=true",
        ],
        dir.path(),
    );
    assert_eq!(code, 0, "{m}");
    let arts: Vec<&str> = m["artifacts"].as_array().unwrap().iter().map(|v| v.as_str().unwrap()).collect();
    for a in ["control.csv", "control_trajectory.dat", "trajectory.csv", "manifest.json"] {
        assert!(arts.contains(&a) && dir.path().join(a).exists(), "{a}");
    }
    let csv = std::fs::read_to_string(dir.path().join("control.csv")).unwrap();
    assert!(csv.starts_with("mu,reg,T,n,nt,penalty,final_norm,control_cost,cg_iters,CT_est\n"));
    let traj = std::fs::read_to_string(dir.path().join("trajectory.csv")).unwrap();
    assert_eq!(traj.lines().count(), 1 + 61 * 60);
}

#[test]
fn failing_invariant_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let (code, m) =
        heatctl(&["control", "--set", "mesh_n=40", "--set", "nt=20", "--set", "target_ratio=1e-30"], dir.path());
    assert_eq!(code, 1, "{m}");
    assert_eq!(m["status"], "fail");
}

#[test]
fn repeated_runs_match() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["weights", "--set", "mesh_n=80", "--set", "samples=500", "--set", "lambda_grid=[2, 5]"];
    heatctl(&args, &dir.path().join("a"));
    heatctl(&args, &dir.path().join("b"));
    for f in ["sampler_failures.csv", "weights.dat", "weights.json"] {
        let a = std::fs::read(dir.path().join("a").join(f)).unwrap();
        let b = std::fs::read(dir.path().join("b").join(f)).unwrap();
        assert_eq!(a, b, "{f}");
    }
}
