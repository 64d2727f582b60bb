//! End-to-end harness tests: config handling, artifact determinism,
//! manifest integrity, and the experiment guards.

use std::fs;
use std::path::Path;
use std::process::Command;

fn glkpz() -> Command {
    Command::new(env!("CARGO_BIN_EXE_glkpz"))
}

fn write_config(dir: &Path, body: &str) -> std::path::PathBuf {
    let path = dir.join("run.conf");
    fs::write(&path, body).unwrap();
    path
}

#[test]
fn help_config_lists_defaults() {
    let out = glkpz().arg("help-config").output().unwrap();
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("sde.N = 64"));
    assert!(text.contains("potential.kind = perturbed"));
    assert!(text.contains("output.format = csv"));
}

#[test]
fn bad_config_key_is_reported_with_line() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "sde.N = 0\n");
    let out = glkpz()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("sde.N must be >= 4"), "stderr: {err}");
    assert!(err.contains("line 1"), "stderr: {err}");
}

#[test]
fn unknown_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "sde.unknown = 3\n");
    let out = glkpz()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8(out.stderr).unwrap().contains("unknown key"));
}

#[test]
fn simulate_is_byte_deterministic_and_checksummed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "potential.kind = gaussian\nsde.N = 16\nsde.T_final = 0.002\nsde.record_every = 16\n",
    );
    let run = |out_name: &str| {
        let out_dir = dir.path().join(out_name);
        let status = glkpz()
            .args(["simulate", "--config"])
            .arg(&cfg)
            .args(["--seed", "7", "--out"])
            .arg(&out_dir)
            .status()
            .unwrap();
        assert!(status.success());
        out_dir
    };
    let a = run("a");
    let b = run("b");
    let csv_a = fs::read(a.join("trajectory_seed7.csv")).unwrap();
    let csv_b = fs::read(b.join("trajectory_seed7.csv")).unwrap();
    assert_eq!(csv_a, csv_b, "same config and seed must give identical bytes");
    // manifest checksums cover every artifact
    let manifest: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(a.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["schema"], 1);
    assert_eq!(manifest["pass"], true);
    let artifacts = manifest["artifacts"].as_array().unwrap();
    assert!(!artifacts.is_empty());
    for entry in artifacts {
        let name = entry["path"].as_str().unwrap();
        let bytes = fs::read(a.join(name)).unwrap();
        use sha2::{Digest, Sha256};
        let mut h = Sha256::new();
        h.update(&bytes);
        assert_eq!(
            entry["sha256"].as_str().unwrap(),
            format!("{:x}", h.finalize()),
            "checksum mismatch for {name}"
        );
        assert_eq!(entry["bytes"].as_u64().unwrap(), bytes.len() as u64);
    }
}

#[test]
fn ensemble_tests_gaussian_reports_degenerate_coefficients() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "potential.kind = gaussian\n");
    let out_dir = dir.path().join("out");
    let out = glkpz()
        .args(["ensemble-tests", "--config"])
        .arg(&cfg)
        .args(["--out"])
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("ensemble_report.json")).unwrap())
            .unwrap();
    assert_eq!(report["schema"], 1);
    let rows = report["payload"]["coefficients"].as_array().unwrap();
    for row in rows {
        assert!((row["alpha_bar"].as_f64().unwrap() - 1.0).abs() < 1e-8);
        assert!(row["alpha_bar_wedge"].as_f64().unwrap().abs() < 1e-8);
    }
    // coefficient table export exists with the documented columns
    let csv = fs::read_to_string(out_dir.join("coefficients.csv")).unwrap();
    assert!(csv.starts_with("t,alpha_bar,alpha_bar_wedge,lambda,renorm"));
}

#[test]
fn kpz_with_gaussian_potential_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "potential.kind = gaussian\nkpz.n_list = 8\nsde.T_final = 0.01\n",
    );
    let out = glkpz()
        .args(["kpz-convergence", "--config"])
        .arg(&cfg)
        .args(["--out"])
        .arg(dir.path().join("out"))
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8(out.stderr).unwrap();
    assert!(err.contains("degenerate"), "stderr: {err}");
}

#[test]
fn localization_small_run_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "sde.N = 64\nlocalization.inner_len = 6\nlocalization.gamma = 0.3\nseed.count = 2\n",
    );
    let out_dir = dir.path().join("out");
    let out = glkpz()
        .args(["localization", "--config"])
        .arg(&cfg)
        .args(["--out"])
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let csv = fs::read_to_string(out_dir.join("localization.csv")).unwrap();
    assert!(csv.lines().count() >= 3);
}

#[test]
fn experiment_key_must_match_subcommand() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "experiment = localization\n");
    let out = glkpz()
        .args(["simulate", "--config"])
        .arg(&cfg)
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn heat_kernel_tests_small_sizes_pass() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "potential.kind = gaussian\nhk.n_list = 16,32\n",
    );
    let out_dir = dir.path().join("out");
    let out = glkpz()
        .args(["heat-kernel-tests", "--config"])
        .arg(&cfg)
        .args(["--out"])
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let slice = fs::read_to_string(out_dir.join("kernel_slice_N16.csv")).unwrap();
    assert!(slice.starts_with("# N=16"));
    assert!(slice.contains("z,k"));
}

#[test]
fn bg_diagnostics_reduced_run_passes() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(
        dir.path(),
        "bg.draws = 24\nbg.window = 48\nbg.l_list = 4,8,16\nbg.t = 0.3\n",
    );
    let out_dir = dir.path().join("out");
    let out = glkpz()
        .args(["bg-diagnostics", "--config"])
        .arg(&cfg)
        .args(["--out"])
        .arg(&out_dir)
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "stderr: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    let report: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(out_dir.join("bg_report.json")).unwrap()).unwrap();
    assert_eq!(report["payload"]["taxonomy"]["pass"], true);
    for entry in report["payload"]["decays"].as_array().unwrap() {
        assert_eq!(entry["verdict"], true, "decay entry {entry}");
    }
}
