//! End-to-end tests of the `fucik-lab` binary: determinism, cache behavior,
//! and error reporting.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn run_bin(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_fucik-lab"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn write_cfg(dir: &Path, name: &str, body: &str) -> String {
    let path = dir.join(name);
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

const CURVE_CFG: &str = "mesh.n = 24\ncurve.p_max = 0.5\ncurve.dp = 0.25\n";

#[test]
fn curve_rerun_with_cache_is_byte_identical() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "cfg.toml", CURVE_CFG);
    let out = dir.path().join("out");
    let o1 = run_bin(&["curve", "--config", &cfg, "--out", out.to_str().unwrap()], dir.path());
    assert!(o1.status.success(), "{}", String::from_utf8_lossy(&o1.stderr));
    let csv1 = fs::read(out.join("curve.csv")).unwrap();
    assert!(out.join("curve.svg").is_file());
    assert!(out.join("cache").read_dir().unwrap().next().is_some(), "cache populated");

    let o2 = run_bin(&["curve", "--config", &cfg, "--out", out.to_str().unwrap()], dir.path());
    assert!(o2.status.success());
    let csv2 = fs::read(out.join("curve.csv")).unwrap();
    assert_eq!(csv1, csv2, "re-run with warm cache must be byte-identical");

    // And identical again without the cache.
    let o3 = run_bin(
        &["curve", "--config", &cfg, "--out", out.to_str().unwrap(), "--no-cache"],
        dir.path(),
    );
    assert!(o3.status.success());
    let csv3 = fs::read(out.join("curve.csv")).unwrap();
    assert_eq!(csv1, csv3, "--no-cache must reproduce the same bytes");
}

#[test]
fn corrupted_cache_is_ignored_with_warning_and_recomputed() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "cfg.toml", "mesh.n = 24\n");
    let out = dir.path().join("out");
    let o1 = run_bin(&["spectrum", "--config", &cfg, "--out", out.to_str().unwrap()], dir.path());
    assert!(o1.status.success());
    let csv1 = fs::read(out.join("spectrum.csv")).unwrap();

    // Corrupt every cache file.
    for entry in out.join("cache").read_dir().unwrap() {
        let path = entry.unwrap().path();
        let mut bytes = fs::read(&path).unwrap();
        for b in bytes.iter_mut().skip(32).take(64) {
            *b ^= 0xa5;
        }
        fs::write(&path, bytes).unwrap();
    }

    let o2 = run_bin(&["spectrum", "--config", &cfg, "--out", out.to_str().unwrap()], dir.path());
    assert!(o2.status.success());
    let stderr = String::from_utf8_lossy(&o2.stderr);
    assert!(
        stderr.to_lowercase().contains("recomputing"),
        "expected a cache warning, got: {stderr}"
    );
    let csv2 = fs::read(out.join("spectrum.csv")).unwrap();
    assert_eq!(csv1, csv2, "recomputed result must match");
}

#[test]
fn invalid_config_exits_nonzero_naming_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "bad.toml", "mesh.n = 4\n");
    let out = run_bin(&["spectrum", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("mesh.n"));

    let cfg = write_cfg(dir.path(), "bad2.toml", "mesh.m = 32\n");
    let out = run_bin(&["spectrum", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("mesh.m"));
}

#[test]
fn unknown_task_exits_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(dir.path(), "cfg.toml", "mesh.n = 24\n");
    let out = run_bin(&["frobnicate", "--config", &cfg], dir.path());
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("unknown task"));
}

#[test]
fn validate_task_prints_pass_counts_and_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_cfg(
        dir.path(),
        "cfg.toml",
        "mesh.n = 24\ncurve.p_max = 0.5\ncurve.dp = 0.25\n",
    );
    let out = dir.path().join("out");
    let o = run_bin(&["validate", "--config", &cfg, "--out", out.to_str().unwrap()], dir.path());
    let stdout = String::from_utf8_lossy(&o.stdout);
    assert!(o.status.success(), "{}\n{}", stdout, String::from_utf8_lossy(&o.stderr));
    assert!(stdout.contains("checks passed"), "{stdout}");
}

#[test]
fn nonres_consumes_a_prior_curve_csv() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_cfg(dir.path(), "curve.toml", CURVE_CFG);
    let o = run_bin(&["curve", "--config", &cfg, "--out", out.to_str().unwrap()], dir.path());
    assert!(o.status.success());

    let curve_csv = out.join("curve.csv");
    let nonres_cfg = write_cfg(
        dir.path(),
        "nonres.toml",
        &format!(
            "mesh.n = 24\nf.kind = \"linear-shift\"\nf.curve_csv = \"{}\"\nf.p = 0.5\n",
            curve_csv.to_str().unwrap()
        ),
    );
    let o = run_bin(&["nonres", "--config", &nonres_cfg, "--out", out.to_str().unwrap()], dir.path());
    assert!(
        o.status.success(),
        "{}\n{}",
        String::from_utf8_lossy(&o.stdout),
        String::from_utf8_lossy(&o.stderr)
    );
    assert!(out.join("nonres_solution.csv").is_file());
    assert!(out.join("nonres_convergence.csv").is_file());
}
