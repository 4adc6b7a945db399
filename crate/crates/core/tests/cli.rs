//! The `etfr` binary end to end.

use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn etfr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_etfr")).args(args).output().unwrap()
}

fn path(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn version_and_help() {
    let v = etfr(&["--version"]);
    assert!(v.status.success());
    assert!(String::from_utf8_lossy(&v.stdout).contains(env!("CARGO_PKG_VERSION")));
    let h = etfr(&["--help"]);
    assert!(h.status.success());
    let text = String::from_utf8_lossy(&h.stdout);
    for sub in ["synth", "decompose", "analyze"] {
        assert!(text.contains(sub), "{text}");
    }
}

#[test]
fn missing_input_is_an_input_error_and_writes_nothing() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = dir.path().join("cfg.json");
    let body = serde_json::json!({
        "input": { "csv": { "path": path(&dir.path().join("absent.csv")), "fs": 1024.0 } },
        "output_dir": path(&out),
    });
    fs::write(&cfg, body.to_string()).unwrap();
    let r = etfr(&["decompose", "--config", path(&cfg)]);
    assert_eq!(r.status.code(), Some(2), "{}", String::from_utf8_lossy(&r.stderr));
    assert!(String::from_utf8_lossy(&r.stderr).contains("absent.csv"));
    assert!(!out.exists());
}

#[test]
fn missing_config_file_is_an_input_error() {
    let r = etfr(&["decompose", "--config", "/nonexistent/cfg.json"]);
    assert_eq!(r.status.code(), Some(2));
}

#[test]
fn unknown_preset_is_an_input_error() {
    let dir = tempfile::tempdir().unwrap();
    let r = etfr(&["synth", "--preset", "fig9", "--snr", "5", "--out", path(dir.path())]);
    assert_eq!(r.status.code(), Some(2));
}

#[test]
fn synth_then_decompose() {
    let dir = tempfile::tempdir().unwrap();
    let synth = dir.path().join("synth");
    let r = etfr(&["synth", "--preset", "fig1b", "--snr", "5", "--seed", "1", "--out", path(&synth)]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    for f in ["signal.csv", "signal.wav", "synth.json", "truth_mode_0.csv", "truth_if_1.csv"] {
        assert!(synth.join(f).exists(), "{f}");
    }

    let out = dir.path().join("run");
    let cfg = dir.path().join("cfg.json");
    let body = serde_json::json!({
        "input": { "preset": { "name": "fig1b", "snr_db": 5.0 } },
        "output_dir": path(&out),
        "seed": 1,
    });
    fs::write(&cfg, body.to_string()).unwrap();
    let r = etfr(&["decompose", "--config", path(&cfg)]);
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    for f in [
        "report.json",
        "metrics.json",
        "recon_sum.csv",
        "mode_0_recon.csv",
        "mode_1_if_enhanced.csv",
        "stft.f32",
        "etfr.pgm",
    ] {
        assert!(out.join(f).exists(), "{f}");
    }
}

#[test]
fn analyze_targets() {
    let dir = tempfile::tempdir().unwrap();
    let r = etfr(&["analyze", "--target", "fig4b", "--out", path(dir.path())]);
    assert!(r.status.success());
    let n = fs::read_dir(dir.path()).unwrap().filter(|e| e.as_ref().unwrap().path().to_string_lossy().contains("fig4b_r0_")).count();
    assert_eq!(n, 7);

    assert!(etfr(&["analyze", "--target", "table_window", "--out", path(dir.path())]).status.success());
    let table = fs::read_to_string(dir.path().join("table_window.csv")).unwrap();
    assert!(table.lines().any(|l| l == "10,0.01,36"), "{table}");

    assert!(etfr(&["analyze", "--target", "fig4", "--out", path(dir.path())]).status.success());
    let curve = fs::read_to_string(dir.path().join("fig4_fdelta_10.csv")).unwrap();
    assert_eq!(curve.lines().next(), Some("L,aae_exact,aae_approx"));
    assert!(dir.path().join("fig4_avg_fdelta_200.csv").exists());

    assert_eq!(etfr(&["analyze", "--target", "fig7", "--out", path(dir.path())]).status.code(), Some(2));
}
