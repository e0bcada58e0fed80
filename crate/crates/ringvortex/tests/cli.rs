use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_ringvortex");

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn ok(out: &Output) {
    assert!(
        out.status.success(),
        "exit {:?}\nstdout: {}\nstderr: {}",
        out.status.code(),
        String::from_utf8_lossy(&out.stdout),
        String::from_utf8_lossy(&out.stderr)
    );
}

fn leapfrog() -> String {
    configs().join("leapfrog.json").display().to_string()
}

#[test]
fn coeffs_record_is_labeled() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["coeffs", "--config", &leapfrog(), "--out", dir.path().to_str().unwrap(), "--eps", "0.01"]);
    ok(&out);
    let v: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("coeffs.json")).unwrap()).unwrap();
    let c = &v["coefficients"];
    for key in ["E", "M", "A", "G", "C"] {
        assert!(!c[key].is_null(), "missing {key}");
    }
    assert_eq!(c["A"].as_array().unwrap().len(), 4);
    assert_eq!(c["A"][0].as_array().unwrap().len(), 4);
    assert_eq!(v["epsilon"], 0.01);
    assert!(v["build"].as_str().is_some_and(|s| !s.is_empty()));
}

#[test]
fn pointvortex_hamiltonian_column_conserved() {
    let dir = tempfile::tempdir().unwrap();
    ok(&run(&["pointvortex", "--config", &leapfrog(), "--out", dir.path().to_str().unwrap()]));
    let mut rd = csv::Reader::from_path(dir.path().join("pointvortex.csv")).unwrap();
    let col = rd.headers().unwrap().iter().position(|h| h == "energy").unwrap();
    let h: Vec<f64> = rd.records().map(|r| r.unwrap()[col].parse().unwrap()).collect();
    assert!(h.len() > 100);
    let drift = h.iter().map(|x| (x - h[0]).abs()).fold(0.0, f64::max);
    assert!(drift <= 1e-8, "H drift {drift:e}");
}

#[test]
fn outputs_are_byte_reproducible() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let cfg = configs().join("single_ring.json").display().to_string();
    for d in [&a, &b] {
        let p = d.path().to_str().unwrap();
        ok(&run(&["simulate", "--config", &cfg, "--out", p]));
        ok(&run(&["pointvortex", "--config", &leapfrog(), "--out", p]));
        ok(&run(&["coeffs", "--config", &leapfrog(), "--out", p]));
    }
    for name in
        ["trajectory.csv", "rescaled.csv", "trajectory.json", "pointvortex.csv", "pointvortex.json", "coeffs.json"]
    {
        assert_eq!(fs::read(a.path().join(name)).unwrap(), fs::read(b.path().join(name)).unwrap(), "{name} differs");
    }
}

#[test]
fn short_sweep_writes_rows() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg: serde_json::Value = serde_json::from_slice(&fs::read(leapfrog()).unwrap()).unwrap();
    cfg["horizon"] = 0.05.into();
    let path = dir.path().join("cfg.json");
    fs::write(&path, cfg.to_string()).unwrap();
    let out = run(&[
        "sweep",
        "--config",
        path.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--eps",
        "0.03,0.01",
    ]);
    ok(&out);
    let mut rd = csv::Reader::from_path(dir.path().join("sweep.csv")).unwrap();
    let rows: Vec<_> = rd.records().map(Result::unwrap).collect();
    assert_eq!(rows.len(), 2);
    assert!(dir.path().join("sweep_timing.csv").exists());
    assert!(!dir.path().join("sweep.partial").exists());
}

#[test]
fn validate_fast_exits_zero() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["validate", "--level", "fast", "--out", dir.path().to_str().unwrap()]);
    ok(&out);
    let v: serde_json::Value = serde_json::from_slice(&fs::read(dir.path().join("validation.json")).unwrap()).unwrap();
    assert!(v["report"]["checks"].as_array().unwrap().len() >= 20);
}

#[test]
fn malformed_config_is_a_schema_error() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg: serde_json::Value = serde_json::from_slice(&fs::read(leapfrog()).unwrap()).unwrap();
    cfg["bodies"][0]["gamma"] = 0.0.into();
    let path = dir.path().join("bad.json");
    fs::write(&path, cfg.to_string()).unwrap();
    let out = run(&["pointvortex", "--config", path.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("bodies[0].gamma"), "{err}");

    fs::write(&path, r#"{"schema_version": 1, "bodies": [], "regime": "regime_log", "horizon": 1, "extra": 1}"#)
        .unwrap();
    let out = run(&["pointvortex", "--config", path.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("extra"));
}

#[test]
fn thread_override_must_be_numeric() {
    let out =
        Command::new(BIN).args(["validate", "--level", "fast"]).env("RINGVORTEX_THREADS", "many").output().unwrap();
    assert_eq!(out.status.code(), Some(2));
}
