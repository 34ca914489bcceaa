use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn omsqueeze(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_omsqueeze"))
        .args(args)
        .env("OMSQUEEZE_OUT_DIR", dir)
        .output()
        .unwrap()
}

fn write(dir: &Path, name: &str, text: &str) -> String {
    let p = dir.join(name);
    std::fs::write(&p, text).unwrap();
    p.display().to_string()
}

fn json(path: impl AsRef<Path>) -> Value {
    serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap()
}

const PHYSICS: &str = r#"
[cavity]
kappa_hz = 1.9e6
g0_hz = 30.0
delta_hz = 200e3

[mechanics]
omega_m0_hz = 530e3
quality_factor = 6.4e6

[bath]
temperature_k = 7.0

[pump]
minus = [6.9e6, 0.0]
plus = [3.2e6, 0.0]
"#;

#[test]
fn rates_reports_device_values() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", PHYSICS);
    let out = omsqueeze(dir.path(), &["--config", &cfg, "rates"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = json(dir.path().join("rates.json"));
    assert!((r["gamma_m_hz"].as_f64().unwrap() - 530e3 / 6.4e6).abs() < 1e-12);
    assert!(r["stable"].as_bool().unwrap());
    let m = json(dir.path().join("rates.manifest.json"));
    assert_eq!(m["outputs"], serde_json::json!(["rates.json", "rates_table.csv"]));
}

#[test]
fn zero_detuning_gives_zero_s() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", &PHYSICS.replace("delta_hz = 200e3", "delta_hz = 0.0"));
    let out = omsqueeze(dir.path(), &["--config", &cfg, "rates"]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(dir.path().join("rates.json"))["s"].as_f64(), Some(0.0));
}

#[test]
fn instability_exits_3() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", &PHYSICS.replace("plus = [3.2e6, 0.0]", "plus = [6.8e6, 0.0]"));
    let out = omsqueeze(dir.path(), &["--config", &cfg, "rates"]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stdout));
    assert!(String::from_utf8_lossy(&out.stderr).contains("instability") || String::from_utf8_lossy(&out.stderr).contains("anti-damping"));
    assert_eq!(json(dir.path().join("rates.json"))["stable"], Value::Bool(false));
}

#[test]
fn config_errors_exit_2_with_location() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", &PHYSICS.replace("g0_hz = 30.0", "g0_hz = -30.0"));
    let out = omsqueeze(dir.path(), &["--config", &cfg, "rates"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("[cavity]") && err.contains("line 4"), "{err}");

    let cfg = write(dir.path(), "d.toml", "[truth]\nn_bar = 1.0\ns = 0.2\n");
    let out = omsqueeze(dir.path(), &["--config", &cfg, "bias", "--trials", "100"]);
    assert_eq!(out.status.code(), Some(2));

    let out = omsqueeze(dir.path(), &["--config", "/nonexistent.toml", "rates"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn unconverged_fit_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    let flat: String = (0..200).map(|i| format!("{},1,0\n", 500e3 + i as f64 * 20.0)).collect();
    let off = write(dir.path(), "flat.csv", &format!("# {{\"n_avg\": 10}}\nfreq_hz,psd,mask\n{flat}"));
    let out = omsqueeze(dir.path(), &["fit", "--off", &off]);
    assert_eq!(out.status.code(), Some(4), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn synth_then_fit_recovers_truth() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write(dir.path(), "c.toml", "[truth]\nn_bar = 5.8\ns = 0.3\n\n[detection]\nnoiseless = true\n");
    assert_eq!(omsqueeze(dir.path(), &["--config", &cfg, "synth"]).status.code(), Some(0));
    let off = dir.path().join("drive_off.csv").display().to_string();
    let on = dir.path().join("drive_on.csv").display().to_string();
    let out = omsqueeze(dir.path(), &["fit", "--off", &off, "--on", &on]);
    assert_eq!(out.status.code(), Some(0));
    let f = json(dir.path().join("fit.json"));
    assert!((f["on"]["s"]["value"].as_f64().unwrap() - 0.3).abs() < 1e-6);
    assert!((f["off"]["n_bar"]["value"].as_f64().unwrap() - 5.8).abs() < 1e-5);
}

#[test]
fn manifest_replays_identically() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a");
    let b = dir.path().join("b");
    let cfg = write(dir.path(), "c.toml", "[truth]\nn_bar = 5.8\ns = 0.2\n\n[detection]\nn_avg = 4\n");
    let out = omsqueeze(dir.path(), &["--config", &cfg, "--seed", "99", "--out-dir", a.to_str().unwrap(), "synth"]);
    assert_eq!(out.status.code(), Some(0));
    let manifest = a.join("synth.manifest.json");
    let out = omsqueeze(dir.path(), &["--out-dir", b.to_str().unwrap(), "replay", manifest.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    for f in ["drive_on.csv", "drive_off.csv", "synth.json"] {
        assert_eq!(std::fs::read(a.join(f)).unwrap(), std::fs::read(b.join(f)).unwrap(), "{f}");
    }
    assert_eq!(json(b.join("synth.manifest.json"))["seed"], 99);
}

#[test]
fn sweep_flags_and_formats() {
    let dir = tempfile::tempdir().unwrap();
    let args = ["sweep", "--axis", "parametric-gain-s", "--start", "0", "--stop", "0.99", "--points", "12"];
    let out = omsqueeze(dir.path(), &[&["--format", "svg", "--log"][..], &args].concat());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = std::fs::read_to_string(dir.path().join("sweep_curves.csv")).unwrap();
    assert_eq!(csv.lines().count(), 13);
    assert!(std::fs::read_to_string(dir.path().join("sweep_curves.svg")).unwrap().contains("<polyline"));

    let out = omsqueeze(dir.path(), &[&["--format", "json"][..], &args].concat());
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(json(dir.path().join("sweep_curves.json"))["rows"].as_array().unwrap().len(), 12);

    let out = omsqueeze(dir.path(), &["sweep", "--axis", "gamma-eff", "--start", "5", "--stop", "1"]);
    assert_eq!(out.status.code(), Some(2));
}
