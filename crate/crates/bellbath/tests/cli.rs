use std::process::Command;

use bellbath::commands::{compute_dynamics, DynamicsRequest, Session};
use bellbath::config::Config;
use bellbath_core::device::{Branch, Target};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_bellbath"))
}

#[test]
fn calibrate_then_reuse_config() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["--out", dir.path().to_str().unwrap(), "calibrate"])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    let conf = dir.path().join("calibrated.conf");
    assert!(dir.path().join("calibration.csv").exists());
    assert!(conf.exists());

    let spec_dir = dir.path().join("spec");
    let out = bin()
        .args([
            "--config",
            conf.to_str().unwrap(),
            "--out",
            spec_dir.to_str().unwrap(),
            "--svg",
            "spectrum",
        ])
        .output()
        .unwrap();
    assert!(
        out.status.success(),
        "{}",
        String::from_utf8_lossy(&out.stderr)
    );
    assert!(spec_dir.join("spectrum.csv").exists());
    assert!(spec_dir.join("spectrum.svg").exists());
}

#[test]
fn bad_override_exits_with_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args([
            "--out",
            dir.path().to_str().unwrap(),
            "--set",
            "device.nonsense=1",
            "spectrum",
        ])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&out.stderr).contains("nonsense"));

    let out = bin()
        .args(["--preset", "nope", "spectrum"])
        .output()
        .unwrap();
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn forbidden_target_is_not_prepared() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = Config::preset("default").unwrap();
    cfg.set("dynamics.points", "21", 0).unwrap();
    let s = Session::new(cfg, dir.path(), false).unwrap();
    let r = DynamicsRequest {
        target: Target::S,
        branch: Branch::Plus,
        phi: 0.0,
    };
    let d = compute_dynamics(&s, &r).unwrap();
    assert!(d.forbidden);
    assert!(d.steady.s < 0.05, "F(S) = {}", d.steady.s);
}
