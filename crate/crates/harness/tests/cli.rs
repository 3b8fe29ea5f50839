mod common;

use std::fs;
use std::process::Command;

fn mfuav() -> Command {
    Command::new(env!("CARGO_BIN_EXE_mfuav"))
}

#[test]
fn validate_config_reports_error_classes() {
    let ok = mfuav().args(["validate-config", "--scale=desk"]).output().unwrap();
    assert!(ok.status.success());
    assert!(String::from_utf8_lossy(&ok.stdout).contains("grid_rows = 7"));

    let unit = mfuav().args(["validate-config", "--demand_q=1.5"]).output().unwrap();
    assert_eq!(unit.status.code(), Some(4));
    assert!(String::from_utf8_lossy(&unit.stderr).contains("UnitViolation"));

    let schema = mfuav().args(["validate-config", "--bogus=1"]).output().unwrap();
    assert_eq!(schema.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&schema.stderr).contains("SchemaViolation"));
}

#[test]
fn empty_plotdata_fails() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path().join("plots");
    let r = mfuav().args(["plotdata", "--kind", "fig4", "--out"]).arg(&out).output().unwrap();
    assert_eq!(r.status.code(), Some(8));
    assert!(String::from_utf8_lossy(&r.stderr).contains("PlotDataError"));
    assert!(!out.exists());
}

#[test]
fn relative_output_lands_under_the_output_root() {
    let tmp = tempfile::tempdir().unwrap();
    let config = tmp.path().join("tiny.toml");
    fs::write(&config, common::TINY).unwrap();
    let r = mfuav()
        .env("MFUAV_OUTPUT_ROOT", tmp.path())
        .current_dir(tmp.path().join(".."))
        .args(["run", "-c"])
        .arg(&config)
        .arg("--output_dir=nested/run")
        .output()
        .unwrap();
    assert!(r.status.success(), "{}", String::from_utf8_lossy(&r.stderr));
    assert!(tmp.path().join("nested/run/metrics.csv").is_file());

    // A run directory is accepted in place of a config file.
    let again = mfuav()
        .env("MFUAV_OUTPUT_ROOT", tmp.path())
        .args(["run", "-c"])
        .arg(tmp.path().join("nested/run"))
        .arg("--output_dir=again")
        .output()
        .unwrap();
    assert!(again.status.success(), "{}", String::from_utf8_lossy(&again.stderr));
    assert_eq!(
        fs::read(tmp.path().join("nested/run/metrics.csv")).unwrap(),
        fs::read(tmp.path().join("again/metrics.csv")).unwrap()
    );
}
