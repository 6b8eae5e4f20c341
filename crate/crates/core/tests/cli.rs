use mqed_nmr::cli::{run, Command, RunConfig};
use std::path::Path;
use std::process::Command as Process;

fn bin() -> Process {
    Process::new(env!("CARGO_BIN_EXE_mqed-nmr"))
}

fn read(dir: &Path, name: &str) -> String {
    std::fs::read_to_string(dir.join(name)).unwrap()
}

fn sweep_rows(text: &str) -> Vec<String> {
    text.lines().filter(|l| !l.starts_with('#')).map(str::to_owned).collect()
}

#[test]
fn output_header_replays_byte_identically() {
    let first = tempfile::tempdir().unwrap();
    let second = tempfile::tempdir().unwrap();
    let status = bin()
        .args(["spectrum", "--preset", "decay-0.1", "--set", "delta_uv = 0.08 Mm^-1", "--out"])
        .arg(first.path())
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    let status = bin()
        .arg("spectrum")
        .arg("--config")
        .arg(first.path().join("spectrum.csv"))
        .arg("--out")
        .arg(second.path())
        .output()
        .unwrap();
    assert!(status.status.success(), "{}", String::from_utf8_lossy(&status.stderr));
    assert_eq!(read(first.path(), "spectrum.csv"), read(second.path(), "spectrum.csv"));
}

#[test]
fn sweep_order_does_not_matter() {
    let mut rows = Vec::new();
    for list in ["4, 7, 10 mm^-1", "10, 7, 4 mm^-1"] {
        let dir = tempfile::tempdir().unwrap();
        let mut cfg = RunConfig::defaults();
        cfg.set("delta_uv_list", list).unwrap();
        let report = run(Command::Sweep, &cfg, dir.path()).unwrap();
        assert_eq!(report.failures, 0);
        let mut r = sweep_rows(&read(dir.path(), "sweep.csv"));
        r[1..].sort();
        rows.push(r);
    }
    assert_eq!(rows[0], rows[1]);
    assert_eq!(rows[0].len(), 4);
}

#[test]
fn single_cutoff_sweep_has_one_row() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = RunConfig::defaults();
    cfg.set("delta_uv_list", "6 mm^-1").unwrap();
    let report = run(Command::Sweep, &cfg, dir.path()).unwrap();
    assert_eq!(sweep_rows(&read(dir.path(), "sweep.csv")).len(), 2);
    assert!(report.summary["regression"]["shielding"].is_null());
}

#[test]
fn failed_points_are_recorded_and_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let out = bin()
        .args(["sweep", "--set", "delta_ir = 5 mm^-1", "--set", "delta_uv_list = 4, 8 mm^-1", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(!out.status.success());
    let rows = sweep_rows(&read(dir.path(), "sweep.csv"));
    assert!(rows.iter().any(|r| r.contains("failed")));
    assert!(rows.iter().any(|r| r.ends_with(",ok")));
}

#[test]
fn missing_unit_is_rejected() {
    let mut cfg = RunConfig::defaults();
    cfg.set("B", "20").unwrap();
    let dir = tempfile::tempdir().unwrap();
    let err = run(Command::Shielding, &cfg, dir.path()).unwrap_err();
    assert!(err.to_string().contains('B'), "{err}");
}

#[test]
fn malformed_target_names_the_line() {
    let dir = tempfile::tempdir().unwrap();
    let target = dir.path().join("target.csv");
    std::fs::write(&target, "ppm,intensity\n0.0,1.0\n0.1,oops\n").unwrap();
    let mut cfg = RunConfig::defaults();
    cfg.apply_preset("round-trip").unwrap();
    cfg.set("target", target.to_str().unwrap()).unwrap();
    cfg.set("reference", "").unwrap();
    let err = run(Command::Reconstruct, &cfg, dir.path()).unwrap_err();
    assert!(err.to_string().contains("line 3"), "{err}");
}
