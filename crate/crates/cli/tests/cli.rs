use std::path::Path;
use std::process::{Command, Output};

use clarifier_core::scenario::{builtin, ScenarioFile};

fn clarifier(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_clarifier"))
        .args(args)
        .arg("--out")
        .arg(out)
        .env("RUST_LOG", "warn")
        .output()
        .expect("binary runs")
}

fn read_csv(path: &Path) -> Vec<Vec<String>> {
    std::fs::read_to_string(path)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

#[test]
fn simulate_writes_artifacts() {
    let dir = tempfile::tempdir().unwrap();
    let out = clarifier(&["simulate", "--cells", "24", "--horizon", "0.5", "--cadence", "0.25"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));

    let profiles = read_csv(&dir.path().join("profiles.csv"));
    assert_eq!(profiles[0], ["t", "z", "C1", "C2", "S1", "S2", "S3", "X", "W"]);
    // three snapshots of 26 cells
    assert_eq!(profiles.len(), 1 + 3 * 26);
    let times: Vec<f64> = profiles[1..].iter().map(|r| r[0].parse().unwrap()).collect();
    assert_eq!(times[0], 0.0);
    assert_eq!(*times.last().unwrap(), 1800.0);

    let outlets = read_csv(&dir.path().join("outputs.csv"));
    assert_eq!(outlets.len(), 4);
    assert_eq!(outlets[0].last().unwrap(), "Q_e");

    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["omega_violations"], 0);
    assert_eq!(report["cells"], 24);
    assert_eq!(report["final_time"], 1800.0);
}

#[test]
fn identical_runs_give_identical_files() {
    let (a, b) = (tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap());
    let args = ["simulate", "--scenario", "example5", "--cells", "20", "--horizon", "0.2", "--cadence", "0.1"];
    assert!(clarifier(&args, a.path()).status.success());
    assert!(clarifier(&args, b.path()).status.success());
    for f in ["profiles.csv", "outputs.csv"] {
        let (x, y) = (std::fs::read(a.path().join(f)).unwrap(), std::fs::read(b.path().join(f)).unwrap());
        assert!(x == y, "{f} differs");
    }
}

#[test]
fn numbers_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    assert!(clarifier(&["simulate", "--cells", "16", "--horizon", "0.1"], dir.path()).status.success());
    for row in read_csv(&dir.path().join("profiles.csv")).iter().skip(1) {
        for cell in row {
            let v: f64 = cell.parse().unwrap();
            assert_eq!(format!("{v:?}"), *cell);
        }
    }
}

#[test]
fn scenario_files_are_accepted() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("scenario.json");
    let mut s = builtin("example1").unwrap();
    s.name = "from-file".into();
    std::fs::write(&path, ScenarioFile::from_scenario(&s).to_json().unwrap()).unwrap();
    let out = clarifier(
        &["simulate", "--scenario", path.to_str().unwrap(), "--cells", "16", "--horizon", "0.1"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report = std::fs::read_to_string(dir.path().join("report.json")).unwrap();
    assert!(report.contains("\"from-file\""));
}

#[test]
fn xp_simulation_and_comparison() {
    let dir = tempfile::tempdir().unwrap();
    let out = clarifier(&["simulate", "--method", "xp", "--cells", "16", "--horizon", "0.2"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let out = clarifier(&["compare-xp", "--cells", "16", "--horizon", "0.5", "--cadence", "0.25"], dir.path());
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let d = read_csv(&dir.path().join("compare_distance.csv"));
    assert_eq!(d[0], ["t", "distance"]);
    assert_eq!(d.len(), 4);
    assert_eq!(d[1][1], "0.0");
    let last: f64 = d[3][1].parse().unwrap();
    assert!(last > 0.0 && last < 0.5);
    assert_eq!(read_csv(&dir.path().join("compare_profiles.csv")).len(), 1 + 3 * 18);
}

#[test]
fn cfl_curve_is_monotone() {
    let dir = tempfile::tempdir().unwrap();
    let out = clarifier(&["cfl-curve", "--per-decade", "6"], dir.path());
    assert!(out.status.success());
    let rows = read_csv(&dir.path().join("cfl_curve.csv"));
    assert_eq!(rows[0], ["N", "dz", "dt_cs", "dt_xp"]);
    let pts: Vec<(f64, f64)> = rows[1..].iter().map(|r| (r[1].parse().unwrap(), r[2].parse().unwrap())).collect();
    assert!(pts.len() >= 12);
    for w in pts.windows(2) {
        assert!(w[1].0 < w[0].0 && w[1].1 <= w[0].1, "{w:?}");
    }
}

#[test]
fn converge_writes_error_table() {
    let dir = tempfile::tempdir().unwrap();
    let out = clarifier(
        &["converge", "--levels", "8,16", "--reference", "64", "--times", "0.25,0.5"],
        dir.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = read_csv(&dir.path().join("errors.csv"));
    assert_eq!(rows[0], ["t_h", "N", "e_rel", "theta", "cpu_s"]);
    assert_eq!(rows.len(), 5);
    assert_eq!(rows[1][3], "");
    let e: Vec<f64> = rows[1..].iter().map(|r| r[2].parse().unwrap()).collect();
    assert!(e[1] < e[0] && e[3] < e[2]);
}

#[test]
fn invalid_requests_fail() {
    let dir = tempfile::tempdir().unwrap();
    for args in [
        &["simulate", "--scenario", "example9"][..],
        &["simulate", "--safety", "1.5"],
        &["simulate", "--cells", "1"],
        &["compare-xp", "--scenario", "example2", "--horizon", "0.1"],
        &["converge", "--levels", "24", "--reference", "64", "--times", "0.1"],
    ] {
        let out = clarifier(args, dir.path());
        assert!(!out.status.success(), "{args:?} succeeded");
        assert!(String::from_utf8_lossy(&out.stderr).contains("error"));
    }
}
