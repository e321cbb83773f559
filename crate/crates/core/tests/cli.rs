use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_machlimit"))
}

fn quick_config(dir: &Path) -> std::path::PathBuf {
    let path = dir.join("quick.cfg");
    std::fs::write(
        &path,
        "dim = 2\ncells = 8\nbc = periodic, slip_walls\neps = 0.1, 0.05\nalpha = 0.5\n\
         t_final = 0.02\ncadence = 2\n",
    )
    .unwrap();
    path
}

#[test]
fn run_writes_versioned_csv_and_snapshots() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quick_config(dir.path());
    let out = dir.path().join("run");
    let st = bin()
        .args(["run", "--config"])
        .arg(&cfg)
        .args(["--eps", "0.05", "--out"])
        .arg(&out)
        .status()
        .unwrap();
    assert!(st.success());
    let csv = std::fs::read_to_string(out.join("timeseries_0.05.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "# machlimit-csv v1");
    let header: Vec<&str> = lines.next().unwrap().split(',').collect();
    assert_eq!(header.len(), 28);
    assert_eq!(header[0], "t");
    assert_eq!(header[27], "cg_iters");
    let rows: Vec<&str> = lines.collect();
    assert!(rows.len() >= 2);
    assert!(rows.iter().all(|r| r.split(',').count() == 28));
    assert!(std::fs::read_dir(&out)
        .unwrap()
        .any(|e| e.unwrap().file_name().to_string_lossy().ends_with(".bin")));

    // same config, same bytes
    let out2 = dir.path().join("run2");
    assert!(bin().args(["run", "--config"]).arg(&cfg).args(["--eps", "0.05", "--out"]).arg(&out2).status().unwrap().success());
    assert_eq!(csv, std::fs::read_to_string(out2.join("timeseries_0.05.csv")).unwrap());
}

#[test]
fn sweep_writes_summary() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = quick_config(dir.path());
    let out = dir.path().join("sweep");
    let st = bin()
        .args(["sweep", "--config"])
        .arg(&cfg)
        .args(["--eps-list", "0.1,0.05,0.025", "--jobs", "2", "--out"])
        .arg(&out)
        .env("MACHLIMIT_THREADS", "2")
        .status()
        .unwrap();
    assert!(st.success());
    let summary: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out.join("sweep_summary.json")).unwrap()).unwrap();
    assert_eq!(summary["runs"].as_array().unwrap().len(), 3);
    assert_eq!(summary["rates"].as_array().unwrap().len(), 2);
    for e in ["0.1", "0.05", "0.025"] {
        assert!(out.join(format!("timeseries_{e}.csv")).exists());
    }
}

#[test]
fn bad_inputs_fail_cleanly() {
    let o = bin().args(["verify", "--suite", "nope"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("operators") && err.contains("sweep"), "{err}");

    let dir = tempfile::tempdir().unwrap();
    let cfg = quick_config(dir.path());
    let o = bin().args(["sweep", "--config"]).arg(&cfg).args(["--eps-list", "0.05,0.1"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
    let o = bin().args(["run", "--config", "/nonexistent.cfg"]).output().unwrap();
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn verify_operators_suite_passes() {
    let dir = tempfile::tempdir().unwrap();
    let o = bin()
        .args(["verify", "--suite", "operators", "--out"])
        .arg(dir.path())
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stdout));
    assert!(dir.path().join("verify_report.json").exists());
}
