use std::path::Path;
use std::process::Command;

use perconet::manifest::{RunManifest, MANIFEST_NAME};

fn perconet(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_perconet"))
        .args(args)
        .env_remove("PERCONET_SEED")
        .env_remove("PERCONET_WORKERS")
        .output()
        .expect("binary runs")
}

fn out_arg(dir: &Path) -> String {
    dir.to_string_lossy().into_owned()
}

#[test]
fn theta_table_writes_csv_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let o = perconet(&["theta-table", "--set", "theta.trials=50", "--set", "theta.box_sizes=[40.0]", "--out", &out_arg(dir.path())]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let text = std::fs::read_to_string(dir.path().join("theta_L40.csv")).unwrap();
    let mut lines = text.lines();
    assert_eq!(lines.next(), Some("lambda,raw,stderr,fit,trials,L"));
    let grid: Vec<f64> = lines.map(|l| l.split(',').next().unwrap().parse().unwrap()).collect();
    assert_eq!(grid.first(), Some(&0.3));
    assert_eq!(grid.last(), Some(&2.0));
    let m = RunManifest::read(&dir.path().join(MANIFEST_NAME)).unwrap();
    assert_eq!(m.subcommand, "theta-table");
    assert!(m.outputs.contains_key("theta_L40.csv") && m.outputs.contains_key("theta_L40.json"));
}

#[test]
fn identical_pair_is_always_connected() {
    let dir = tempfile::tempdir().unwrap();
    let o = perconet(&[
        "connect-time",
        "--set",
        "fleet.N=[2]",
        "--set",
        "fleet.identical_pair=true",
        "--set",
        "fleet.R=0.01",
        "--set",
        "fleet.trials=3",
        "--out",
        &out_arg(dir.path()),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut r = csv::Reader::from_path(dir.path().join("connect_time.csv")).unwrap();
    let rows: Vec<csv::StringRecord> = r.records().map(|x| x.unwrap()).collect();
    assert_eq!(rows.len(), 3);
    for row in rows {
        assert_eq!(&row[5], "1");
    }
}

#[test]
fn replay_reproduces_checksums_and_detects_tampering() {
    let dir = tempfile::tempdir().unwrap();
    let run = dir.path().join("run");
    let o = perconet(&["connect-time", "--set", "fleet.N=[30]", "--set", "fleet.trials=4", "--set", "fleet.trips=3.0", "--out", &out_arg(&run)]);
    assert!(o.status.success());
    let manifest = run.join(MANIFEST_NAME);
    let o = perconet(&["replay", &out_arg(&manifest), "--out", &out_arg(&dir.path().join("again"))]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let mut m = RunManifest::read(&manifest).unwrap();
    m.outputs.insert("connect_time.csv".into(), "0".repeat(64));
    m.write(&run).unwrap();
    let o = perconet(&["replay", &out_arg(&manifest), "--out", &out_arg(&dir.path().join("third"))]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("connect_time.csv"));
}

#[test]
fn configuration_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let o = perconet(&["connect-time", "--set", "fleet.R=-1", "--out", &out_arg(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("fleet.R"));
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "[fleet]\nwalkers = 3\n").unwrap();
    let o = perconet(&["connect-time", "--config", &out_arg(&cfg), "--out", &out_arg(dir.path())]);
    assert_eq!(o.status.code(), Some(2));
    let o = perconet(&["no-such-command"]);
    assert_eq!(o.status.code(), Some(2));
    // nothing was simulated for the rejected runs
    assert!(!dir.path().join(MANIFEST_NAME).exists());
}

#[test]
fn config_file_and_environment_layering() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("c.toml");
    std::fs::write(&cfg, "[runtime]\nseed = 5\n[fleet]\nN = [20]\ntrials = 2\ntrips = 2.0\n").unwrap();
    let run = dir.path().join("run");
    let o = Command::new(env!("CARGO_BIN_EXE_perconet"))
        .args(["connect-time", "--config", &out_arg(&cfg), "--set", "fleet.trials=3", "--out", &out_arg(&run)])
        .env("PERCONET_SEED", "17")
        .env("PERCONET_WORKERS", "2")
        .output()
        .unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let m = RunManifest::read(&run.join(MANIFEST_NAME)).unwrap();
    assert_eq!(m.seed, 17);
    assert_eq!(m.workers, 2);
    assert!(m.config.contains("trials = 3"));
}
