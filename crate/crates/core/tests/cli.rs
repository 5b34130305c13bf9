use std::path::Path;
use std::process::{Command, Output};

use dieselnn::closed_loop::{compute_metrics, ReferenceProfile, RunResult};
use dieselnn::config::RunConfig;

fn dieselnn(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dieselnn"))
        .args(args)
        .current_dir(dir)
        .output()
        .expect("binary runs")
}

fn stderr(o: &Output) -> String {
    String::from_utf8_lossy(&o.stderr).into_owned()
}

fn write_run(path: &Path, eta: f64, speed_offset: f64, peak: f64) {
    let n = 300;
    let speed_ref: Vec<f64> = (0..n).map(|k| if k < 150 { 1200.0 } else { 2400.0 }).collect();
    let speed: Vec<f64> = speed_ref.iter().enumerate().map(|(k, r)| if k >= 150 && k < 180 { r - speed_offset } else { *r }).collect();
    let mut opacity = vec![8.0; n];
    opacity[160] = peak;
    let opacity_ref = vec![15.0; n];
    let profile = ReferenceProfile::new(0.1, speed_ref.clone(), opacity_ref.clone()).unwrap();
    let metrics = compute_metrics(&speed, &opacity, &profile).unwrap();
    let run = RunResult {
        ts: 0.1,
        pump: vec![50.0; n],
        speed_ref,
        speed,
        pressure: vec![200.0; n],
        airflow: vec![13.0; n],
        opacity_ref,
        opacity,
        metrics,
    };
    run.save(path, &[format!("eta_op {eta}")]).unwrap();
}

#[test]
fn shipped_config_is_the_default() {
    let path = Path::new(env!("CARGO_MANIFEST_DIR")).join("../../config/default.toml");
    assert_eq!(RunConfig::load(path).unwrap(), RunConfig::default());
}

#[test]
fn unknown_config_key_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    std::fs::write(dir.path().join("bad.toml"), "[train]\nbogus = 1\n").unwrap();
    let o = dieselnn(dir.path(), &["--config", "bad.toml", "gen-data", "--out", "log.csv"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("bogus"));
    assert!(!dir.path().join("log.csv").exists());
}

#[test]
fn too_short_log_is_rejected_before_fitting() {
    let dir = tempfile::tempdir().unwrap();
    let o = dieselnn(dir.path(), &["gen-data", "--out", "log.csv", "--samples", "100"]);
    assert!(o.status.success(), "{}", stderr(&o));
    let text = std::fs::read_to_string(dir.path().join("log.csv")).unwrap();
    assert!(text.lines().next().unwrap().starts_with("# dieselnn"));
    let short: Vec<&str> = text.lines().filter(|l| !l.starts_with('#')).take(11).collect();
    std::fs::write(dir.path().join("short.csv"), short.join("\n")).unwrap();
    let o = dieselnn(dir.path(), &["identify", "--data", "short.csv", "--out", "model"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stderr(&o).contains("parameters"), "{}", stderr(&o));
}

#[test]
fn report_exit_code_follows_the_sweep_trend() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    write_run(&p.join("a.csv"), 0.0, 100.0, 40.0);
    write_run(&p.join("b.csv"), 0.2, 200.0, 25.0);
    write_run(&p.join("c.csv"), 0.8, 300.0, 16.0);
    let o = dieselnn(p, &["report", "--runs", "c.csv", "a.csv", "b.csv", "--out", "summary.csv"]);
    assert_eq!(o.status.code(), Some(0), "{}", stderr(&o));
    let summary = std::fs::read_to_string(p.join("summary.csv")).unwrap();
    let rows: Vec<&str> = summary.lines().filter(|l| !l.starts_with('#')).collect();
    assert_eq!(rows.len(), 4);
    assert!(rows[1].starts_with('0'));

    write_run(&p.join("c.csv"), 0.8, 300.0, 30.0);
    let o = dieselnn(p, &["report", "--runs", "a.csv", "b.csv", "c.csv", "--out", "summary.csv"]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stderr(&o).contains("violation"));

    write_run(&p.join("d.csv"), 0.2, 200.0, 25.0);
    let o = dieselnn(p, &["report", "--runs", "b.csv", "d.csv"]);
    assert_eq!(o.status.code(), Some(2));
}
