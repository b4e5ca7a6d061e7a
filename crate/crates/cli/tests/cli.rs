use std::fs;
use std::path::Path;
use std::process::{Command, Output};

fn simctl(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_bess-simctl")).args(args).output().expect("binary runs")
}

fn write_scenario(dir: &Path, body: &str) -> String {
    let path = dir.join("s.cfg");
    fs::write(&path, body).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn run_writes_records_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path(), "alpha0 = 29715\nbeta0 = 12.57\ntrace = gen:sigma_v=0.02,seed=4\n");
    let out = dir.path().join("out");
    let res = simctl(&["run", "--scenario", &scenario, "--out", out.to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    let records = fs::read_to_string(out.join("records.csv")).unwrap();
    assert_eq!(records.lines().count(), 301);
    let summary: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("summary.json")).unwrap()).unwrap();
    let e_star = summary["report"]["e_star_kwh"].as_f64().unwrap();
    let e_exp = summary["report"]["e_exp_kwh"].as_f64().unwrap();
    assert!(e_star > 0.0 && e_star < e_exp);

    let res = simctl(&["metrics", "--records", out.join("records.csv").to_str().unwrap()]);
    assert!(res.status.success());
    assert!(String::from_utf8_lossy(&res.stdout).contains("E_exp"));
}

#[test]
fn same_seed_same_bytes() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path(), "alpha0 = 19810\nbeta0 = 8.39\n");
    let mut outputs = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let res = simctl(&["run", "--scenario", &scenario, "--seed", "9", "--out", out.to_str().unwrap()]);
        assert!(res.status.success());
        outputs.push(fs::read(out.join("records.csv")).unwrap());
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn file_trace_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let trace = dir.path().join("trace.csv");
    let res = simctl(&["gen-trace", "--n", "60", "--seed", "2", "--out", trace.to_str().unwrap()]);
    assert!(res.status.success());
    let scenario = write_scenario(dir.path(), "alpha0 = 9003\nbeta0 = 8.39\nduration = 60\ntrace = trace.csv\n");
    let res = simctl(&["run", "--scenario", &scenario, "--out", dir.path().join("out").to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
}

#[test]
fn errors_exit_nonzero() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = write_scenario(dir.path(), "alpha0 = 9003\n");
    let res = simctl(&["run", "--scenario", &scenario, "--out", dir.path().to_str().unwrap()]);
    assert!(!res.status.success());
    assert!(String::from_utf8_lossy(&res.stderr).contains("beta0"));

    let scenario = write_scenario(dir.path(), "alpha0 = 9003\nbeta0 = 8.39\nduration = 600\ntrace = missing.csv\n");
    let res = simctl(&["run", "--scenario", &scenario, "--out", dir.path().to_str().unwrap()]);
    assert!(!res.status.success());
}
