use std::fs;
use std::path::Path;
use std::process::Command;

use wimax_sim::stats::{load_csv, CSV_HEADER};

fn simulate(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_simulate"))
        .args(args)
        .output()
        .expect("spawn simulate")
}

fn write_config(dir: &Path, text: &str) -> String {
    let path = dir.join("run.cfg");
    fs::write(&path, text).unwrap();
    path.to_str().unwrap().to_string()
}

#[test]
fn single_scenario_writes_csv_and_summary() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(dir.path(), "scenario=amc-a\nwarmup=1\n");
    let res = simulate(&["--config", &cfg, "--duration", "3", "--out", out.to_str().unwrap()]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));

    let csv = fs::read_to_string(out.join("amc-a.csv")).unwrap();
    assert_eq!(csv.lines().count(), 601);
    assert_eq!(csv.lines().next().unwrap(), CSV_HEADER.join(","));
    let records = load_csv(&out.join("amc-a.csv")).unwrap();
    assert_eq!(records.len(), 600);

    let summary = fs::read_to_string(out.join("amc-a.summary.txt")).unwrap();
    assert!(summary.starts_with("scenario: amc-a\n"));
    assert!(summary.contains("config_digest: "));
}

#[test]
fn all_writes_comparison() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(dir.path(), "scenario=qpsk12\nwarmup=1\n");
    let res = simulate(&[
        "--scenario", "all", "--config", &cfg, "--duration", "4", "--seed", "3", "--out",
        out.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "{}", String::from_utf8_lossy(&res.stderr));
    for slug in ["qpsk12", "amc-a", "amc-b", "amc-a-harq"] {
        assert!(out.join(format!("{slug}.csv")).is_file());
        let s = fs::read_to_string(out.join(format!("{slug}.summary.txt"))).unwrap();
        assert!(s.contains("seed: 3\n"));
    }
    let cmp = fs::read_to_string(out.join("comparison.csv")).unwrap();
    assert_eq!(cmp.lines().count(), 5);
    assert!(cmp.lines().next().unwrap().contains("pareto_optimal"));
}

#[test]
fn same_seed_same_files() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = write_config(dir.path(), "scenario=amc-a-harq\nwarmup=1\n");
    let mut outputs = Vec::new();
    for name in ["a", "b"] {
        let out = dir.path().join(name);
        let res = simulate(&["--config", &cfg, "--duration", "3", "--out", out.to_str().unwrap()]);
        assert!(res.status.success());
        outputs.push((
            fs::read(out.join("amc-a-harq.csv")).unwrap(),
            fs::read(out.join("amc-a-harq.summary.txt")).unwrap(),
        ));
    }
    assert_eq!(outputs[0], outputs[1]);
}

#[test]
fn downsample_averages_to_bins() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let cfg = write_config(dir.path(), "scenario=qpsk12\nwarmup=0\n");
    let res = simulate(&[
        "--config", &cfg, "--duration", "5", "--downsample", "1", "--out", out.to_str().unwrap(),
    ]);
    assert!(res.status.success());
    assert_eq!(load_csv(&out.join("qpsk12.csv")).unwrap().len(), 5);
}

#[test]
fn config_errors_exit_with_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let out = out.to_str().unwrap();
    let cases = [
        "scenario=bogus\n",
        "scenario=amc-a\nno.such.key=1\n",
        "scenario=amc-a\nchannel.rho=1.5\n",
        "scenario=amc-a\namc.table=file:missing.csv\n",
        "seed=4\n",
    ];
    for text in cases {
        let cfg = write_config(dir.path(), text);
        let res = simulate(&["--config", &cfg, "--duration", "1", "--out", out]);
        assert_eq!(res.status.code(), Some(2), "{text:?}: {}", String::from_utf8_lossy(&res.stderr));
    }
    let res = simulate(&["--scenario", "amc-c", "--out", out]);
    assert_eq!(res.status.code(), Some(2));
}

#[test]
fn run_shorter_than_warmup_fails() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("out");
    let res = simulate(&["--scenario", "amc-b", "--duration", "2", "--out", out.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&res.stderr).contains("no steady-state window"));
}
