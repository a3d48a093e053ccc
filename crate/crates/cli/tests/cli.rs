use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use disperse_uc::{run, ExperimentConfig, ExperimentReport};
use serde_json::{json, Value};

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_disperse-uc"))
}

fn write_config(dir: &Path, name: &str, cfg: Value) -> PathBuf {
    let path = dir.join(name);
    std::fs::write(&path, cfg.to_string()).unwrap();
    path
}

fn run_cli(config: &Path, extra: &[&str]) -> Output {
    bin().arg("run").arg("--config").arg(config).args(extra).output().unwrap()
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("terminated by signal")
}

fn report(o: &Output) -> ExperimentReport {
    ExperimentReport::from_json(std::str::from_utf8(&o.stdout).unwrap()).unwrap()
}

fn vdc_m1() -> Value {
    json!({"experiment": "vdc", "m": 1, "parameters": {"s_min": 0.01, "s_max": 1.0}})
}

#[test]
fn passing_run_exits_zero_and_writes_output_path() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.json");
    let mut cfg = vdc_m1();
    cfg["output_path"] = json!(out.to_str().unwrap());
    let path = write_config(dir.path(), "vdc.json", cfg);
    let o = run_cli(&path, &[]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let printed = report(&o);
    assert!(printed.pass);
    assert!((printed.results["slope"] + 0.5).abs() <= 0.005);
    let written = ExperimentReport::from_json(&std::fs::read_to_string(out).unwrap()).unwrap();
    assert_eq!(written, printed);
}

#[test]
fn failed_tolerance_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    // the p_dec = 2 band is exactly 1, so a band tolerance of 0.5 must fail
    let path = write_config(
        dir.path(),
        "sub.json",
        json!({"experiment": "subordination", "m": 1, "parameters": {"p_dec": 2.0, "tolerance": 0.5}}),
    );
    let o = run_cli(&path, &[]);
    assert_eq!(code(&o), 1);
    assert!(!report(&o).pass);
}

#[test]
fn missing_m_exits_two_naming_the_key() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), "bad.json", json!({"experiment": "vdc"}));
    let o = run_cli(&path, &[]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("`m`"));
}

#[test]
fn missing_experiment_key_exits_two_naming_it() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), "kd.json", json!({"experiment": "kernel-decay", "m": 1, "grid": [[40, 4096]]}));
    let o = run_cli(&path, &[]);
    assert_eq!(code(&o), 2);
    assert!(String::from_utf8_lossy(&o.stderr).contains("`window`"));
}

#[test]
fn numerical_failure_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let path =
        write_config(dir.path(), "ca.json", json!({"experiment": "carleman-l2", "m": 1, "grid": [[1, 64], [16, 64]]}));
    let o = run_cli(&path, &[]);
    assert_eq!(code(&o), 3);
    assert!(String::from_utf8_lossy(&o.stderr).contains("under-resolved"));
}

#[test]
fn set_overrides_file_and_csv_series_is_written() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), "vdc.json", vdc_m1());
    let csv = dir.path().join("series.csv");
    let o = run_cli(&path, &["--set", "m=2", "--set", "s_min=1e-7", "--set", "s_max=1e-5", "--csv", csv.to_str().unwrap()]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let r = report(&o);
    assert_eq!(r.config.m, 2);
    assert!((r.results["slope"] + 0.25).abs() <= 0.03 * 0.25);
    let text = std::fs::read_to_string(csv).unwrap();
    assert!(text.starts_with("s,magnitude\n"));
    assert_eq!(text.lines().count(), 1 + 9);
}

#[test]
fn repeated_runs_are_bitwise_identical() {
    let cfg = ExperimentConfig::from_value(
        json!({"experiment": "multiplier-uniformity", "m": 1, "seed": 7, "parameters": {"b": 0.3, "extra_members": 4, "n": 128}}),
    )
    .unwrap();
    let (a, b) = (run(&cfg).unwrap(), run(&cfg).unwrap());
    assert_eq!(a.results.len(), b.results.len());
    for (k, v) in &a.results {
        assert_eq!(v.to_bits(), b.results[k].to_bits(), "{k}");
    }
}

#[test]
fn report_json_round_trips() {
    let cfg = ExperimentConfig::from_value(
        json!({"experiment": "treves", "m": 1, "grid": [[12, 4096]], "parameters": {"p_coeffs": [0.5, -1, 1]}}),
    )
    .unwrap();
    let r = run(&cfg).unwrap();
    assert_eq!(ExperimentReport::from_json(&r.to_json().unwrap()).unwrap(), r);
}

fn csv_rows(text: &str) -> Vec<std::collections::HashMap<String, String>> {
    let mut rd = csv::Reader::from_reader(text.as_bytes());
    let header: Vec<String> = rd.headers().unwrap().iter().map(String::from).collect();
    rd.records()
        .map(|r| header.iter().cloned().zip(r.unwrap().iter().map(String::from)).collect())
        .collect()
}

#[test]
fn single_value_sweep_matches_run() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), "vdc.json", vdc_m1());
    let o = bin().args(["sweep", "--config"]).arg(&path).args(["--axis", "x", "--values", "0.25"]).output().unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(std::str::from_utf8(&o.stdout).unwrap());
    assert_eq!(rows.len(), 1 + 3);
    let single = run(&ExperimentConfig::from_value(vdc_m1()).unwrap().with("x", json!(0.25)).unwrap()).unwrap();
    assert_eq!(rows[0]["status"], "pass");
    for (k, v) in &single.results {
        assert_eq!(rows[0][k].parse::<f64>().unwrap().to_bits(), v.to_bits(), "{k}");
    }
    assert_eq!(rows[0]["primary"].parse::<f64>().unwrap(), single.results["slope"]);
    assert_eq!(rows[3]["row"], "max_over_min");
    assert_eq!(rows[3]["primary"].parse::<f64>().unwrap(), 1.0);
}

#[test]
fn kernel_decay_sweep_over_m() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(
        dir.path(),
        "kd.json",
        json!({"experiment": "kernel-decay", "m": 1, "grid": [[40, 16384]], "parameters": {"window": [3, 7]}}),
    );
    let csv = dir.path().join("sweep.csv");
    let o = bin()
        .args(["sweep", "--config"])
        .arg(&path)
        .args(["--axis", "m", "--values", "1,2,3", "--csv"])
        .arg(&csv)
        .env("DISPERSE_UC_THREADS", "2")
        .output()
        .unwrap();
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let rows = csv_rows(&std::fs::read_to_string(csv).unwrap());
    assert_eq!(rows.len(), 3 + 3);
    for (row, m) in rows.iter().zip(1..=3) {
        let expected = 2.0 * m as f64 / (2.0 * m as f64 - 1.0);
        let got: f64 = row["exponent"].parse().unwrap();
        assert!((got - expected).abs() <= 0.05 * expected, "m={m}: {got}");
        assert_eq!(row["m"], m.to_string());
    }
}

#[test]
fn sweep_with_an_errored_row_exits_three() {
    let dir = tempfile::tempdir().unwrap();
    let path = write_config(dir.path(), "sub.json", json!({"experiment": "subordination", "m": 1}));
    let o = bin().args(["sweep", "--config"]).arg(&path).args(["--axis", "p_dec", "--values", "2,-1"]).output().unwrap();
    assert_eq!(code(&o), 3);
    let rows = csv_rows(std::str::from_utf8(&o.stdout).unwrap());
    assert_eq!(rows[1]["status"], "error");
    assert!(!rows[1]["message"].is_empty());
}

#[test]
fn help_documents_csv_columns() {
    let o = bin().args(["sweep", "--help"]).output().unwrap();
    let text = String::from_utf8_lossy(&o.stdout);
    assert!(text.contains("row,<axis>,status,primary"));
    assert!(text.contains("DISPERSE_UC_THREADS"));
    let o = bin().args(["run", "--help"]).output().unwrap();
    assert!(String::from_utf8_lossy(&o.stdout).contains("gamma,ratio"));
}
