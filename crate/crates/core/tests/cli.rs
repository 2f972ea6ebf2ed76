use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use memlstm::dataset::series_from_csv;

fn memlstm(out: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_memlstm"))
        .arg("--out")
        .arg(out)
        .arg("--no-timestamp")
        .args(args)
        .output()
        .expect("binary runs")
}

fn ok(out: &Output) -> String {
    assert!(out.status.success(), "stderr: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout.clone()).unwrap()
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn train_reports_test_rmse_and_is_deterministic() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let stdout = ok(&memlstm(a.path(), &["train"]));
    assert!(stdout.contains("test  MSE"));
    ok(&memlstm(b.path(), &["train"]));

    let report = json(&a.path().join("train_report.json"));
    assert!(report["test"]["rmse"].as_f64().unwrap() <= 0.15);
    assert_eq!(report["test_rows"], 45);
    assert!(report["generated_at"].is_null());
    assert_eq!(report["published_reference"]["software_rmse"], 0.1059);

    assert_eq!(
        fs::read(a.path().join("weights.json")).unwrap(),
        fs::read(b.path().join("weights.json")).unwrap()
    );
    // Reports differ only in the weights path, which names the output dir.
    let strip = |dir: &Path| {
        let mut v = json(&dir.join("train_report.json"));
        v.as_object_mut().unwrap().remove("weights_file");
        v
    };
    assert_eq!(strip(a.path()), strip(b.path()));
}

#[test]
fn seed_flag_changes_weights() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    ok(&memlstm(a.path(), &["train"]));
    ok(&memlstm(b.path(), &["--seed", "7", "train"]));
    assert_ne!(
        fs::read(a.path().join("weights.json")).unwrap(),
        fs::read(b.path().join("weights.json")).unwrap()
    );
}

#[test]
fn bad_dataset_path_fails_with_category() {
    let dir = tempfile::tempdir().unwrap();
    let out = memlstm(dir.path(), &["train", "--dataset", "/no/such/passengers.csv"]);
    assert!(!out.status.success());
    let stderr = String::from_utf8(out.stderr).unwrap();
    assert_eq!(stderr.lines().count(), 1);
    assert!(stderr.starts_with("error[dataset]:"));
    assert!(stderr.contains("/no/such/passengers.csv"));
}

#[test]
fn simulate_compare_round_trip() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&memlstm(d, &["train"]));
    let stdout = ok(&memlstm(d, &["simulate"]));
    assert!(stdout.contains("3.96 ms"));

    let report = json(&d.join("simulate_report.json"));
    assert_eq!(report["total_time_ms"], 3.96);
    assert_eq!(report["cycle_time_us"], 88.0);
    assert_eq!(report["ideal"], true);
    let sw = report["software"]["rmse"].as_f64().unwrap();
    let an = report["analog"]["rmse"].as_f64().unwrap();
    assert!((sw - an).abs() < 1e-6);

    let predictions = fs::read_to_string(d.join("predictions.csv")).unwrap();
    assert_eq!(predictions.lines().count(), 46);
    assert!(predictions.starts_with("index,target,software,analog,target_denorm,software_denorm,analog_denorm\n"));
    let trace = fs::read_to_string(d.join("trace.csv")).unwrap();
    assert_eq!(trace.lines().count(), 14);

    // Emitted series parse back with the tool's own reader.
    let targets = series_from_csv(&fs::read_to_string(d.join("targets.csv")).unwrap()).unwrap();
    assert_eq!(targets.len(), 45);

    let stdout = ok(&memlstm(
        d,
        &[
            "compare",
            "--software",
            d.join("software.csv").to_str().unwrap(),
            "--analog",
            d.join("software.csv").to_str().unwrap(),
            "--targets",
            d.join("targets.csv").to_str().unwrap(),
        ],
    ));
    assert!(stdout.contains("0.1004") && stdout.contains("0.0101"));
    let cmp = json(&d.join("compare_report.json"));
    assert_eq!(cmp["max_abs_delta"], 0.0);
    assert_eq!(cmp["software"], cmp["analog"]);
    let table = fs::read_to_string(d.join("comparison.csv")).unwrap();
    assert_eq!(table.lines().count(), 46);
    assert_eq!(table.lines().next().unwrap(), "index,target,software,analog");
}

#[test]
fn simulate_monte_carlo_and_flags() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&memlstm(d, &["train"]));
    ok(&memlstm(d, &["simulate", "--trials", "4", "--sigma-rel", "0.02", "--levels", "32"]));
    let report = json(&d.join("simulate_report.json"));
    assert_eq!(report["ideal"], false);
    assert_eq!(report["memristor"]["levels"], 32);
    assert_eq!(report["monte_carlo"]["rmse"].as_array().unwrap().len(), 4);

    let out = memlstm(d, &["simulate", "--levels", "1"]);
    assert_eq!(out.status.code(), Some(2));
    let out = memlstm(d, &["simulate", "--trials", "0"]);
    assert!(String::from_utf8(out.stderr).unwrap().starts_with("error[usage]"));
}

#[test]
fn missing_weights_file() {
    let dir = tempfile::tempdir().unwrap();
    let out = memlstm(dir.path(), &["simulate"]);
    assert!(!out.status.success());
    assert!(String::from_utf8(out.stderr).unwrap().starts_with("error[weights]"));
}

#[test]
fn sweep_output_and_errors() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    ok(&memlstm(d, &["train"]));
    let stdout = ok(&memlstm(d, &["sweep", "--param", "sigma_rel", "--values", "0,0.05", "--trials", "3"]));
    let lines: Vec<&str> = stdout.lines().collect();
    assert_eq!(lines[0], "value,trials,rmse_mean,rmse_std");
    assert!(lines[1].starts_with("0,3,") && lines[1].ends_with(",0.000000000"));
    assert_eq!(fs::read_to_string(d.join("sweep.csv")).unwrap(), stdout);

    let out = memlstm(d, &["sweep", "--param", "sigma_rel", "--values", "0", "--trials", "0"]);
    assert_eq!(out.status.code(), Some(2));
    let out = memlstm(d, &["sweep", "--param", "temperature", "--values", "1"]);
    assert!(String::from_utf8(out.stderr).unwrap().starts_with("error[usage]"));
}

#[test]
fn dump_commands() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let stdout = ok(&memlstm(d, &["dump-curves"]));
    assert_eq!(stdout.lines().count(), 7);
    let sig = fs::read_to_string(d.join("sigmoid_curve.csv")).unwrap();
    assert_eq!(sig.lines().count(), 2002);
    assert_eq!(sig.lines().next().unwrap(), "v_in,v_out");
    assert!(sig.lines().any(|l| l == "0.000000,-0.050000000"));
    let mult = fs::read_to_string(d.join("multiplier_curve_vb_+1.0.csv")).unwrap();
    assert!(mult.lines().any(|l| l == "1.000000,-0.250000000"));

    ok(&memlstm(d, &["train"]));
    ok(&memlstm(d, &["dump-crossbar"]));
    let lstm = fs::read_to_string(d.join("lstm_crossbar.csv")).unwrap();
    assert_eq!(lstm.lines().count(), 1 + 6 * 16);
    assert_eq!(lstm.lines().next().unwrap(), "row,col,G_plus,G_minus");
    let dense = fs::read_to_string(d.join("dense_crossbar.csv")).unwrap();
    assert_eq!(dense.lines().count(), 1 + 5);
}

#[test]
fn config_file_and_precedence() {
    let dir = tempfile::tempdir().unwrap();
    let d = dir.path();
    let cfg = d.join("run.json");
    fs::write(&cfg, r#"{"version": "v1", "test_count": 30, "trainer": {"epochs": 50}}"#).unwrap();
    ok(&memlstm(d, &["--config", cfg.to_str().unwrap(), "train"]));
    let report = json(&d.join("train_report.json"));
    assert_eq!(report["test_rows"], 30);
    assert_eq!(report["hyperparams"]["epochs"], 50);

    fs::write(&cfg, r#"{"version": "v1", "epochs": 50}"#).unwrap();
    let out = memlstm(d, &["--config", cfg.to_str().unwrap(), "train"]);
    assert_eq!(out.status.code(), Some(3));
    assert!(String::from_utf8(out.stderr).unwrap().starts_with("error[config]"));
}
