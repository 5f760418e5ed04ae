use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use serde_json::Value;
use tempfile::TempDir;

fn tcvf(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tcvf")).args(args).output().expect("binary runs")
}

fn ok(args: &[&str]) -> Value {
    let out = tcvf(args);
    assert!(
        out.status.success(),
        "{args:?} failed: {}",
        String::from_utf8_lossy(&out.stderr)
    );
    serde_json::from_slice(&out.stdout).expect("stdout is JSON")
}

fn path(dir: &TempDir, name: &str) -> PathBuf {
    dir.path().join(name)
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn size_equal_to_alphabet_gives_single_letters() {
    let dir = TempDir::new().unwrap();
    let out = path(&dir, "d.txt");
    let stats = ok(&["build-dict", "--model", "ternary", "--M", "3", "--out", s(&out)]);
    assert_eq!(stats["size"], 3);
    let text = std::fs::read_to_string(&out).unwrap();
    assert_eq!(text.lines().skip(1).collect::<Vec<_>>(), ["0", "1", "2"]);
}

#[test]
fn rebuild_is_byte_identical() {
    let dir = TempDir::new().unwrap();
    let a = path(&dir, "a.txt");
    let b = path(&dir, "b.txt");
    ok(&["build-dict", "--model", "ternary", "--M", "200", "--out", s(&a)]);
    ok(&["build-dict", "--model", "ternary", "--M", "200", "--out", s(&b)]);
    assert_eq!(std::fs::read(&a).unwrap(), std::fs::read(&b).unwrap());
    let stats_a = std::fs::read(path(&dir, "a.txt.stats.json")).unwrap();
    let stats_b = std::fs::read(path(&dir, "b.txt.stats.json")).unwrap();
    assert_eq!(stats_a, stats_b);
}

#[test]
fn histogram_sums_to_size() {
    let dir = TempDir::new().unwrap();
    let out = path(&dir, "d.txt");
    for model in ["bernoulli", "ternary"] {
        let stats = ok(&["build-dict", "--model", model, "--M", "64", "--out", s(&out)]);
        let total: u64 = stats["histogram"].as_object().unwrap().values().map(|v| v.as_u64().unwrap()).sum();
        assert_eq!(total, stats["size"].as_u64().unwrap());
        assert!(stats["size"].as_u64().unwrap() <= 64);
    }
}

#[test]
fn fixed_gamma_build() {
    let dir = TempDir::new().unwrap();
    let out = path(&dir, "d.txt");
    let stats = ok(&["build-dict", "--model", "bernoulli", "--M", "4096", "--gamma", "6", "--out", s(&out)]);
    assert_eq!(stats["gamma"], 6.0);
    assert!(stats["size"].as_u64().unwrap() <= 4096);
}

#[test]
fn encode_then_decode_round_trips() {
    let dir = TempDir::new().unwrap();
    let dict = path(&dir, "d.txt");
    ok(&["build-dict", "--model", "ternary", "--M", "100", "--out", s(&dict)]);
    let letters = "0 1 2 2 1 0 0 0 1 2 1 1 0 2 2 2 0 1 0 1";
    let input = path(&dir, "in.txt");
    std::fs::write(&input, letters).unwrap();
    let enc = ok(&["encode", "--dict", s(&dict), "--input", s(&input)]);
    let bits = path(&dir, "bits.txt");
    std::fs::write(&bits, enc["bits"].as_str().unwrap()).unwrap();
    let dec = ok(&["decode", "--dict", s(&dict), "--input", s(&bits)]);
    let mut decoded: Vec<u64> = dec["letters"].as_array().unwrap().iter().map(|v| v.as_u64().unwrap()).collect();
    decoded.extend(enc["remainder"].as_array().unwrap().iter().map(|v| v.as_u64().unwrap()));
    let expected: Vec<u64> = letters.split(' ').map(|t| t.parse().unwrap()).collect();
    assert_eq!(decoded, expected);
}

fn sweep_args<'a>(out: &'a str, extra: &[&'a str]) -> Vec<&'a str> {
    let mut args = vec!["sweep", "--model", "bernoulli", "--out", out];
    args.extend_from_slice(extra);
    args
}

#[test]
fn single_point_sweep_has_one_row() {
    let dir = TempDir::new().unwrap();
    let out = s(dir.path()).to_string();
    ok(&sweep_args(&out, &["--theta", "0.5", "--M", "256", "--eps", "0.1"]));
    let text = std::fs::read_to_string(dir.path().join("sweep.csv")).unwrap();
    assert_eq!(text.lines().count(), 2);
}

fn read_csv(path: &Path) -> (Vec<String>, Vec<Vec<String>>) {
    let mut reader = csv::Reader::from_path(path).unwrap();
    let header = reader.headers().unwrap().iter().map(String::from).collect();
    let rows = reader.records().map(|r| r.unwrap().iter().map(String::from).collect()).collect();
    (header, rows)
}

#[test]
fn sweep_rows_cover_the_grid_and_residuals_recompute() {
    let dir = TempDir::new().unwrap();
    let out = s(dir.path()).to_string();
    let summary = ok(&sweep_args(
        &out,
        &["--theta", "-1", "--theta", "0.5", "--M", "64,256,1024", "--eps", "0.05,0.2"],
    ));
    assert_eq!(summary["rows_total"], 12);
    let (header, rows) = read_csv(&dir.path().join("sweep.csv"));
    assert_eq!(rows.len(), 2 * 3 * 2);
    let col = |name: &str| header.iter().position(|h| h == name).unwrap();
    for row in &rows {
        let f = |name: &str| row[col(name)].parse::<f64>().unwrap();
        let log2_m = f("M").log2();
        let rate = f("exact_rate");
        let residual = rate - f("predicted_first") - f("predicted_second");
        assert!((residual - f("residual")).abs() < 1e-9);
        let scaled = residual * log2_m / log2_m.log2();
        assert!((scaled - f("residual_scaled")).abs() < 1e-9);
    }
}

#[test]
fn sweep_resumes_to_identical_file() {
    let dir = TempDir::new().unwrap();
    let out = s(dir.path()).to_string();
    let extra = ["--theta", "-2", "--theta", "1", "--M", "128,512", "--eps", "0.1,0.3", "--mc", "--trials", "2000", "--seed", "7"];
    ok(&sweep_args(&out, &extra));
    let csv = dir.path().join("sweep.csv");
    let full = std::fs::read_to_string(&csv).unwrap();

    let again = ok(&sweep_args(&out, &extra));
    assert_eq!(again["rows_computed"], 0);
    assert_eq!(std::fs::read_to_string(&csv).unwrap(), full);

    let lines: Vec<&str> = full.lines().collect();
    std::fs::write(&csv, lines[..4].join("\n") + "\n").unwrap();
    let resumed = ok(&sweep_args(&out, &extra));
    assert_eq!(resumed["rows_computed"], 5);
    assert_eq!(std::fs::read_to_string(&csv).unwrap(), full);
}

#[test]
fn sweep_from_config_file_matches_flags() {
    let dir = TempDir::new().unwrap();
    let cfg = path(&dir, "cfg.json");
    let from_cfg = path(&dir, "a");
    std::fs::write(
        &cfg,
        format!(
            r#"{{"model": "bernoulli", "M": [256], "eps": [0.1], "theta": [[0.3]], "out": {:?}}}"#,
            s(&from_cfg)
        ),
    )
    .unwrap();
    ok(&["sweep", "--config", s(&cfg)]);
    let from_flags = path(&dir, "b");
    ok(&sweep_args(s(&from_flags), &["--theta", "0.3", "--M", "256", "--eps", "0.1"]));
    assert_eq!(
        std::fs::read(from_cfg.join("sweep.csv")).unwrap(),
        std::fs::read(from_flags.join("sweep.csv")).unwrap()
    );
}

#[test]
fn converse_check_passes_for_tunstall_and_full_depth() {
    let dir = TempDir::new().unwrap();
    let tun = path(&dir, "t.txt");
    ok(&["tunstall", "--model", "bernoulli", "--M", "3", "--theta", "0.5", "--out", s(&tun)]);
    let report = ok(&["converse-check", "--dict", s(&tun), "--n", "2"]);
    assert_eq!(report[0]["passed"], true);
    assert_eq!(report[0]["inputs_checked"], 4);

    let full = path(&dir, "full.txt");
    ok(&["build-dict", "--model", "bernoulli", "--M", "2", "--out", s(&full)]);
    let report = ok(&["converse-check", "--dict", s(&full), "--n", "1,2,3,4"]);
    assert!(report.as_array().unwrap().iter().all(|r| r["passed"] == true));

    let report = ok(&["converse-check", "--model", "ternary", "--M", "300", "--n", "1,3,6"]);
    assert!(report.as_array().unwrap().iter().all(|r| r["passed"] == true));
}

#[test]
fn corrupted_dictionary_is_rejected() {
    let dir = TempDir::new().unwrap();
    let dict = path(&dir, "d.txt");
    ok(&["build-dict", "--model", "ternary", "--M", "50", "--out", s(&dict)]);
    let text = std::fs::read_to_string(&dict).unwrap();
    let mut lines: Vec<&str> = text.lines().collect();
    lines.pop();
    std::fs::write(&dict, lines.join("\n") + "\n").unwrap();
    let out = tcvf(&["converse-check", "--dict", s(&dict), "--n", "2"]);
    assert!(!out.status.success());
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "malformed_dictionary");
}

#[test]
fn errors_are_reported_as_json() {
    let out = tcvf(&["build-dict", "--model", "bernoulli", "--M", "1", "--out", "/nonexistent/x"]);
    assert!(!out.status.success());
    let err: Value = serde_json::from_slice(&out.stderr).unwrap();
    assert_eq!(err["error"], "dictionary_too_small");
    let out = tcvf(&["evaluate", "--model", "bernoulli", "--M", "64", "--eps", "1.5"]);
    assert!(!out.status.success());
}

#[test]
fn evaluate_reports_both_modes_and_prediction() {
    let report = ok(&["evaluate", "--model", "bernoulli", "--M", "1024", "--eps", "0.1", "--theta", "-1"]);
    let point = &report[0];
    assert!(point["exact"]["rate"].as_f64().unwrap() > 0.0);
    assert!(point["mc"].is_null());
    assert!(point["prediction"]["iterative"].is_null());

    let report = ok(&[
        "evaluate", "--model", "bernoulli", "--M", "1024", "--eps", "0.1", "--theta", "-1", "--mc", "--trials",
        "20000", "--iterative",
    ]);
    let point = &report[0];
    assert!(point["exact"].is_null());
    assert!(point["mc"]["ci_halfwidth"].as_f64().unwrap() >= 0.0);
    assert!(point["prediction"]["iterative"]["rate"].as_f64().unwrap() > 0.0);
}

#[test]
fn normality_reports_each_length() {
    let report = ok(&["normality", "--model", "bernoulli", "--theta", "1", "--length", "10,40"]);
    let rows = report.as_array().unwrap();
    assert_eq!(rows.len(), 2);
    assert!(rows.iter().all(|r| r["exact"] == true && r["deviation"].as_f64().unwrap() < 0.5));
}

#[test]
fn grid_and_convention_flags_take_effect() {
    let dir = TempDir::new().unwrap();
    let out = path(&dir, "d.txt");
    ok(&["build-dict", "--model", "ternary", "--M", "64", "--W", "3/2", "--origin", "1/3", "--out", s(&out)]);
    let text = std::fs::read_to_string(&out).unwrap();
    let header: Value = serde_json::from_str(text.lines().next().unwrap()).unwrap();
    assert_eq!(header["grid"]["W"], "3/2");
    assert_eq!(header["grid"]["origin"][0], "1/3");

    let args = ["evaluate", "--dict", s(&out), "--eps", "0.2", "--theta", "0.1"];
    let target = ok(&args);
    let mut with_width = args.to_vec();
    with_width.extend(["--rate-convention", "codeword-width"]);
    let width = ok(&with_width);
    let size = header["size"].as_f64().unwrap();
    let ratio = width[0]["exact"]["rate"].as_f64().unwrap() / target[0]["exact"]["rate"].as_f64().unwrap();
    assert!((ratio - size.log2().ceil() / 64f64.log2()).abs() < 1e-12);
}
