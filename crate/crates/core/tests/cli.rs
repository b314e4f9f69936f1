use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde::Deserialize;

fn tbal(args: &[&str], dir: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tbal"))
        .args(args)
        .current_dir(dir)
        .env_remove("TBAL_N")
        .output()
        .unwrap()
}

#[derive(Deserialize)]
struct SummaryRow {
    tau: f64,
    finished: usize,
    #[serde(rename = "mean_T")]
    mean_t: Option<f64>,
    updates_per_link: Option<f64>,
    coupon_line: f64,
    trivial_flag: u8,
}

#[derive(Deserialize)]
struct HistRow {
    bin_lo: f64,
    bin_hi: f64,
    count: usize,
}

#[derive(Deserialize)]
struct CourseRow {
    t: f64,
    mean_unbalanced_fraction: f64,
    runs_contributing: usize,
}

#[derive(Deserialize)]
struct SweepRow {
    n: usize,
    tau: f64,
    updates_per_link: Option<f64>,
    normalized_updates: Option<f64>,
    coupon_line_normalized: Option<f64>,
    trivial_line: f64,
    discarded: usize,
}

fn rows<T: for<'de> Deserialize<'de>>(path: &Path) -> Vec<T> {
    csv::Reader::from_path(path).unwrap().deserialize().map(|r| r.unwrap()).collect()
}

#[test]
fn ensemble_outputs_parse_back() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tbal(
        &[
            "ensemble", "--n", "10", "--runs", "12", "--tau", "0.1,1", "--t-max", "5000", "--sample-interval", "10",
            "--emit-raw", "--out", "res",
        ],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let dir = tmp.path().join("res");

    let summary: Vec<SummaryRow> = rows(&dir.join("summary.csv"));
    assert_eq!(summary.len(), 2);
    assert_eq!(summary[0].tau, 0.1);
    for s in &summary {
        assert!(s.finished <= 12);
        assert!(s.mean_t.unwrap() > 0.0 && s.updates_per_link.unwrap() > 0.0);
        let h45: f64 = (1..=45).map(|k| 1.0 / k as f64).sum();
        assert!((s.coupon_line - h45).abs() < 1e-12 && s.trivial_flag <= 1);
    }

    let hist: Vec<HistRow> = rows(&dir.join("t_histogram_1.csv"));
    assert!(hist.iter().all(|b| b.bin_lo < b.bin_hi));
    let discards = fs::read_to_string(dir.join("discards.csv")).unwrap().lines().count() - 1;
    assert_eq!(hist.iter().map(|b| b.count).sum::<usize>(), 12 - discards);

    let course: Vec<CourseRow> = rows(&dir.join("timecourse_0.1.csv"));
    assert_eq!(course[0].t, 0.0);
    assert_eq!(course[0].runs_contributing, 12);
    assert!(course.iter().all(|c| (0.0..=1.0).contains(&c.mean_unbalanced_fraction)));
    assert!(course.windows(2).all(|w| (w[1].t - w[0].t - 10.0).abs() < 1e-9));

    let raw = fs::read_to_string(dir.join("runs.jsonl")).unwrap();
    let records: Vec<serde_json::Value> = raw.lines().map(|l| serde_json::from_str(l).unwrap()).collect();
    assert_eq!(records.len(), 24);
    assert!(records.iter().all(|r| r["master_seed"] == 1 && r["events"].as_u64().unwrap() > 0));

    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["config"]["n"], 10);
}

#[test]
fn sweep_outputs_parse_back() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tbal(
        &["sweep", "--n-grid", "8,12", "--runs", "6", "--tau", "0.1,1", "--t-max", "5000", "--out", "sw"],
        tmp.path(),
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let sweep: Vec<SweepRow> = rows(&tmp.path().join("sw/sweep.csv"));
    assert_eq!(sweep.len(), 4);
    for r in &sweep {
        assert!(r.n == 8 || r.n == 12);
        assert!(r.updates_per_link.is_some() && r.coupon_line_normalized.is_some() && r.discarded <= 6);
        assert!((r.trivial_line - 0.1 / r.tau).abs() < 1e-12);
    }
    assert!((sweep[0].normalized_updates.unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn run_prints_time_course() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tbal(&["run", "--n", "12", "--tau", "0.5", "--seed", "4"], tmp.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    let mut lines = text.lines();
    assert!(lines.next().unwrap().starts_with("# n=12"));
    assert_eq!(lines.next().unwrap(), "t,unbalanced,unbalanced_fraction");
    assert!(text.lines().last().unwrap().starts_with("# finished T="));
}

#[test]
fn config_layers_and_errors() {
    let tmp = tempfile::tempdir().unwrap();
    fs::write(tmp.path().join("c.toml"), "n = 40\nmu = 0.5\nruns = 3\n").unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_tbal"))
        .args(["show-config", "--config", "c.toml", "--runs", "7"])
        .current_dir(tmp.path())
        .env("TBAL_MU", "-0.25")
        .output()
        .unwrap();
    assert!(out.status.success());
    let shown: toml::Table = String::from_utf8(out.stdout).unwrap().parse().unwrap();
    assert_eq!(shown["n"].as_integer(), Some(40));
    assert_eq!(shown["mu"].as_float(), Some(-0.25));
    assert_eq!(shown["runs"].as_integer(), Some(7));

    fs::write(tmp.path().join("bad.toml"), "n = 40\nbogus = 1\n").unwrap();
    let bad = tbal(&["show-config", "--config", "bad.toml"], tmp.path());
    assert_eq!(bad.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&bad.stderr).contains("bogus"));

    assert_eq!(tbal(&["run", "--n", "2"], tmp.path()).status.code(), Some(3));
    assert_eq!(tbal(&["run", "--tau", "0"], tmp.path()).status.code(), Some(3));
    assert_eq!(tbal(&["show-config", "--config", "missing.toml"], tmp.path()).status.code(), Some(5));
    assert_eq!(tbal(&["frobnicate"], tmp.path()).status.code(), Some(2));
}

#[test]
fn validate_subcommand_passes() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tbal(&["validate"], tmp.path());
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().count() >= 5 && text.lines().all(|l| l.starts_with("PASS")));
}
