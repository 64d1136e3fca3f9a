use std::path::Path;
use std::process::{Command, Output};

use sha2::{Digest, Sha256};
use smlab::experiments::REGISTRY;

fn smlab(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_smlab")).args(args).output().expect("binary runs")
}

fn run_with(dir: &Path, command: &str, toml: &str, extra: &[&str]) -> Output {
    let cfg = dir.join("config.toml");
    std::fs::write(&cfg, toml).unwrap();
    let out = dir.join("out");
    let mut args = vec![command, "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()];
    args.extend_from_slice(extra);
    smlab(&args)
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_slice(&std::fs::read(path).unwrap()).unwrap()
}

const SMALL_NP: &str = "[npbound]\nn_paths = 1000\nbins = 10\nmehler_nodes = 8\nmehler_inner = 8\n";
const SMALL_FBM: &str = "[fbm]\nn_paths = 2000\nt_ladder = [16, 64]\nforests = 1\nforest_sizes = [4]\nprobe_points = 4096\n";

#[test]
fn list_shows_registry() {
    let out = smlab(&["list"]);
    assert!(out.status.success());
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.lines().count() >= 6, "{text}");
    for name in ["catalog", "stein", "chaos", "npbound", "wp", "fbm"] {
        assert!(text.contains(name));
    }

    let out = smlab(&["list", "--json"]);
    assert!(out.status.success());
    let v: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert!(v.as_array().unwrap().len() >= 6);
    assert_eq!(v[5]["outputs"][0]["columns"], serde_json::json!(["T", "m2", "m2_se", "m3", "m3_se", "m4", "m4_se"]));
}

#[test]
fn unknown_subcommand_prints_usage() {
    let out = smlab(&["frobnicate"]);
    assert!(!out.status.success());
    assert!(String::from_utf8_lossy(&out.stderr).contains("Usage"));
}

#[test]
fn help_documents_csv_columns() {
    let out = smlab(&["fbm", "--help"]);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).contains("fbm_ladder.csv: T,m2,m2_se,m3,m3_se,m4,m4_se"));
}

#[test]
fn config_errors_exit_two() {
    let dir = tempfile::tempdir().unwrap();
    assert_eq!(run_with(dir.path(), "npbound", "[npbound]\npaths = 3\n", &[]).status.code(), Some(2));
    assert_eq!(run_with(dir.path(), "npbound", "command = \"wp\"\n", &[]).status.code(), Some(2));
    assert_eq!(run_with(dir.path(), "fbm", "[fbm]\nhurst = 0.4\n", &[]).status.code(), Some(2));
    assert_eq!(run_with(dir.path(), "npbound", "[npbound]\nn_paths = 400\n", &[]).status.code(), Some(2));
    // rejected before anything is written
    assert!(!dir.path().join("out").exists());
    let missing = smlab(&["stein", "--config", "/nonexistent.toml", "--out", dir.path().to_str().unwrap()]);
    assert_eq!(missing.status.code(), Some(2));
}

#[test]
fn numeric_errors_exit_three() {
    let dir = tempfile::tempdir().unwrap();
    let toml = format!("{SMALL_FBM}probe_points = 100000000\n").replace("probe_points = 4096\n", "");
    let out = run_with(dir.path(), "fbm", &toml, &[]);
    assert_eq!(out.status.code(), Some(3), "{}", String::from_utf8_lossy(&out.stderr));
    assert!(String::from_utf8_lossy(&out.stderr).contains("numeric error"));
}

#[test]
fn failed_verdict_exits_one() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_with(dir.path(), "npbound", &format!("{SMALL_NP}[tolerances]\nnp_mehler = 0.0\n"), &[]);
    assert_eq!(out.status.code(), Some(1));
    let text = String::from_utf8(out.stdout).unwrap();
    assert!(text.contains("FAIL exact_zero/chi2_i2/mehler"), "{text}");
    assert!(text.contains("PASS exact_zero/chi2_i2/fast_path"), "{text}");
}

#[test]
fn passing_run_writes_report_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_with(dir.path(), "npbound", SMALL_NP, &["--seed", "5", "--threads", "2", "--json"]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let printed: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    let od = dir.path().join("out");
    let report = json(&od.join("report.json"));
    assert_eq!(printed, report);
    assert_eq!(report["seed"], 5);
    assert_eq!(report["threads"], 2);
    assert_eq!(report["command"], "npbound");
    assert_eq!(report["config_hash"].as_str().unwrap().len(), 64);
    assert_eq!(report["passed"], true);
    assert!(report["estimates"].as_array().unwrap().iter().any(|e| e["name"] == "np_l1/normal_i1/fast_path"));

    let manifest = json(&od.join("manifest.json"));
    assert_eq!(manifest["config_hash"], report["config_hash"]);
    let files = manifest["files"].as_array().unwrap();
    let names: Vec<&str> = files.iter().map(|f| f["file"].as_str().unwrap()).collect();
    assert_eq!(names, ["config.json", "npbound.csv", "report.json"]);
    for f in files {
        let bytes = std::fs::read(od.join(f["file"].as_str().unwrap())).unwrap();
        assert_eq!(f["sha256"].as_str().unwrap(), hex::encode(Sha256::digest(&bytes)));
    }

    let mut rd = csv::Reader::from_path(od.join("npbound.csv")).unwrap();
    let header: Vec<String> = rd.headers().unwrap().iter().map(String::from).collect();
    let documented = REGISTRY.iter().find(|e| e.command.name() == "npbound").unwrap().outputs[0].1;
    assert_eq!(header.join(","), documented);
    assert_eq!(rd.records().count(), 4);
}

#[test]
fn seed_changes_hash_and_numbers() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    run_with(a.path(), "npbound", SMALL_NP, &["--seed", "1"]);
    run_with(b.path(), "npbound", SMALL_NP, &["--seed", "2"]);
    let (ra, rb) = (json(&a.path().join("out/report.json")), json(&b.path().join("out/report.json")));
    assert_ne!(ra["config_hash"], rb["config_hash"]);
    assert_ne!(ra["estimates"], rb["estimates"]);
}

#[test]
fn fbm_ladder_csv_is_annotated() {
    let dir = tempfile::tempdir().unwrap();
    let out = run_with(dir.path(), "fbm", SMALL_FBM, &[]);
    // the covariance mass check fails by construction
    assert_eq!(out.status.code(), Some(1), "{}", String::from_utf8_lossy(&out.stderr));
    let od = dir.path().join("out");
    let mut rd = csv::Reader::from_path(od.join("fbm_ladder.csv")).unwrap();
    assert_eq!(rd.headers().unwrap().iter().collect::<Vec<_>>(), ["T", "m2", "m2_se", "m3", "m3_se", "m4", "m4_se"]);
    let ts: Vec<String> = rd.records().map(|r| r.unwrap()[0].to_string()).collect();
    assert_eq!(ts, ["16", "64"]);
    let mut rd = csv::Reader::from_path(od.join("fbm_targets.csv")).unwrap();
    let targets: Vec<f64> = rd.records().map(|r| r.unwrap()[1].parse().unwrap()).collect();
    assert_eq!(targets, [2.0, 8.0, 60.0]);
}
