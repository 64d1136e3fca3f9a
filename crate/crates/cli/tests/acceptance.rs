//! Acceptance suite: runs every pipeline at full scale and prints one
//! PASS/FAIL line per criterion. Exits nonzero when any criterion fails.

use std::path::Path;
use std::process::{Command as Process, ExitCode};
use std::time::{Duration, Instant};

use smlab::config::{Command, ExperimentConfig};
use smlab::report::{run, Report};

struct Run {
    report: Report,
    elapsed: Duration,
}

fn pipeline(command: Command, config: &ExperimentConfig, out: &Path) -> Run {
    let start = Instant::now();
    let report = run(command, config, &out.join(command.name())).unwrap_or_else(|e| panic!("{} failed: {e}", command.name()));
    Run { report, elapsed: start.elapsed() }
}

struct Criterion {
    id: usize,
    title: &'static str,
    passed: bool,
    detail: String,
}

/// Passes when every verdict whose name starts with one of `prefixes`
/// passed and the pipelines finished within `budget`.
fn judge(id: usize, title: &'static str, runs: &[&Run], prefixes: &[&str], budget: Duration) -> Criterion {
    let elapsed: Duration = runs.iter().map(|r| r.elapsed).sum();
    let selected: Vec<_> = runs
        .iter()
        .flat_map(|r| &r.report.verdicts)
        .filter(|v| prefixes.iter().any(|p| v.name.starts_with(p)))
        .collect();
    let failed: Vec<String> = selected.iter().filter(|v| !v.passed).map(|v| format!("{} ({})", v.name, v.detail)).collect();
    let in_time = elapsed <= budget;
    let mut detail = format!("{} checks, {:.1} s of {} s", selected.len(), elapsed.as_secs_f64(), budget.as_secs());
    if !failed.is_empty() {
        detail.push_str(&format!("; failed: {}", failed.join("; ")));
    }
    Criterion { id, title, passed: !selected.is_empty() && failed.is_empty() && in_time, detail }
}

fn secs(s: u64) -> Duration {
    Duration::from_secs(s)
}

/// Replays every pipeline under a different pool size and compares numerics
/// bitwise, then replays one config three times through the binary.
fn reproducibility(config: &ExperimentConfig, first: &[(Command, &Run)], out: &Path) -> Criterion {
    let threads = if rayon::current_num_threads() == 3 { 2 } else { 3 };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    let mut mismatched = Vec::new();
    for &(command, r) in first {
        let again = pool.install(|| pipeline(command, config, &out.join("replay")));
        if again.report.numerics() != r.report.numerics() {
            mismatched.push(command.name().to_string());
        }
    }

    let cfg = out.join("small.toml");
    std::fs::write(&cfg, "[wp]\nproduct_paths = 2000\nshrinking = [8, 16]\ncontrol = [8, 16]\nladder_paths = 2000\n").unwrap();
    let reports: Vec<serde_json::Value> = [1, 2, 4]
        .iter()
        .map(|t| {
            let dir = out.join(format!("bin_{t}"));
            let status = Process::new(env!("CARGO_BIN_EXE_smlab"))
                .args(["wp", "--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap(), "--seed", "7", "--threads", &t.to_string()])
                .output()
                .expect("binary runs");
            assert!(status.status.code().is_some(), "binary killed");
            let mut v: serde_json::Value = serde_json::from_slice(&std::fs::read(dir.join("report.json")).unwrap()).unwrap();
            let o = v.as_object_mut().unwrap();
            o.remove("wall_time_s");
            o.remove("threads");
            v
        })
        .collect();
    if reports.windows(2).any(|w| w[0] != w[1]) {
        mismatched.push("binary replay".into());
    }
    Criterion {
        id: 11,
        title: "thread-count reproducibility",
        passed: mismatched.is_empty(),
        detail: if mismatched.is_empty() {
            format!("{} pipelines at {threads} threads and 3 binary replays bitwise identical", first.len())
        } else {
            format!("differs: {}", mismatched.join(", "))
        },
    }
}

fn main() -> ExitCode {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path();
    let config = ExperimentConfig::default();

    let catalog = pipeline(Command::Catalog, &config, out);
    let stein = pipeline(Command::Stein, &config, out);
    let chaos = pipeline(Command::Chaos, &config, out);
    let npbound = pipeline(Command::Npbound, &config, out);
    let wp = pipeline(Command::Wp, &config, out);
    let fbm = pipeline(Command::Fbm, &config, out);

    let mut results = vec![
        judge(1, "g* quadrature matches closed form", &[&catalog], &["gstar/"], secs(30)),
        judge(2, "density round trip", &[&catalog], &["density/"], secs(30)),
        judge(3, "Stein residuals and k1 bounds", &[&stein], &["residual/", "k1/"], secs(120)),
        judge(4, "A <= 0 and B <= 0 on full-line laws", &[&catalog], &["ab_sign/"], secs(10)),
        judge(5, "product formulas, Wiener and Wiener-Poisson", &[&chaos, &wp], &["product/"], secs(120)),
        judge(6, "exact NP-bound zeros", &[&npbound], &["exact_zero/"], secs(60)),
        judge(7, "Wiener fourth-moment ladder", &[&chaos], &["ladder/", "variance_bound/"], secs(300)),
        judge(8, "Wiener-Poisson fourth-moment theorem", &[&wp], &["shrinking/", "control/"], secs(300)),
        judge(9, "fBm chi-square moments and covariance mass", &[&fbm], &["moment/", "covariance_mass"], secs(600)),
        judge(10, "growth checker thresholds", &[&catalog], &["growth/"], secs(10)),
    ];
    let first = [
        (Command::Catalog, &catalog),
        (Command::Stein, &stein),
        (Command::Chaos, &chaos),
        (Command::Npbound, &npbound),
        (Command::Wp, &wp),
        (Command::Fbm, &fbm),
    ];
    results.push(reproducibility(&config, &first, out));

    for c in &results {
        println!("{} criterion {:>2}: {} [{}]", if c.passed { "PASS" } else { "FAIL" }, c.id, c.title, c.detail);
    }
    let failed = results.iter().filter(|c| !c.passed).count();
    println!("acceptance: {} of {} criteria passed", results.len() - failed, results.len());
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
