//! Report assembly and artifact writing.

use std::fmt;
use std::fs;
use std::path::Path;
use std::time::Instant;

use anyhow::Context;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::{Command, ExperimentConfig};
use crate::experiments::{self, NamedEstimate, Outcome, Table, Verdict};

pub const TOOL: &str = "smlab";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub tool: String,
    pub version: String,
    pub command: Command,
    pub config_hash: String,
    pub seed: u64,
    pub threads: usize,
    pub wall_time_s: f64,
    pub passed: bool,
    pub estimates: Vec<NamedEstimate>,
    pub verdicts: Vec<Verdict>,
    pub artifacts: Vec<String>,
}

/// The part of a report that must not change between replays.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Numerics<'a> {
    pub config_hash: &'a str,
    pub seed: u64,
    pub estimates: Vec<(&'a str, u64, u64)>,
    pub verdicts: &'a [Verdict],
}

impl Report {
    /// Estimates as raw bit patterns, for bitwise comparison.
    pub fn numerics(&self) -> Numerics<'_> {
        Numerics {
            config_hash: &self.config_hash,
            seed: self.seed,
            estimates: self.estimates.iter().map(|e| (e.name.as_str(), e.value.to_bits(), e.stderr.to_bits())).collect(),
            verdicts: &self.verdicts,
        }
    }

    pub fn failures(&self) -> impl Iterator<Item = &Verdict> {
        self.verdicts.iter().filter(|v| !v.passed)
    }
}

/// Failure classes mapped onto the exit-code contract.
#[derive(Debug)]
pub enum RunError {
    Config(anyhow::Error),
    Numeric(anyhow::Error),
    Output(anyhow::Error),
}

impl RunError {
    pub fn exit_code(&self) -> u8 {
        match self {
            RunError::Config(_) | RunError::Output(_) => 2,
            RunError::Numeric(_) => 3,
        }
    }
}

impl fmt::Display for RunError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let (kind, e) = match self {
            RunError::Config(e) => ("config error", e),
            RunError::Numeric(e) => ("numeric error", e),
            RunError::Output(e) => ("output error", e),
        };
        write!(f, "{kind}: {e:#}")
    }
}

impl std::error::Error for RunError {}

/// Validates, runs and assembles the report without touching the disk.
pub fn execute(command: Command, config: &ExperimentConfig) -> Result<(Report, Outcome), RunError> {
    config.validate(command).map_err(RunError::Config)?;
    let start = Instant::now();
    let outcome = experiments::run(command, config).with_context(|| format!("{} pipeline", command.name())).map_err(RunError::Numeric)?;
    let report = Report {
        tool: TOOL.into(),
        version: VERSION.into(),
        command,
        config_hash: config.hash(),
        seed: config.seed,
        threads: rayon::current_num_threads(),
        wall_time_s: start.elapsed().as_secs_f64(),
        passed: outcome.passed(),
        estimates: outcome.estimates.clone(),
        verdicts: outcome.verdicts.clone(),
        artifacts: outcome.tables.iter().map(|t| t.file.clone()).collect(),
    };
    Ok((report, outcome))
}

fn write_csv(path: &Path, table: &Table) -> anyhow::Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(&table.header)?;
    for row in &table.rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub file: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: Command,
    pub config_hash: String,
    pub seed: u64,
    pub files: Vec<ManifestEntry>,
}

/// Writes `config.json`, the CSV tables, `report.json` and `manifest.json`
/// into `dir`.
pub fn write_artifacts(dir: &Path, config: &ExperimentConfig, report: &Report, outcome: &Outcome) -> anyhow::Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut files = vec!["config.json".to_string()];
    fs::write(dir.join("config.json"), serde_json::to_vec_pretty(config)?)?;
    for t in &outcome.tables {
        write_csv(&dir.join(&t.file), t).with_context(|| format!("writing {}", t.file))?;
        files.push(t.file.clone());
    }
    fs::write(dir.join("report.json"), serde_json::to_vec_pretty(report)?)?;
    files.push("report.json".into());
    let files = files
        .into_iter()
        .map(|file| {
            let bytes = fs::read(dir.join(&file))?;
            Ok(ManifestEntry { sha256: hex::encode(Sha256::digest(&bytes)), bytes: bytes.len() as u64, file })
        })
        .collect::<anyhow::Result<Vec<_>>>()?;
    let manifest = Manifest {
        tool: TOOL.into(),
        version: VERSION.into(),
        command: report.command,
        config_hash: report.config_hash.clone(),
        seed: report.seed,
        files,
    };
    fs::write(dir.join("manifest.json"), serde_json::to_vec_pretty(&manifest)?)?;
    Ok(())
}

/// [`execute`] followed by [`write_artifacts`].
pub fn run(command: Command, config: &ExperimentConfig, out_dir: &Path) -> Result<Report, RunError> {
    let (report, outcome) = execute(command, config)?;
    write_artifacts(out_dir, config, &report, &outcome).map_err(RunError::Output)?;
    Ok(report)
}
