//! CSV series, JSON summary and the run manifest.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use relclock::experiments::{ExperimentConfig, ExperimentReport, SweepPoint, Verdict};
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Outcome of one configured experiment.
#[derive(Clone, Debug, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Passed,
    Failed,
    Error,
    Skipped,
}

#[derive(Clone, Debug, Serialize)]
pub struct ExperimentSummary {
    pub name: String,
    pub scenario: String,
    pub seed: u64,
    pub status: Status,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    pub scalars: BTreeMap<String, f64>,
    pub verdicts: Vec<Verdict>,
    pub warnings: Vec<String>,
    pub sweep: Vec<SweepPoint>,
}

impl ExperimentSummary {
    pub fn from_report(cfg: &ExperimentConfig, report: ExperimentReport) -> Self {
        let status = if report.passed() { Status::Passed } else { Status::Failed };
        Self {
            name: cfg.name.clone(),
            scenario: cfg.scenario.name().to_string(),
            seed: cfg.seed,
            status,
            error: None,
            scalars: report.scalars,
            verdicts: report.verdicts,
            warnings: report.warnings,
            sweep: report.sweep,
        }
    }

    pub fn without_report(cfg: &ExperimentConfig, status: Status, error: Option<String>) -> Self {
        Self {
            name: cfg.name.clone(),
            scenario: cfg.scenario.name().to_string(),
            seed: cfg.seed,
            status,
            error,
            scalars: BTreeMap::new(),
            verdicts: Vec::new(),
            warnings: Vec::new(),
            sweep: Vec::new(),
        }
    }

    /// Skipped experiments count as passing.
    pub fn ok(&self) -> bool {
        matches!(self.status, Status::Passed | Status::Skipped)
    }
}

#[derive(Serialize)]
struct Summary<'a> {
    version: &'static str,
    passed: bool,
    experiments: &'a [ExperimentSummary],
}

#[derive(Serialize)]
pub struct Manifest<'a> {
    pub config_path: String,
    /// SHA-256 of the compact, key-sorted JSON encoding of `resolved_config`.
    pub config_hash: String,
    pub resolved_config: &'a [ExperimentConfig],
    pub output_dir: String,
    pub version: &'static str,
    pub runtime_seconds: f64,
    pub verdicts: BTreeMap<String, BTreeMap<String, bool>>,
}

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn config_hash(resolved: &[ExperimentConfig]) -> String {
    // Going through `Value` sorts object keys, so the hash can be recomputed from the manifest.
    let canonical = serde_json::to_value(resolved).expect("configs serialise");
    let text = serde_json::to_string(&canonical).expect("values serialise");
    format!("{:x}", Sha256::digest(text.as_bytes()))
}

pub fn csv_path(dir: &Path, name: &str) -> PathBuf {
    dir.join(format!("{name}.csv"))
}

pub fn write_csv(path: &Path, report: &ExperimentReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path).with_context(|| format!("cannot create {}", path.display()))?;
    w.write_record(report.csv_header())?;
    for row in report.csv_records() {
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)?;
    std::fs::write(path, text + "\n").with_context(|| format!("cannot write {}", path.display()))
}

pub fn write_summary(dir: &Path, experiments: &[ExperimentSummary]) -> Result<()> {
    let summary = Summary { version: VERSION, passed: experiments.iter().all(|e| e.ok()), experiments };
    write_json(&dir.join("summary.json"), &summary)
}

pub fn write_manifest(dir: &Path, manifest: &Manifest<'_>) -> Result<()> {
    write_json(&dir.join("manifest.json"), manifest)
}

pub fn verdict_table(experiments: &[ExperimentSummary]) -> BTreeMap<String, BTreeMap<String, bool>> {
    experiments
        .iter()
        .map(|e| (e.name.clone(), e.verdicts.iter().map(|v| (v.name.clone(), v.passed)).collect()))
        .collect()
}
