//! Verdicts and experiment reports.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::config::Scenario;

/// How `measured` is compared with `predicted`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CheckMode {
    /// `|m − p| / |p|` (plain `|m − p|` when `p = 0`).
    Relative,
    /// `|m − p|`.
    Absolute,
    /// One-sided: `max(0, p − m) / |p|`, i.e. `m ≥ p` up to relative slack.
    AtLeast,
    /// One-sided: `max(0, m − p) / |p|`, i.e. `m ≤ p` up to relative slack.
    AtMost,
    /// Strict floor: passes when `p − m < tolerance`; with zero tolerance this is `m > p`.
    Exceeds,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Verdict {
    pub name: String,
    pub measured: f64,
    pub predicted: f64,
    pub deviation: f64,
    pub tolerance: f64,
    pub mode: CheckMode,
    pub passed: bool,
}

fn relative(diff: f64, predicted: f64) -> f64 {
    if predicted == 0.0 {
        diff
    } else {
        diff / predicted.abs()
    }
}

impl Verdict {
    /// The deviation depends only on `measured`, `predicted` and `mode`, so loosening
    /// the tolerance can never turn a pass into a failure.
    pub fn new(name: impl Into<String>, measured: f64, predicted: f64, tolerance: f64, mode: CheckMode) -> Self {
        let deviation = match mode {
            CheckMode::Relative => relative((measured - predicted).abs(), predicted),
            CheckMode::Absolute => (measured - predicted).abs(),
            CheckMode::AtLeast => relative((predicted - measured).max(0.0), predicted),
            CheckMode::AtMost => relative((measured - predicted).max(0.0), predicted),
            CheckMode::Exceeds => predicted - measured,
        };
        let passed = match mode {
            CheckMode::Exceeds => deviation < tolerance,
            _ => deviation <= tolerance,
        } && measured.is_finite();
        Self { name: name.into(), measured, predicted, deviation, tolerance, mode, passed }
    }

    pub fn relative(name: impl Into<String>, measured: f64, predicted: f64, tolerance: f64) -> Self {
        Self::new(name, measured, predicted, tolerance, CheckMode::Relative)
    }

    /// `|measured| ≤ tolerance`.
    pub fn small(name: impl Into<String>, measured: f64, tolerance: f64) -> Self {
        Self::new(name, measured, 0.0, tolerance, CheckMode::Absolute)
    }

    /// `measured > floor`.
    pub fn exceeds(name: impl Into<String>, measured: f64, floor: f64) -> Self {
        Self::new(name, measured, floor, 0.0, CheckMode::Exceeds)
    }
}

/// One CSV row; absent channels are written as empty fields.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SeriesRow {
    pub t: f64,
    pub exp_tb: Option<f64>,
    pub var_tb: Option<f64>,
    pub exp_ta: Option<f64>,
    pub var_ta: Option<f64>,
    pub exp_q: Option<f64>,
    pub exp_hr: Option<f64>,
    pub eta_norm: Option<f64>,
    pub flow_rate: Option<f64>,
    pub hermiticity_defect: Option<f64>,
}

/// Scalars of one point of a parameter sweep.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub parameters: BTreeMap<String, f64>,
    pub results: BTreeMap<String, f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub name: String,
    pub scenario: Scenario,
    pub seed: u64,
    pub series: Vec<SeriesRow>,
    pub scalars: BTreeMap<String, f64>,
    pub sweep: Vec<SweepPoint>,
    pub verdicts: Vec<Verdict>,
    pub warnings: Vec<String>,
}

impl ExperimentReport {
    pub fn new(name: &str, scenario: Scenario, seed: u64) -> Self {
        Self {
            name: name.to_string(),
            scenario,
            seed,
            series: Vec::new(),
            scalars: BTreeMap::new(),
            sweep: Vec::new(),
            verdicts: Vec::new(),
            warnings: Vec::new(),
        }
    }

    pub fn passed(&self) -> bool {
        self.verdicts.iter().all(|v| v.passed)
    }

    pub fn scalar(&mut self, key: &str, value: f64) {
        self.scalars.insert(key.to_string(), value);
    }

    pub fn verdict(&mut self, v: Verdict) {
        self.verdicts.push(v);
    }

    pub fn find_verdict(&self, name: &str) -> Option<&Verdict> {
        self.verdicts.iter().find(|v| v.name == name)
    }

    pub fn csv_header(&self) -> [&'static str; 10] {
        [
            "t",
            "exp_TB",
            "var_TB",
            "exp_TA",
            "var_TA",
            self.scenario.pointer_column(),
            "exp_HR",
            "eta_norm",
            "flow_rate",
            "hermiticity_defect",
        ]
    }

    /// Rows as strings in header order; numbers use the shortest round-trip representation.
    pub fn csv_records(&self) -> Vec<[String; 10]> {
        fn cell(x: Option<f64>) -> String {
            x.map(|v| format!("{v:e}")).unwrap_or_default()
        }
        self.series
            .iter()
            .map(|r| {
                [
                    format!("{:e}", r.t),
                    cell(r.exp_tb),
                    cell(r.var_tb),
                    cell(r.exp_ta),
                    cell(r.var_ta),
                    cell(r.exp_q),
                    cell(r.exp_hr),
                    cell(r.eta_norm),
                    cell(r.flow_rate),
                    cell(r.hermiticity_defect),
                ]
            })
            .collect()
    }
}
