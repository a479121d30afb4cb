//! Canned scenarios driven by [`ExperimentConfig`].

mod config;
mod disturbance;
mod external;
mod internal;
mod multiclock;
mod perspective;
mod report;
mod setup;
mod sweep;

pub use config::{
    ClockConfig, CouplingConfig, Diagnostic, ExperimentConfig, IntegratorConfig, MultiClockConfig, PointerConfig,
    PulseConfig, Scenario, SweepConfig, SystemConfig, Tolerances,
};
pub use report::{CheckMode, ExperimentReport, SeriesRow, SweepPoint, Verdict};

use crate::{Error, Result};

/// Validates and runs one experiment.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let diagnostics = cfg.validate();
    if !diagnostics.is_empty() {
        let text: Vec<String> = diagnostics.iter().map(|d| d.to_string()).collect();
        return Err(Error::InvalidParameter(text.join("; ")));
    }
    match cfg.scenario {
        Scenario::ExternalMeasurement => external::run(cfg),
        Scenario::InternalMeasurement => internal::run(cfg),
        Scenario::UncertaintySweep => sweep::run(cfg),
        Scenario::Disturbance => disturbance::run(cfg),
        Scenario::PerspectiveConsistency => perspective::run(cfg),
        Scenario::Multiclock => multiclock::run(cfg),
    }
}
