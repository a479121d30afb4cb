//! External measurements over a grid of strengths, durations and pointer spreads.

use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::external::{external_run, ExternalOutcome, ExternalParams};
use super::report::{CheckMode, ExperimentReport, SweepPoint, Verdict};
use super::setup;
use crate::pulse::PulseProfile;
use crate::Result;

pub(crate) fn run(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let tol = &cfg.tolerances;
    let clock_b = setup::clock("B", &cfg.clock_b)?;
    let psi_b = setup::clock_state(&clock_b, &cfg.clock_b)?;
    let (system, psi_s) = setup::system(&cfg.system)?;
    let base_pointer = setup::pointer("E", &cfg.pointer, cfg.pointer.p_mean, cfg.pointer.p_sigma)?;
    let outcome = |pointer: &setup::Pointer, tau: f64, strength: f64| -> Result<ExternalOutcome> {
        let pulse = PulseProfile::starting_at(cfg.pulse.shape, cfg.pulse.t_start, tau, strength)?;
        let params = ExternalParams {
            clock_b: &clock_b,
            psi_b: &psi_b,
            system: &system,
            psi_s: &psi_s,
            pointer,
            pulse: &pulse,
        };
        external_run(cfg, &params)
    };

    let mut report = ExperimentReport::new(&cfg.name, cfg.scenario, cfg.seed);
    let grid: Vec<(f64, f64)> =
        cfg.sweep.strengths.iter().flat_map(|&k| cfg.sweep.taus.iter().map(move |&t| (k, t))).collect();
    let outcomes: Vec<Result<ExternalOutcome>> =
        grid.par_iter().map(|&(k, tau)| outcome(&base_pointer, tau, k)).collect();
    let mut by_strength: Vec<(f64, f64, f64)> = Vec::new();
    for (&(k, tau), o) in grid.iter().zip(outcomes) {
        let o = o?;
        let mut point = SweepPoint::default();
        point.parameters.insert("strength".into(), k);
        point.parameters.insert("tau".into(), tau);
        point.results.insert("delta_TB".into(), o.duration);
        point.results.insert("delta_TB_predicted".into(), o.predicted_duration(tau));
        point.results.insert("pointer_shift".into(), o.pointer_shift);
        point.results.insert("pointer_shift_predicted".into(), o.predicted_pointer_shift());
        report.sweep.push(point);
        report.verdict(Verdict::relative(format!("flow_law[K={k},tau={tau}]"), o.duration, o.predicted_duration(tau), tol.flow_law));
        report.warnings.extend(o.warnings());
        match by_strength.iter_mut().find(|e| e.0 == k) {
            Some(e) => e.1 = e.1.min(o.duration),
            None => by_strength.push((k, o.duration, k * o.p_mean)),
        }
    }
    for (k, min_duration, bound) in by_strength {
        report.scalar(&format!("min_delta_TB[K={k}]"), min_duration);
        report.verdict(Verdict::new(format!("uncertainty_bound[K={k}]"), min_duration, bound, tol.bound_slack, CheckMode::AtLeast));
    }

    // A pulse much shorter than the clock spread still records the full K⟨H_R⟩.
    let fast_tau = cfg.sweep.taus.iter().copied().fold(f64::INFINITY, f64::min);
    let full_k = cfg.sweep.strengths.iter().copied().fold(0.0, f64::max);
    let fast = outcome(&base_pointer, fast_tau, full_k)?;
    report.scalar("fast_tau", fast_tau);
    report.scalar("fast_pointer_shift", fast.pointer_shift);
    report.verdict(Verdict::relative("fast_measurement_precision", fast.pointer_shift, fast.predicted_pointer_shift(), tol.pointer_shift));

    // Energy resolution δE = ΔQ/K with ΔQ = 1/(2ΔP) against the clock spread ΔT_B = K·ΔP.
    let mut sigmas = cfg.sweep.p_sigmas.clone();
    sigmas.sort_by(f64::total_cmp);
    sigmas.dedup();
    let spread: Vec<Result<ExternalOutcome>> = sigmas
        .par_iter()
        .map(|&s| outcome(&setup::pointer("E", &cfg.pointer, cfg.pointer.p_mean, s)?, cfg.pulse.tau, full_k))
        .collect();
    for (s, o) in sigmas.iter().zip(spread) {
        let o = o?;
        let delta_e = 1.0 / (2.0 * full_k * o.p_var.sqrt());
        let delta_tb = o.var_growth.max(0.0).sqrt();
        let mut point = SweepPoint::default();
        point.parameters.insert("strength".into(), full_k);
        point.parameters.insert("p_sigma".into(), *s);
        point.results.insert("var_PE".into(), o.p_var);
        point.results.insert("var_TB_growth".into(), o.var_growth);
        point.results.insert("var_TB_growth_predicted".into(), o.predicted_var_growth());
        point.results.insert("energy_resolution".into(), delta_e);
        point.results.insert("clock_spread_added".into(), delta_tb);
        point.results.insert("resolution_spread_product".into(), delta_e * delta_tb);
        report.sweep.push(point);
        report.verdict(Verdict::relative(format!("variance_law[p_sigma={s}]"), o.var_growth, o.predicted_var_growth(), tol.variance_law));
    }
    Ok(report)
}
