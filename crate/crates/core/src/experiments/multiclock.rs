//! Effective generators with several clocks, and the gravitational control case.

use std::sync::Arc;

use super::config::ExperimentConfig;
use super::report::{ExperimentReport, SeriesRow};
use super::report::Verdict;
use crate::clock::ClockModel;
use crate::dynamics::{evolve_sampled, IntegratorOptions};
use crate::eta::{eta_norm, EtaMetric};
use crate::hamiltonians::{build_gravitational_effective, build_multiclock_effective, ClockFunction, MultiClockSpec, SelfInteraction};
use crate::tensor::{hermiticity_defect, mean_and_variance, StateVector};
use crate::{Result, HBAR};

/// The basis state `|t_k⟩` at the middle of each clock's grid, as a product over `clocks`.
fn mid_grid_state(clocks: &[&ClockModel]) -> Result<StateVector> {
    let mut psi = StateVector::basis(clocks[0].layout(), clocks[0].dim() / 2)?;
    for c in &clocks[1..] {
        psi = psi.tensor(&StateVector::basis(c.layout(), c.dim() / 2)?)?;
    }
    Ok(psi)
}

pub(crate) fn run(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let m = &cfg.multiclock;
    let tol = &cfg.tolerances;
    let clocks: Vec<ClockModel> =
        m.dims.iter().enumerate().map(|(k, &d)| ClockModel::new(&format!("C{}", k + 1), d, m.dt, HBAR)).collect::<Result<_>>()?;
    let c = m.coupling;
    let f: ClockFunction = Arc::new(move |x: &[f64]| c * x[0] * x[0]);
    let mut report = ExperimentReport::new(&cfg.name, cfg.scenario, cfg.seed);

    // Perspective of C1 with f(T_{C2}): non-Hermitian, but (I + f)·H_eff is Hermitian.
    let external = MultiClockSpec { clocks: clocks.clone(), f_args: vec![1], target: 0, f: f.clone(), self_interaction: None, h_int: None };
    let h_ext = build_multiclock_effective(&external)?;
    let factor = external.redshift_factor()?;
    let defect_ext = hermiticity_defect(&h_ext);
    let defect_factored = hermiticity_defect(&factor.dot(&h_ext)?);
    report.scalar("defect_external_argument", defect_ext);
    report.scalar("defect_external_argument_factored", defect_factored);
    if c > 0.0 {
        report.verdict(Verdict::exceeds("external_argument_non_hermitian", defect_ext, 0.0));
    }
    report.verdict(Verdict::small("redshift_factorization", defect_factored, tol.hermitian));

    // I + f is a positive metric for H_eff, so its η-norm is conserved.
    let eta = EtaMetric::new(factor.clone())?;
    let refs: Vec<&ClockModel> = clocks[1..].iter().collect();
    let psi = mid_grid_state(&refs)?;
    let times: Vec<f64> = (0..cfg.integrator.samples).map(|k| m.duration * k as f64 / (cfg.integrator.samples - 1) as f64).collect();
    let opts: IntegratorOptions = cfg.integrator.options();
    let states = evolve_sampled(&psi, &h_ext, &times, cfg.integrator.substeps, &opts)?;
    let n0 = eta_norm(&states[0], &eta)?;
    let mut eta_drift: f64 = 0.0;
    for s in &states {
        eta_drift = eta_drift.max((eta_norm(s, &eta)? - n0).abs() / n0);
    }
    report.scalar("external_argument_eta_norm_drift", eta_drift);
    report.verdict(Verdict::small("external_argument_eta_norm", eta_drift, tol.norm_drift));

    // f depends on the perspective clock's own reading: the −(iħ/2)f′ term survives factoring.
    let self_spec = MultiClockSpec {
        f_args: vec![0],
        self_interaction: Some(SelfInteraction { t_s: m.self_time, f_prime: Arc::new(move |t: f64| 2.0 * c * t) }),
        ..external
    };
    let h_self = build_multiclock_effective(&self_spec)?;
    let defect_self = hermiticity_defect(&self_spec.redshift_factor()?.dot(&h_self)?);
    report.scalar("defect_self_interaction_factored", defect_self);
    if c > 0.0 && m.self_time != 0.0 {
        report.verdict(Verdict::exceeds("self_interaction_non_hermitian", defect_self, 0.0));
    }

    // Gravitational control: (I + λH_B)^{-1}H_B is a function of H_B alone.
    let clock_b = &clocks[1];
    let h_grav = build_gravitational_effective(clock_b, m.lambda)?;
    let defect_grav = hermiticity_defect(&h_grav);
    let psi_b = mid_grid_state(&[clock_b])?;
    let states = evolve_sampled(&psi_b, &h_grav, &times, cfg.integrator.substeps, &opts)?;
    let mut norm_drift: f64 = 0.0;
    for (t, s) in times.iter().zip(&states) {
        let norm = s.norm_sqr();
        norm_drift = norm_drift.max((norm - 1.0).abs());
        let (mean, var) = mean_and_variance(s, clock_b.time_op())?;
        report.series.push(SeriesRow {
            t: *t,
            exp_tb: Some(mean),
            var_tb: Some(var),
            eta_norm: Some(norm),
            hermiticity_defect: Some(defect_grav),
            ..SeriesRow::default()
        });
    }
    report.scalar("lambda", m.lambda);
    report.scalar("defect_gravitational", defect_grav);
    report.scalar("gravitational_norm_drift", norm_drift);
    report.verdict(Verdict::small("gravitational_hermitian", defect_grav, tol.hermitian));
    report.verdict(Verdict::small("gravitational_norm_drift", norm_drift, tol.norm_drift));
    Ok(report)
}
