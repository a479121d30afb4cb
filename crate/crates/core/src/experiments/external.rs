//! Energy measurement clocked by an external time `t`.

use super::config::ExperimentConfig;
use super::report::{CheckMode, ExperimentReport, SeriesRow, Verdict};
use super::setup::{self, Pointer, SpectralBlocks};
use crate::clock::ClockModel;
use crate::dynamics::{flow_rate, Eigenbasis};
use crate::hamiltonians::{build_hr, hr_observable, SystemSpec};
use crate::pulse::PulseProfile;
use crate::structured::StructuredOperator;
use crate::tensor::{mean_and_variance, mean_value, StateVector};
use crate::Result;

/// Measured quantities of one external run.
#[derive(Clone, Debug)]
pub(crate) struct ExternalOutcome {
    pub rows: Vec<SeriesRow>,
    pub strength: f64,
    pub p_mean: f64,
    pub p_var: f64,
    pub hr_mean: f64,
    /// `⟨T_B⟩(t_end) − ⟨T_B⟩(t_start)`.
    pub duration: f64,
    pub var_growth: f64,
    pub pointer_shift: f64,
    pub hr_drift: f64,
    pub pointer_leakage: f64,
    pub clock_edge: f64,
    pub clock_last: f64,
}

pub(crate) struct ExternalParams<'a> {
    pub clock_b: &'a ClockModel,
    pub psi_b: &'a StateVector,
    pub system: &'a SystemSpec,
    pub psi_s: &'a StateVector,
    pub pointer: &'a Pointer,
    pub pulse: &'a PulseProfile,
}

pub(crate) fn external_run(cfg: &ExperimentConfig, p: &ExternalParams<'_>) -> Result<ExternalOutcome> {
    // H1 = H_R⊗(I + g(t)P_E) acts on each pointer momentum p as (1 + g(t)p)·H_R.
    let hr_basis = Eigenbasis::new(&build_hr(p.clock_b, p.system)?)?;
    let rest = p.psi_b.tensor(p.psi_s)?;
    let blocks = SpectralBlocks::momentum_sectors(&rest, p.pointer, true, |_| Ok(hr_basis.clone()))?;
    let (times, i0, i1) = setup::window_times(p.pulse.t_start(), p.pulse.tau(), cfg.integrator.samples);
    let states = blocks.trajectory(&times, Some(p.pulse), cfg.integrator.substeps)?.states()?;
    let psi0 = states[0].clone();
    let layout = psi0.layout().clone();

    let t_b = StructuredOperator::local(&layout, p.clock_b.time_op())?;
    let q = StructuredOperator::local(&layout, p.pointer.model.position_op())?;
    let mom = StructuredOperator::local(&layout, p.pointer.model.momentum_op())?;
    let hr = hr_observable(&layout, p.clock_b, p.system, None, &[])?;

    let mut tb = Vec::with_capacity(states.len());
    let mut rows = Vec::with_capacity(states.len());
    for (t, s) in times.iter().zip(&states) {
        let (m, v) = mean_and_variance(s, &t_b)?;
        tb.push((m, v));
        rows.push(SeriesRow {
            t: *t,
            exp_tb: Some(m),
            var_tb: Some(v),
            exp_q: Some(mean_value(s, &q)?),
            exp_hr: Some(mean_value(s, &hr)?),
            ..SeriesRow::default()
        });
    }
    let rate = flow_rate(&setup::series(&times, tb.iter().map(|x| x.0).collect())?)?;
    for (t, r) in rate.times.iter().zip(&rate.values) {
        if let Some(row) = rows.iter_mut().find(|row| row.t == *t) {
            row.flow_rate = Some(*r);
        }
    }
    let (p_mean, p_var) = mean_and_variance(&psi0, &mom)?;
    let hr_values: Vec<f64> = rows.iter().map(|r| r.exp_hr.unwrap()).collect();
    let hr_mean = hr_values[0];
    let last = rows.last().unwrap();
    let (tb_last, var_last) = *tb.last().unwrap();
    Ok(ExternalOutcome {
        strength: p.pulse.quadrature(),
        p_mean,
        p_var,
        hr_mean,
        duration: tb[i1].0 - tb[i0].0,
        var_growth: tb[i1].1 - tb[i0].1,
        pointer_shift: last.exp_q.unwrap() - rows[0].exp_q.unwrap(),
        hr_drift: hr_values.iter().map(|h| (h - hr_mean).abs()).fold(0.0, f64::max),
        pointer_leakage: p.pointer.leakage,
        clock_edge: tb_last + 5.0 * var_last.sqrt(),
        clock_last: p.clock_b.last_time(),
        rows,
    })
}

impl ExternalOutcome {
    pub fn predicted_duration(&self, tau: f64) -> f64 {
        tau + self.strength * self.p_mean
    }

    pub fn predicted_var_growth(&self) -> f64 {
        self.strength * self.strength * self.p_var
    }

    pub fn predicted_pointer_shift(&self) -> f64 {
        self.strength * self.hr_mean
    }

    pub fn warnings(&self) -> Vec<String> {
        let mut w = Vec::new();
        if self.clock_edge > self.clock_last {
            w.push(format!(
                "clock B wavepacket reaches {:.3} (5σ) beyond the grid end {:.3}",
                self.clock_edge, self.clock_last
            ));
        }
        if self.pointer_leakage > 1e-6 {
            w.push(format!("pointer state lost {:.2e} of its weight to negative momenta", self.pointer_leakage));
        }
        w
    }
}

pub(crate) fn run(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let clock_b = setup::clock("B", &cfg.clock_b)?;
    let psi_b = setup::clock_state(&clock_b, &cfg.clock_b)?;
    let (system, psi_s) = setup::system(&cfg.system)?;
    let pointer = setup::pointer("E", &cfg.pointer, cfg.pointer.p_mean, cfg.pointer.p_sigma)?;
    let pulse = cfg.pulse.profile()?;
    let params = ExternalParams { clock_b: &clock_b, psi_b: &psi_b, system: &system, psi_s: &psi_s, pointer: &pointer, pulse: &pulse };
    let out = external_run(cfg, &params)?;
    let tol = &cfg.tolerances;

    let mut report = ExperimentReport::new(&cfg.name, cfg.scenario, cfg.seed);
    report.scalar("strength", out.strength);
    report.scalar("tau", pulse.tau());
    report.scalar("exp_PE", out.p_mean);
    report.scalar("var_PE", out.p_var);
    report.scalar("exp_HR", out.hr_mean);
    report.scalar("delta_TB", out.duration);
    report.scalar("duration_internal", out.duration);
    report.scalar("delta_TB_predicted", out.predicted_duration(pulse.tau()));
    report.scalar("var_TB_growth", out.var_growth);
    report.scalar("var_TB_growth_predicted", out.predicted_var_growth());
    report.scalar("pointer_shift", out.pointer_shift);
    report.scalar("pointer_shift_predicted", out.predicted_pointer_shift());
    report.scalar("hr_drift", out.hr_drift);

    report.verdict(Verdict::relative("flow_law", out.duration, out.predicted_duration(pulse.tau()), tol.flow_law));
    report.verdict(Verdict::new(
        "internal_duration_lower_bound",
        out.duration,
        out.strength * out.p_mean,
        tol.bound_slack,
        CheckMode::AtLeast,
    ));
    if out.strength > 0.0 {
        report.verdict(Verdict::relative("variance_law", out.var_growth, out.predicted_var_growth(), tol.variance_law));
    }
    report.verdict(Verdict::relative("pointer_shift", out.pointer_shift, out.predicted_pointer_shift(), tol.pointer_shift));
    report.verdict(Verdict::small("hr_conservation", out.hr_drift, tol.hr_drift));
    report.warnings = out.warnings();
    report.series = out.rows;
    Ok(report)
}
