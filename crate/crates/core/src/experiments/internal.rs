//! Energy measurement clocked by clock B itself (`H3`).

use rayon::prelude::*;

use super::config::ExperimentConfig;
use super::report::{CheckMode, ExperimentReport, SeriesRow, SweepPoint, Verdict};
use super::setup::{self, Pointer, SpectralBlocks, BLOCK_WEIGHT_FLOOR};
use crate::clock::ClockModel;
use crate::dynamics::{crossing_time, flow_rate, stencil_average, Eigenbasis};
use crate::hamiltonians::{hr_observable, SystemSpec};
use crate::pulse::{as_clock_operator, PulseProfile};
use crate::structured::StructuredOperator;
use crate::tensor::{anticommutator, mean_and_variance, mean_value, OperatorMatrix, SpaceLayout, StateVector};
use crate::{Error, Result, C64};

pub(crate) struct InternalParams<'a> {
    pub clock_b: &'a ClockModel,
    pub psi_b: &'a StateVector,
    pub system: &'a SystemSpec,
    pub psi_s: &'a StateVector,
    pub pointer: &'a Pointer,
    pub pulse: &'a PulseProfile,
    pub sigma_b: f64,
    /// Evolution stops once `⟨T_B⟩ ≥ t_end + stop_sigmas·σ_B`.
    pub stop_sigmas: f64,
}

/// Samples of an `H3` evolution in the external time `t_A`, stopped once `⟨T_B⟩`
/// has moved a few clock spreads past the pulse window.
pub(crate) struct InternalEvolution {
    pub layout: SpaceLayout,
    pub times: Vec<f64>,
    pub states: Vec<StateVector>,
    pub mean_tb: Vec<f64>,
    pub var_tb: Vec<f64>,
}

pub(crate) fn internal_evolution(cfg: &ExperimentConfig, p: &InternalParams<'_>) -> Result<InternalEvolution> {
    // H3 commutes with P_I; on momentum p it is H_R + p·½{g(T_B), H_R}, time independent.
    let rest = p.psi_b.tensor(p.psi_s)?;
    let rest_layout = rest.layout().clone();
    let g = as_clock_operator(p.pulse, p.clock_b)?;
    let hr = hr_observable(&rest_layout, p.clock_b, p.system, None, &[])?.to_dense();
    let weighted = hr_observable(&rest_layout, p.clock_b, p.system, Some(&g), &[])?.to_dense();
    let blocks = match level_blocks(p, &g)? {
        Some(b) => b,
        None => SpectralBlocks::momentum_sectors(&rest, p.pointer, false, |mom| {
            Eigenbasis::new(&hr.plus(&weighted.scaled_re(mom))?)
        })?,
    };

    let h = p.pulse.tau() / (cfg.integrator.samples - 1) as f64;
    let stop = p.pulse.t_end() + p.stop_sigmas * p.sigma_b;
    let m0 = mean_value(p.psi_b, p.clock_b.time_op())?;
    // ⟨T_B⟩ advances at least at unit rate, so this many samples always suffice.
    let max_steps = ((stop - m0) / h).ceil() as usize + 4;
    let times: Vec<f64> = (0..=max_steps).map(|k| k as f64 * h).collect();
    let traj = blocks.trajectory(&times, None, 1)?;

    let mut out = InternalEvolution { layout: SpaceLayout::scalar(), times: Vec::new(), states: Vec::new(), mean_tb: Vec::new(), var_tb: Vec::new() };
    let mut t_b = None;
    for (k, t) in times.iter().enumerate() {
        let psi = traj.state(k)?;
        if t_b.is_none() {
            out.layout = psi.layout().clone();
            t_b = Some(StructuredOperator::local(&out.layout, p.clock_b.time_op())?);
        }
        let (m, v) = mean_and_variance(&psi, t_b.as_ref().unwrap())?;
        out.times.push(*t);
        out.states.push(psi);
        out.mean_tb.push(m);
        out.var_tb.push(v);
        // One extra sample past the stop level keeps the centred differences defined there.
        if k > 0 && m >= stop && out.mean_tb[k - 1] >= stop {
            return Ok(out);
        }
    }
    Err(Error::CrossingNotFound(format!("⟨T_B⟩ did not reach {stop} within {max_steps} samples")))
}

/// With a diagonal `H_S` and no coupling each system level `ε` is conserved too, and the
/// block on clock B alone is `H_B + ε + p(½{g, H_B} + g ε)`.
fn level_blocks(p: &InternalParams<'_>, g: &OperatorMatrix) -> Result<Option<SpectralBlocks>> {
    if p.system.has_interaction() || !p.system.h_s().is_diagonal() {
        return Ok(None);
    }
    let hb = p.clock_b.hamiltonian();
    let sym = anticommutator(g, hb)?.scaled_re(0.5);
    let id = OperatorMatrix::identity(p.clock_b.layout());
    let momenta = p.pointer.model.momenta();
    let p_amps = p.pointer.model.momentum_amplitudes(&p.pointer.state)?;
    let mut blocks = SpectralBlocks::new(p.clock_b.layout());
    for (s, eps) in p.system.h_s().real_diagonal().into_iter().enumerate() {
        let c_s = p.psi_s.amplitudes()[s];
        if c_s.norm_sqr() <= BLOCK_WEIGHT_FLOOR {
            continue;
        }
        let e_s = StateVector::basis(p.psi_s.layout().clone(), s)?;
        for (m, a) in p_amps.iter().enumerate() {
            if (c_s * a).norm_sqr() <= BLOCK_WEIGHT_FLOOR {
                continue;
            }
            let mut h = hb.plus(&id.scaled_re(eps))?;
            h.add_scaled(C64::new(momenta[m], 0.0), &sym.plus(&g.scaled_re(eps))?)?;
            let suffix = e_s.tensor(&p.pointer.model.momentum_eigenstate(m)?)?;
            let b = blocks.add_basis(Eigenbasis::new(&h)?);
            blocks.add_component(&p.psi_b.scaled(c_s * a), suffix, b, 0.0);
        }
    }
    Ok(Some(blocks))
}

/// Durations and rate law of one internal run.
#[derive(Clone, Debug)]
pub(crate) struct InternalOutcome {
    pub rows: Vec<SeriesRow>,
    pub t_i: f64,
    pub t_f: f64,
    pub duration: f64,
    pub sharp_prediction: f64,
    pub rate_law_deviation: f64,
    pub clock_edge: f64,
}

/// `∫ Σ_p w_p / (1 + g(s) p) ds` over the pulse window: the external duration when clock B
/// is perfectly sharp.
pub(crate) fn sharp_duration(pulse: &PulseProfile, momenta: &[f64], weights: &[f64]) -> f64 {
    pulse.integrate_over_window(|s| {
        let g = pulse.evaluate(s);
        momenta.iter().zip(weights).map(|(p, w)| w / (1.0 + g * p.max(0.0))).sum::<f64>()
    })
}

pub(crate) fn internal_run(cfg: &ExperimentConfig, p: &InternalParams<'_>) -> Result<InternalOutcome> {
    let ev = internal_evolution(cfg, p)?;
    let g = as_clock_operator(p.pulse, p.clock_b)?;
    let rate_op = StructuredOperator::zero(ev.layout.clone())
        .with_product(C64::new(1.0, 0.0), &[])?
        .with_product(C64::new(1.0, 0.0), &[&g, p.pointer.model.momentum_op()])?;
    let q = StructuredOperator::local(&ev.layout, p.pointer.model.position_op())?;
    let hr = hr_observable(&ev.layout, p.clock_b, p.system, None, &[])?;

    let mut rows = Vec::with_capacity(ev.times.len());
    let mut rate_values = Vec::with_capacity(ev.times.len());
    for (k, s) in ev.states.iter().enumerate() {
        rate_values.push(mean_value(s, &rate_op)?);
        rows.push(SeriesRow {
            t: ev.times[k],
            exp_tb: Some(ev.mean_tb[k]),
            var_tb: Some(ev.var_tb[k]),
            exp_q: Some(mean_value(s, &q)?),
            exp_hr: Some(mean_value(s, &hr)?),
            ..SeriesRow::default()
        });
    }
    let tb = setup::series(&ev.times, ev.mean_tb.clone())?;
    let lhs = flow_rate(&tb)?;
    let rhs = stencil_average(&setup::series(&ev.times, rate_values)?)?;
    let mut rate_law_deviation: f64 = 0.0;
    for (k, (l, r)) in lhs.values.iter().zip(&rhs.values).enumerate() {
        rate_law_deviation = rate_law_deviation.max((l - r).abs() / r.abs());
        rows[k + 1].flow_rate = Some(*l);
    }
    let t_i = crossing_time(&tb, p.pulse.t_start())?;
    let t_f = crossing_time(&tb, p.pulse.t_end())?;
    let momenta = p.pointer.model.momenta();
    let weights = p.pointer.model.momentum_distribution(&p.pointer.state)?;
    let last = ev.mean_tb.len() - 1;
    Ok(InternalOutcome {
        rows,
        t_i,
        t_f,
        duration: t_f - t_i,
        sharp_prediction: sharp_duration(p.pulse, &momenta, &weights),
        rate_law_deviation,
        clock_edge: ev.mean_tb[last] + 5.0 * ev.var_tb[last].sqrt(),
    })
}

pub(crate) fn run(cfg: &ExperimentConfig) -> Result<ExperimentReport> {
    let clock_b = setup::clock("B", &cfg.clock_b)?;
    let psi_b = setup::clock_state(&clock_b, &cfg.clock_b)?;
    let (system, psi_s) = setup::system(&cfg.system)?;
    let pulse = cfg.pulse.profile()?;
    let tol = &cfg.tolerances;
    let outcome_for = |p_mean: f64| -> Result<InternalOutcome> {
        let pointer = if p_mean == 0.0 {
            setup::zero_momentum_pointer("I", &cfg.pointer)?
        } else {
            setup::pointer("I", &cfg.pointer, p_mean, cfg.pointer.p_sigma)?
        };
        let params = InternalParams {
            clock_b: &clock_b,
            psi_b: &psi_b,
            system: &system,
            psi_s: &psi_s,
            pointer: &pointer,
            pulse: &pulse,
            sigma_b: cfg.clock_b.sigma,
            stop_sigmas: 3.0,
        };
        internal_run(cfg, &params)
    };

    let mut report = ExperimentReport::new(&cfg.name, cfg.scenario, cfg.seed);
    let base = outcome_for(cfg.pointer.p_mean)?;
    report.scalar("strength", pulse.quadrature());
    report.scalar("tau", pulse.tau());
    report.scalar("exp_PI", cfg.pointer.p_mean);
    report.scalar("t_i", base.t_i);
    report.scalar("t_f", base.t_f);
    report.scalar("external_duration", base.duration);
    report.scalar("external_duration_sharp", base.sharp_prediction);
    report.scalar("rate_law_deviation", base.rate_law_deviation);
    report.verdict(Verdict::new("duration_bound", base.duration, pulse.tau(), tol.duration_bound, CheckMode::AtMost));
    report.verdict(Verdict::relative("duration_oracle", base.duration, base.sharp_prediction, tol.duration_oracle));
    report.verdict(Verdict::small("rate_law", base.rate_law_deviation, tol.rate_law));
    if base.clock_edge > clock_b.last_time() {
        report.warnings.push(format!("clock B wavepacket reaches {:.3} beyond the grid end {:.3}", base.clock_edge, clock_b.last_time()));
    }

    let mut means = cfg.sweep.p_means.clone();
    means.sort_by(f64::total_cmp);
    means.dedup();
    let outcomes: Vec<Result<InternalOutcome>> = means.par_iter().map(|&m| outcome_for(m)).collect();
    let mut durations = Vec::with_capacity(means.len());
    for (m, o) in means.iter().zip(outcomes) {
        let o = o?;
        let mut point = SweepPoint::default();
        point.parameters.insert("exp_PI".into(), *m);
        point.results.insert("external_duration".into(), o.duration);
        point.results.insert("external_duration_sharp".into(), o.sharp_prediction);
        point.results.insert("rate_law_deviation".into(), o.rate_law_deviation);
        report.sweep.push(point);
        report.verdict(Verdict::new(format!("duration_bound[p={m}]"), o.duration, pulse.tau(), tol.duration_bound, CheckMode::AtMost));
        report.verdict(Verdict::relative(format!("duration_oracle[p={m}]"), o.duration, o.sharp_prediction, tol.duration_oracle));
        durations.push(o.duration);
    }
    if durations.len() >= 2 {
        let min_drop = durations.windows(2).map(|w| w[0] - w[1]).fold(f64::INFINITY, f64::min);
        report.scalar("min_duration_decrease", min_drop);
        report.verdict(Verdict::exceeds("duration_decreases_with_momentum", min_drop, 0.0));
    }
    report.series = base.rows;
    Ok(report)
}
