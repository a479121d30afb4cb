//! Declarative experiment configuration and its validation.

use serde::{Deserialize, Serialize};

use crate::clock::{ClockStateSpec, MIN_CLOCK_DIM, SUPPORT_SIGMAS};
use crate::hamiltonians::InteractionProfile;
use crate::pointer::{PointerStateSpec, MIN_POINTER_DIM};
use crate::pulse::{PulseProfile, PulseShape};

/// The canned scenarios.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scenario {
    ExternalMeasurement,
    InternalMeasurement,
    UncertaintySweep,
    Disturbance,
    PerspectiveConsistency,
    Multiclock,
}

impl Scenario {
    pub const ALL: [Scenario; 6] = [
        Scenario::ExternalMeasurement,
        Scenario::InternalMeasurement,
        Scenario::UncertaintySweep,
        Scenario::Disturbance,
        Scenario::PerspectiveConsistency,
        Scenario::Multiclock,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Scenario::ExternalMeasurement => "external_measurement",
            Scenario::InternalMeasurement => "internal_measurement",
            Scenario::UncertaintySweep => "uncertainty_sweep",
            Scenario::Disturbance => "disturbance",
            Scenario::PerspectiveConsistency => "perspective_consistency",
            Scenario::Multiclock => "multiclock",
        }
    }

    pub fn description(&self) -> &'static str {
        match self {
            Scenario::ExternalMeasurement => "energy measurement clocked by an external time: flow law, variance law, pointer shift",
            Scenario::InternalMeasurement => "energy measurement clocked by clock B: external duration bounded by tau",
            Scenario::UncertaintySweep => "grid over strength and duration: lower bound on internal duration, variance trend",
            Scenario::Disturbance => "energy disturbance of the measured system under internal and external schemes",
            Scenario::PerspectiveConsistency => "history state, conditioning on clock B, metric and reciprocity checks",
            Scenario::Multiclock => "effective generators with several clocks and the gravitational control case",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Scenario::ALL.iter().copied().find(|s| s.name() == name)
    }

    /// Pointer channel written to the CSV (`exp_QE` or `exp_QI`).
    pub fn pointer_column(&self) -> &'static str {
        match self {
            Scenario::InternalMeasurement | Scenario::Disturbance => "exp_QI",
            _ => "exp_QE",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ClockConfig {
    pub dim: usize,
    pub dt: f64,
    /// Initial wavepacket centre.
    pub t0: f64,
    pub sigma: f64,
    /// Carrier angular frequency of the wavepacket (sets its mean energy).
    #[serde(default)]
    pub carrier: f64,
}

impl ClockConfig {
    pub fn state_spec(&self) -> ClockStateSpec {
        ClockStateSpec::new(self.t0, self.sigma).with_carrier(self.carrier)
    }

    pub fn last_time(&self) -> f64 {
        (self.dim.saturating_sub(1)) as f64 * self.dt
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CouplingConfig {
    /// Real symmetric matrix `V` on the system.
    pub matrix: Vec<Vec<f64>>,
    pub profile: InteractionProfile,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SystemConfig {
    /// Diagonal of `H_S`.
    pub energies: Vec<f64>,
    /// Real initial amplitudes (normalised on use).
    pub initial: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub coupling: Option<CouplingConfig>,
}

impl Default for SystemConfig {
    fn default() -> Self {
        Self { energies: vec![0.0], initial: vec![1.0], coupling: None }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PointerConfig {
    pub dim: usize,
    pub dq: f64,
    pub p_mean: f64,
    pub p_sigma: f64,
}

impl PointerConfig {
    pub fn state_spec(&self) -> PointerStateSpec {
        PointerStateSpec::new(self.p_mean, self.p_sigma)
    }

    /// Largest momentum eigenvalue of the grid (ħ = 1).
    pub fn p_max(&self) -> f64 {
        let half = (self.dim / 2) as f64;
        2.0 * std::f64::consts::PI * (half - 1.0) / (self.dim as f64 * self.dq)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseConfig {
    pub shape: PulseShape,
    pub t_start: f64,
    pub tau: f64,
    pub strength: f64,
}

impl PulseConfig {
    pub fn profile(&self) -> crate::Result<PulseProfile> {
        PulseProfile::starting_at(self.shape, self.t_start, self.tau, self.strength)
    }

    pub fn t_end(&self) -> f64 {
        self.t_start + self.tau
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    #[serde(default)]
    pub strengths: Vec<f64>,
    #[serde(default)]
    pub taus: Vec<f64>,
    #[serde(default)]
    pub p_means: Vec<f64>,
    #[serde(default)]
    pub p_sigmas: Vec<f64>,
    #[serde(default)]
    pub shapes: Vec<PulseShape>,
}

/// Tolerances each verdict is judged against.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Tolerances {
    /// Relative error of `Δ⟨T_B⟩` against `τ + K⟨P_E⟩`.
    pub flow_law: f64,
    /// Absolute deviation of the free flow rate from 1.
    pub free_flow: f64,
    /// Relative error of the variance growth against `K²Var(P_E)`.
    pub variance_law: f64,
    /// Absolute drift of `⟨H_R⟩` under the external scheme.
    pub hr_drift: f64,
    /// Relative error of pointer shifts.
    pub pointer_shift: f64,
    /// Relative slack on the lower bound `Δ⟨T_B⟩ ≥ K⟨P_E⟩`.
    pub bound_slack: f64,
    /// Relative error of the external duration against its quadrature prediction.
    pub duration_oracle: f64,
    /// Relative slack on `t_f − t_i ≤ τ`.
    pub duration_bound: f64,
    /// Pointwise relative error of the internal rate law.
    pub rate_law: f64,
    /// Pointwise error of the disturbance law, relative to its peak.
    pub disturbance_law: f64,
    /// Frobenius norm of metric identities.
    pub metric_identity: f64,
    /// Relative variation of the η-norm of conditioned states.
    pub eta_norm: f64,
    /// Relative residual of the B-perspective equation.
    pub perspective_residual: f64,
    /// Pointwise relative error of the reciprocity law.
    pub reciprocity: f64,
    /// Relative error of the crossing identity.
    pub crossing_identity: f64,
    /// Interior constraint residual for resolved dynamics.
    pub constraint: f64,
    /// Hermiticity defects expected to vanish.
    pub hermitian: f64,
    /// Norm drift of unitary evolution.
    pub norm_drift: f64,
}

impl Default for Tolerances {
    fn default() -> Self {
        Self {
            flow_law: 0.01,
            free_flow: 1e-3,
            variance_law: 0.02,
            hr_drift: 1e-9,
            pointer_shift: 0.01,
            bound_slack: 0.01,
            duration_oracle: 0.02,
            duration_bound: 1e-3,
            rate_law: 0.01,
            disturbance_law: 0.02,
            metric_identity: 1e-12,
            eta_norm: 1e-3,
            perspective_residual: 0.02,
            reciprocity: 0.02,
            crossing_identity: 0.02,
            constraint: 1e-6,
            hermitian: 1e-12,
            norm_drift: 1e-9,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IntegratorConfig {
    /// Output samples across the pulse window.
    pub samples: usize,
    /// Midpoint steps between consecutive samples.
    pub substeps: usize,
    pub krylov_tol: f64,
    pub krylov_dim: usize,
}

impl Default for IntegratorConfig {
    fn default() -> Self {
        Self { samples: 81, substeps: 2, krylov_tol: 1e-12, krylov_dim: 30 }
    }
}

impl IntegratorConfig {
    pub fn options(&self) -> crate::dynamics::IntegratorOptions {
        let mut o = crate::dynamics::IntegratorOptions::default();
        o.krylov.tol = self.krylov_tol;
        o.krylov.max_dim = self.krylov_dim;
        o
    }
}

/// Parameters of the multi-clock suite.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MultiClockConfig {
    /// Dimensions of the clocks `C_1 … C_n` (the first is the perspective clock).
    pub dims: Vec<usize>,
    pub dt: f64,
    /// Coefficient `c` of `f(T) = c·T²` evaluated on the argument clock.
    pub coupling: f64,
    /// Reading `t_s` of the perspective clock in the self-interaction case.
    pub self_time: f64,
    /// Gravitational coupling λ.
    pub lambda: f64,
    /// Evolution time for the gravitational norm-drift check.
    pub duration: f64,
}

impl Default for MultiClockConfig {
    fn default() -> Self {
        Self { dims: vec![16, 24, 32], dt: 0.25, coupling: 0.05, self_time: 1.0, lambda: 0.3, duration: 4.0 }
    }
}

/// One experiment of a configuration document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub name: String,
    pub scenario: Scenario,
    pub enabled: bool,
    /// Recorded in every report; the shipped scenarios draw no random numbers.
    pub seed: u64,
    pub clock_a: ClockConfig,
    pub clock_b: ClockConfig,
    pub system: SystemConfig,
    pub pointer: PointerConfig,
    pub pulse: PulseConfig,
    pub sweep: SweepConfig,
    pub tolerances: Tolerances,
    pub integrator: IntegratorConfig,
    pub multiclock: MultiClockConfig,
}

/// A validation finding tied to a field path such as `pointer.p_mean`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub path: String,
    pub message: String,
}

impl std::fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

impl ExperimentConfig {
    /// Scenario-specific defaults; every field of a configuration document overrides these.
    pub fn defaults_for(scenario: Scenario, name: &str) -> Self {
        let clock_a = ClockConfig { dim: 64, dt: 0.1, t0: 2.0, sigma: 0.4, carrier: 0.0 };
        let clock_b = ClockConfig { dim: 128, dt: 0.1, t0: 2.5, sigma: 0.5, carrier: 1.0 };
        let pointer = PointerConfig { dim: 64, dq: 0.5, p_mean: 2.0, p_sigma: 0.25 };
        let pulse = PulseConfig { shape: PulseShape::RaisedCosine, t_start: 0.0, tau: 1.0, strength: 0.5 };
        let mut cfg = Self {
            name: name.to_string(),
            scenario,
            enabled: true,
            seed: 0,
            clock_a,
            clock_b,
            system: SystemConfig::default(),
            pointer,
            pulse,
            sweep: SweepConfig::default(),
            tolerances: Tolerances::default(),
            integrator: IntegratorConfig::default(),
            multiclock: MultiClockConfig::default(),
        };
        match scenario {
            Scenario::ExternalMeasurement | Scenario::Multiclock => {}
            Scenario::UncertaintySweep => {
                cfg.pointer.dim = 64;
                cfg.sweep.strengths = vec![0.1, 0.3, 1.0];
                cfg.sweep.taus = vec![0.05, 0.1, 0.25, 0.5, 1.0, 2.0];
                cfg.sweep.p_sigmas = vec![0.2, 0.3, 0.4, 0.5];
            }
            Scenario::InternalMeasurement | Scenario::Disturbance => {
                cfg.clock_b = ClockConfig { dim: 256, dt: 0.025, t0: 0.6, sigma: 0.1, carrier: 2.0 };
                cfg.pointer = PointerConfig { dim: 32, dq: 0.5, p_mean: 2.0, p_sigma: 0.25 };
                cfg.pulse = PulseConfig {
                    shape: PulseShape::RaisedCosine,
                    t_start: 1.6,
                    tau: 3.0,
                    strength: 5.0,
                };
                if scenario == Scenario::InternalMeasurement {
                    cfg.sweep.p_means = vec![0.0, 1.0, 2.0, 4.0];
                } else {
                    cfg.clock_b = ClockConfig { dim: 160, dt: 0.05, t0: 1.0, sigma: 0.2, carrier: 2.0 };
                    cfg.pulse.t_start = 2.0;
                    cfg.pointer = PointerConfig { dim: 64, dq: 0.5, p_mean: 2.0, p_sigma: 0.25 };
                    cfg.system = SystemConfig { energies: vec![0.0, 0.5], initial: vec![1.0, 1.0], coupling: None };
                    cfg.pulse.strength = 0.002;
                    cfg.sweep.shapes = vec![
                        PulseShape::RaisedCosine,
                        PulseShape::GaussianTruncated { cutoff: 3.0 },
                        PulseShape::BoxcarSmoothed { edge_width: 0.5 },
                    ];
                }
            }
            Scenario::PerspectiveConsistency => {
                cfg.clock_a = ClockConfig { dim: 64, dt: 0.1, t0: 0.0, sigma: 0.4, carrier: 0.0 };
                cfg.clock_b = ClockConfig { dim: 160, dt: 0.0625, t0: 2.0, sigma: 0.25, carrier: 1.0 };
                cfg.pointer = PointerConfig { dim: 32, dq: 1.0, p_mean: 1.5, p_sigma: 0.25 };
                cfg.pulse = PulseConfig { shape: PulseShape::RaisedCosine, t_start: 2.4, tau: 1.5, strength: 0.5 };
                cfg.integrator.substeps = 4;
            }
        }
        cfg
    }

    /// Schema and invariant violations; empty means valid.
    pub fn validate(&self) -> Vec<Diagnostic> {
        let mut d = Vec::new();
        let mut push = |path: &str, message: String| d.push(Diagnostic { path: path.to_string(), message });
        if self.name.trim().is_empty() {
            push("name", "experiment name must not be empty".into());
        }
        let uses_a = matches!(self.scenario, Scenario::PerspectiveConsistency);
        let uses_b = !matches!(self.scenario, Scenario::Multiclock);
        for (label, c, used) in [("clock_a", &self.clock_a, uses_a), ("clock_b", &self.clock_b, uses_b)] {
            if !used {
                continue;
            }
            if c.dim < MIN_CLOCK_DIM {
                push(&format!("{label}.dim"), format!("clock dimension {} is below the minimum {MIN_CLOCK_DIM}", c.dim));
            }
            if !(c.dt > 0.0 && c.dt.is_finite()) {
                push(&format!("{label}.dt"), format!("spacing {} must be positive", c.dt));
            }
            // Clock A only supplies the history grid; clock B carries the wavepacket.
            if label == "clock_a" {
                continue;
            }
            if !(c.sigma >= 4.0 * c.dt * (1.0 - 1e-12)) {
                push(&format!("{label}.sigma"), format!("clock spread {} must be at least 4·dt = {}", c.sigma, 4.0 * c.dt));
            }
            let (lo, hi) = (c.t0 - SUPPORT_SIGMAS * c.sigma, c.t0 + SUPPORT_SIGMAS * c.sigma);
            if lo < -1e-12 || hi > c.last_time() + 1e-12 {
                push(&format!("{label}.t0"), format!("wavepacket support [{lo}, {hi}] leaves the grid [0, {}]", c.last_time()));
            }
        }
        let s = &self.system;
        if s.energies.is_empty() {
            push("system.energies", "system needs at least one level".into());
        }
        if s.initial.len() != s.energies.len() {
            push("system.initial", format!("expected {} amplitudes, found {}", s.energies.len(), s.initial.len()));
        } else if s.initial.iter().map(|a| a * a).sum::<f64>() <= 0.0 {
            push("system.initial", "initial amplitudes must not all vanish".into());
        }
        if let Some(c) = &s.coupling {
            let n = s.energies.len();
            if c.matrix.len() != n || c.matrix.iter().any(|r| r.len() != n) {
                push("system.coupling.matrix", format!("coupling must be {n}×{n}"));
            } else if (0..n).any(|i| (0..n).any(|j| (c.matrix[i][j] - c.matrix[j][i]).abs() > 1e-12)) {
                push("system.coupling.matrix", "coupling matrix must be symmetric (Hermitian)".into());
            }
        }
        if !matches!(self.scenario, Scenario::Multiclock) {
            let p = &self.pointer;
            if p.dim < MIN_POINTER_DIM {
                push("pointer.dim", format!("pointer dimension {} is below the minimum {MIN_POINTER_DIM}", p.dim));
            }
            if !(p.dq > 0.0 && p.dq.is_finite()) {
                push("pointer.dq", format!("spacing {} must be positive", p.dq));
            }
            let zero_baseline = self.scenario == Scenario::InternalMeasurement;
            let mut means = vec![p.p_mean];
            if zero_baseline {
                means.extend(self.sweep.p_means.iter().copied().filter(|m| *m != 0.0));
            }
            for (k, m) in means.iter().enumerate() {
                let path = if k == 0 { "pointer.p_mean".to_string() } else { format!("sweep.p_means[{}]", k - 1) };
                if let Err(e) = PointerStateSpec::new(*m, p.p_sigma).validate() {
                    push(&path, format!("positivity regime violated: {e}"));
                } else if p.dim >= MIN_POINTER_DIM && p.dq > 0.0 && m + 4.0 * p.p_sigma > p.p_max() {
                    push(&path, format!("momentum support {} exceeds the pointer grid maximum {}", m + 4.0 * p.p_sigma, p.p_max()));
                }
            }
            for (k, sg) in self.sweep.p_sigmas.iter().enumerate() {
                if PointerStateSpec::new(p.p_mean, *sg).validate().is_err() {
                    push(&format!("sweep.p_sigmas[{k}]"), format!("positivity regime violated: p_mean {} < 4·{sg}", p.p_mean));
                }
            }
            if let Err(e) = self.pulse.profile() {
                push("pulse", e.to_string());
            }
            let pulse_clock = match self.scenario {
                Scenario::PerspectiveConsistency => Some(("clock_a", &self.clock_a)),
                Scenario::InternalMeasurement | Scenario::Disturbance => Some(("clock_b", &self.clock_b)),
                _ => None,
            };
            if let Some((label, c)) = pulse_clock {
                if self.pulse.t_start < 0.0 || self.pulse.t_end() > c.last_time() {
                    push(
                        "pulse.tau",
                        format!(
                            "pulse support [{}, {}] exceeds the {label} grid span [0, {}]",
                            self.pulse.t_start,
                            self.pulse.t_end(),
                            c.last_time()
                        ),
                    );
                }
            }
        }
        if matches!(self.scenario, Scenario::UncertaintySweep) {
            if self.sweep.strengths.is_empty() {
                push("sweep.strengths", "sweep grid must not be empty".into());
            }
            if self.sweep.taus.is_empty() {
                push("sweep.taus", "sweep grid must not be empty".into());
            }
            for (k, t) in self.sweep.taus.iter().enumerate() {
                if !(*t > 0.0) {
                    push(&format!("sweep.taus[{k}]"), format!("duration {t} must be positive"));
                }
            }
            for (k, s) in self.sweep.strengths.iter().enumerate() {
                if !(*s >= 0.0) {
                    push(&format!("sweep.strengths[{k}]"), format!("strength {s} must be non-negative"));
                }
            }
        }
        if matches!(self.scenario, Scenario::InternalMeasurement) {
            for (k, m) in self.sweep.p_means.iter().enumerate() {
                if *m < 0.0 {
                    push(&format!("sweep.p_means[{k}]"), format!("momentum {m} must be non-negative"));
                }
            }
        }
        if matches!(self.scenario, Scenario::Disturbance) {
            if let Ok(p) = self.pulse.profile() {
                if !p.is_differentiable() {
                    push("pulse.shape", "the disturbance law needs a differentiable pulse".into());
                }
            }
        }
        if matches!(self.scenario, Scenario::Multiclock) {
            let m = &self.multiclock;
            if !(2..=3).contains(&m.dims.len()) {
                push("multiclock.dims", format!("expected 2 or 3 clocks, found {}", m.dims.len()));
            }
            for (k, n) in m.dims.iter().enumerate() {
                if *n < MIN_CLOCK_DIM {
                    push(&format!("multiclock.dims[{k}]"), format!("clock dimension {n} is below the minimum {MIN_CLOCK_DIM}"));
                }
            }
            if !(m.dt > 0.0) {
                push("multiclock.dt", "spacing must be positive".into());
            }
            if m.coupling < 0.0 {
                push("multiclock.coupling", "f must be non-negative, so the coefficient must be ≥ 0".into());
            }
            if !(m.lambda >= 0.0) {
                push("multiclock.lambda", "gravitational coupling must be non-negative".into());
            }
        }
        let i = &self.integrator;
        if i.samples < 16 {
            push("integrator.samples", format!("at least 16 samples are needed, found {}", i.samples));
        }
        if i.substeps == 0 {
            push("integrator.substeps", "at least one step per sample is needed".into());
        }
        if !(i.krylov_tol > 0.0) {
            push("integrator.krylov_tol", "tolerance must be positive".into());
        }
        if i.krylov_dim < 2 {
            push("integrator.krylov_dim", "Krylov dimension must be at least 2".into());
        }
        d
    }
}
