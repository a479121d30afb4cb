//! Metrics for pseudo-Hermitian generators: η-adjoints, η-weighted expectations,
//! ghost counting and the generalised Heisenberg check.

use crate::clock::ClockModel;
use crate::dynamics::{flow_rate, stencil_average, ExpectationSeries, Generator};
use crate::linalg;
use crate::pointer::PointerModel;
use crate::pulse::{as_clock_operator, PulseProfile};
use std::sync::OnceLock;

use crate::structured::StructuredOperator;
use crate::tensor::{hermiticity_defect, LinearMap, OperatorMatrix, SpaceLayout, StateVector, HERMITIAN_TOL};
use crate::{Error, Result, C64};

/// Eigenvalues with modulus below this are treated as zero.
pub const NEAR_ZERO: f64 = 1e-8;

/// A Hermitian, invertible metric. Held in factored form; dense matrices are built on demand.
#[derive(Clone, Debug)]
pub struct EtaMetric {
    op: StructuredOperator,
    inverse_op: StructuredOperator,
    derivative_op: Option<StructuredOperator>,
    spectrum: Vec<f64>,
    time_dependent: bool,
    dense: OnceLock<OperatorMatrix>,
    dense_inverse: OnceLock<OperatorMatrix>,
    dense_derivative: OnceLock<Option<OperatorMatrix>>,
}

fn check_spectrum(spectrum: &[f64]) -> Result<()> {
    let min_abs = spectrum.iter().map(|v| v.abs()).fold(f64::INFINITY, f64::min);
    if min_abs <= NEAR_ZERO {
        return Err(Error::Singular(format!("metric eigenvalue {min_abs:e} is not invertible")));
    }
    Ok(())
}

fn whole(op: &OperatorMatrix) -> StructuredOperator {
    StructuredOperator::zero(op.layout().clone()).with_product(C64::new(1.0, 0.0), &[op]).expect("operator covers its own layout")
}

impl EtaMetric {
    fn from_parts(
        op: StructuredOperator,
        inverse_op: StructuredOperator,
        derivative_op: Option<StructuredOperator>,
        spectrum: Vec<f64>,
    ) -> Self {
        let time_dependent = derivative_op.is_some();
        Self {
            op,
            inverse_op,
            derivative_op,
            spectrum,
            time_dependent,
            dense: OnceLock::new(),
            dense_inverse: OnceLock::new(),
            dense_derivative: OnceLock::new(),
        }
    }

    /// A static metric from a Hermitian, invertible matrix.
    pub fn new(matrix: OperatorMatrix) -> Result<Self> {
        let defect = hermiticity_defect(&matrix);
        if defect > HERMITIAN_TOL {
            return Err(Error::NotHermitian(defect));
        }
        let (spectrum, vecs) = linalg::eigh(matrix.entries());
        check_spectrum(&spectrum)?;
        let inv: Vec<f64> = spectrum.iter().map(|v| 1.0 / v).collect();
        let inverse = OperatorMatrix::new(matrix.layout().clone(), linalg::reconstruct(&vecs, &inv))?;
        let eta = Self::from_parts(whole(&matrix), whole(&inverse), None, spectrum);
        let _ = eta.dense.set(matrix);
        let _ = eta.dense_inverse.set(inverse);
        Ok(eta)
    }

    pub fn identity(layout: SpaceLayout) -> Self {
        let n = layout.total_dim();
        let id = OperatorMatrix::identity(layout);
        Self::new(id).unwrap_or_else(|_| unreachable!("identity is a valid metric, dimension {n}"))
    }

    /// Dense `η`.
    pub fn matrix(&self) -> &OperatorMatrix {
        self.dense.get_or_init(|| self.op.to_dense().hermitian_part())
    }

    /// Dense `η^{-1}`.
    pub fn inverse(&self) -> &OperatorMatrix {
        self.dense_inverse.get_or_init(|| self.inverse_op.to_dense().hermitian_part())
    }

    /// Dense `∂η/∂t`, present for time-dependent metrics.
    pub fn derivative(&self) -> Option<&OperatorMatrix> {
        self.dense_derivative.get_or_init(|| self.derivative_op.as_ref().map(|d| d.to_dense().hermitian_part())).as_ref()
    }

    pub fn structured(&self) -> &StructuredOperator {
        &self.op
    }

    /// Eigenvalues with multiplicity, ascending.
    pub fn spectrum(&self) -> &[f64] {
        &self.spectrum
    }

    pub fn is_time_dependent(&self) -> bool {
        self.time_dependent
    }

    pub fn layout(&self) -> &SpaceLayout {
        self.op.layout()
    }

    /// `η|ψ⟩`.
    pub fn apply(&self, state: &StateVector) -> Result<StateVector> {
        self.op.apply(state)
    }

    /// `‖η − I‖_F` from the spectrum.
    pub fn distance_from_identity(&self) -> f64 {
        self.spectrum.iter().map(|v| (v - 1.0).powi(2)).sum::<f64>().sqrt()
    }
}

/// `η = I + g(T_A)⊗P₊` for the external scheme.
pub fn build_eta_external(
    pulse: &PulseProfile,
    clock_a: &ClockModel,
    pointer_e: &PointerModel,
    layout: &SpaceLayout,
) -> Result<EtaMetric> {
    let g = as_clock_operator(pulse, clock_a)?;
    let ops: [&OperatorMatrix; 2] = [&g, pointer_e.momentum_op()];
    let mut spectrum = Vec::with_capacity(layout.total_dim());
    let rest = layout.total_dim() / (clock_a.dim() * pointer_e.dim());
    for gv in g.real_diagonal() {
        for p in pointer_e.momenta() {
            spectrum.extend(std::iter::repeat_n(1.0 + gv * p.max(0.0), rest));
        }
    }
    spectrum.sort_by(f64::total_cmp);
    check_spectrum(&spectrum)?;
    let mut op = StructuredOperator::zero(layout.clone());
    op.add_spectral(C64::new(1.0, 0.0), &ops, |x| 1.0 + x[0] * x[1].max(0.0))?;
    let mut inverse = StructuredOperator::zero(layout.clone());
    inverse.add_spectral(C64::new(1.0, 0.0), &ops, |x| 1.0 / (1.0 + x[0] * x[1].max(0.0)))?;
    Ok(EtaMetric::from_parts(op, inverse, None, spectrum))
}

/// `η(t_B) = I + g(t_B)P₊` on the internal pointer, with `∂η = g′(t_B)P₊`.
pub fn build_eta_internal(
    pulse: &PulseProfile,
    t_b: f64,
    pointer_i: &PointerModel,
    layout: &SpaceLayout,
) -> Result<EtaMetric> {
    let g = pulse.evaluate(t_b);
    let dg = pulse.derivative(t_b)?;
    let rest = layout.total_dim() / layout.dim_of(pointer_i.label())?;
    let mut spectrum = Vec::with_capacity(layout.total_dim());
    for p in pointer_i.momenta() {
        spectrum.extend(std::iter::repeat_n(1.0 + g * p.max(0.0), rest));
    }
    spectrum.sort_by(f64::total_cmp);
    check_spectrum(&spectrum)?;
    let local = |f: &dyn Fn(f64) -> f64| -> Result<StructuredOperator> {
        StructuredOperator::zero(layout.clone()).with_product(C64::new(1.0, 0.0), &[&pointer_i.momentum_function(f)])
    };
    let op = local(&|p| 1.0 + g * p.max(0.0))?;
    let inverse = local(&|p| 1.0 / (1.0 + g * p.max(0.0)))?;
    let derivative = local(&|p| dg * p.max(0.0))?;
    Ok(EtaMetric::from_parts(op, inverse, Some(derivative), spectrum))
}

/// `O* = η^{-1} O† η`.
pub fn pseudo_adjoint(op: &OperatorMatrix, eta: &EtaMetric) -> Result<OperatorMatrix> {
    eta.inverse().dot(&op.adjoint())?.dot(eta.matrix())
}

/// `⟨ψ|ηO|ψ⟩`.
pub fn eta_expectation<O: LinearMap + ?Sized>(state: &StateVector, op: &O, eta: &EtaMetric) -> Result<C64> {
    let o_psi = op.apply_to(state)?;
    eta.apply(state)?.inner(&o_psi)
}

/// `⟨ψ|η|ψ⟩` (real for Hermitian η, possibly negative).
pub fn eta_norm(state: &StateVector, eta: &EtaMetric) -> Result<f64> {
    Ok(eta.apply(state)?.inner(state)?.re)
}

/// `⟨ψ|ηO|ψ⟩ / ⟨ψ|η|ψ⟩`, real part.
pub fn eta_mean<O: LinearMap + ?Sized>(state: &StateVector, op: &O, eta: &EtaMetric) -> Result<f64> {
    let n = eta_norm(state, eta)?;
    if n.abs() <= NEAR_ZERO * state.norm_sqr() {
        return Err(Error::Singular("state has vanishing η-norm".into()));
    }
    Ok(eta_expectation(state, op, eta)?.re / n)
}

/// Sign census of the metric's spectrum.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct GhostCount {
    pub positive: usize,
    pub negative: usize,
    pub near_zero: usize,
}

pub fn ghost_detect(eta: &EtaMetric) -> GhostCount {
    let mut c = GhostCount { positive: 0, negative: 0, near_zero: 0 };
    for v in &eta.spectrum {
        if v.abs() <= NEAR_ZERO {
            c.near_zero += 1;
        } else if *v > 0.0 {
            c.positive += 1;
        } else {
            c.negative += 1;
        }
    }
    c
}

/// Residual of the metric balance `∂η + (i/ħ)(H†η − ηH)` (Frobenius norm).
pub fn balance_residual(h: &OperatorMatrix, eta: &EtaMetric, hbar: f64) -> Result<f64> {
    let mut r = h.adjoint().dot(eta.matrix())?.minus(&eta.matrix().dot(h)?)?.scaled(C64::new(0.0, 1.0 / hbar));
    if let Some(d) = eta.derivative() {
        r.add_scaled(C64::new(1.0, 0.0), d)?;
    }
    Ok(r.frobenius_norm())
}

#[derive(Clone, Debug)]
pub struct HeisenbergReport {
    /// Centered difference of the η-mean of `O`.
    pub lhs: ExpectationSeries,
    /// `−(i/ħ)⟨[O,H]⟩_η`, averaged over the same stencil.
    pub rhs: ExpectationSeries,
    pub max_deviation: f64,
    /// Largest `|lhs − rhs| / |rhs|`.
    pub max_relative: f64,
}

/// Compares `d⟨O⟩_η/dt` along a sampled trajectory with `−(i/ħ)⟨[O,H]⟩_η`.
pub fn heisenberg_check<G, O, E>(
    states: &[StateVector],
    times: &[f64],
    generator: &G,
    op: &O,
    eta_at: E,
    hbar: f64,
) -> Result<HeisenbergReport>
where
    G: Generator + ?Sized,
    O: LinearMap + ?Sized,
    E: Fn(f64) -> Result<EtaMetric>,
{
    if states.len() < 16 || states.len() != times.len() {
        return Err(Error::TooFewSamples(format!("Heisenberg check needs ≥ 16 matched samples, got {}", states.len())));
    }
    let mut means = Vec::with_capacity(states.len());
    let mut rates = Vec::with_capacity(states.len());
    for (psi, &t) in states.iter().zip(times) {
        let eta = eta_at(t)?;
        let h = generator.action(t);
        let n = eta_norm(psi, &eta)?;
        means.push(eta_expectation(psi, op, &eta)?.re / n);
        let o_psi = op.apply_to(psi)?;
        let h_psi = h.apply(psi)?;
        let comm = op.apply_to(&h_psi)?.minus(&h.apply(&o_psi)?)?;
        let c = eta.apply(psi)?.inner(&comm)?;
        rates.push((C64::new(0.0, -1.0 / hbar) * c).re / n);
    }
    let lhs = flow_rate(&ExpectationSeries::new(times.to_vec(), means, None)?)?;
    let rhs = stencil_average(&ExpectationSeries::new(times.to_vec(), rates, None)?)?;
    let mut max_deviation: f64 = 0.0;
    let mut max_relative: f64 = 0.0;
    for (l, r) in lhs.values.iter().zip(&rhs.values) {
        max_deviation = max_deviation.max((l - r).abs());
        max_relative = max_relative.max((l - r).abs() / r.abs().max(f64::MIN_POSITIVE));
    }
    Ok(HeisenbergReport { lhs, rhs, max_deviation, max_relative })
}
