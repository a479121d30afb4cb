//! Time evolution, history states, constraint residuals and expectation tracking.

use std::borrow::Cow;

use ndarray::{Array1, Array2};

use crate::clock::ClockModel;
use crate::linalg::{eigh, expmv_action, reconstruct, KrylovOptions};
use crate::structured::StructuredOperator;
use crate::tensor::{
    condition, hermiticity_defect, mean_and_variance, LinearMap, OperatorMatrix, SpaceLayout, StateVector,
    HERMITIAN_TOL,
};
use crate::{Error, Result, C64, HBAR};

/// A Hermitian operator held as `U diag(E) U†`.
#[derive(Clone, Debug)]
pub struct Eigenbasis {
    layout: SpaceLayout,
    values: Vec<f64>,
    vectors: Array2<C64>,
    adjoint: Array2<C64>,
}

impl Eigenbasis {
    pub fn new(op: &OperatorMatrix) -> Result<Self> {
        let defect = hermiticity_defect(op);
        if defect > HERMITIAN_TOL {
            return Err(Error::NotHermitian(defect));
        }
        let (values, vectors) = eigh(op.entries());
        let adjoint = vectors.t().mapv(|z| z.conj());
        Ok(Self { layout: op.layout().clone(), values, vectors, adjoint })
    }

    pub fn layout(&self) -> &SpaceLayout {
        &self.layout
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `U f(E) U† v`.
    pub fn apply_function(&self, v: &Array1<C64>, f: impl Fn(f64) -> C64) -> Array1<C64> {
        let mut w = self.adjoint.dot(v);
        for (z, e) in w.iter_mut().zip(&self.values) {
            *z *= f(*e);
        }
        self.vectors.dot(&w)
    }

    pub fn to_dense(&self) -> OperatorMatrix {
        OperatorMatrix::new(self.layout.clone(), reconstruct(&self.vectors, &self.values)).expect("square")
    }

    /// Columns `exp(−iθ_k H/ħ) v` for every `θ_k`, computed with one matrix product.
    pub fn propagate_many(&self, v: &Array1<C64>, thetas: &[f64], hbar: f64) -> Array2<C64> {
        let coef = self.adjoint.dot(v);
        let phased = Array2::from_shape_fn((self.values.len(), thetas.len()), |(i, k)| {
            coef[i] * C64::from_polar(1.0, -thetas[k] * self.values[i] / hbar)
        });
        self.vectors.dot(&phased)
    }
}

/// A generator evaluated at one time: dense, factored, or a multiple of a diagonalised operator.
#[derive(Clone, Debug)]
pub enum Action<'a> {
    Dense(Cow<'a, OperatorMatrix>),
    Structured(Cow<'a, StructuredOperator>),
    Spectral { basis: &'a Eigenbasis, scale: f64 },
}

impl Action<'_> {
    pub fn layout(&self) -> &SpaceLayout {
        match self {
            Action::Dense(m) => m.layout(),
            Action::Structured(s) => s.layout(),
            Action::Spectral { basis, .. } => basis.layout(),
        }
    }

    pub fn apply_amplitudes(&self, v: &Array1<C64>) -> Array1<C64> {
        match self {
            Action::Dense(m) => m.entries().dot(v),
            Action::Structured(s) => s.apply_amplitudes(v),
            Action::Spectral { basis, scale } => basis.apply_function(v, |e| C64::new(scale * e, 0.0)),
        }
    }

    pub fn apply(&self, state: &StateVector) -> Result<StateVector> {
        if state.layout() != self.layout() {
            return Err(Error::LayoutMismatch(format!("generator {} vs state {}", self.layout(), state.layout())));
        }
        StateVector::new(self.layout().clone(), self.apply_amplitudes(state.amplitudes()))
    }

    /// Dense matrix form (materialises factored operators).
    pub fn to_dense(&self) -> Cow<'_, OperatorMatrix> {
        match self {
            Action::Dense(m) => Cow::Borrowed(m.as_ref()),
            Action::Structured(s) => Cow::Owned(s.to_dense()),
            Action::Spectral { basis, scale } => Cow::Owned(basis.to_dense().scaled_re(*scale)),
        }
    }
}

impl LinearMap for Action<'_> {
    fn layout(&self) -> &SpaceLayout {
        Action::layout(self)
    }

    fn apply_amplitudes(&self, v: &Array1<C64>) -> Array1<C64> {
        Action::apply_amplitudes(self, v)
    }
}

/// A (possibly time-dependent) generator `t ↦ H(t)`.
pub trait Generator {
    fn action(&self, t: f64) -> Action<'_>;
}

impl Generator for OperatorMatrix {
    fn action(&self, _t: f64) -> Action<'_> {
        Action::Dense(Cow::Borrowed(self))
    }
}

impl Generator for StructuredOperator {
    fn action(&self, _t: f64) -> Action<'_> {
        Action::Structured(Cow::Borrowed(self))
    }
}

impl<F: Fn(f64) -> OperatorMatrix> Generator for F {
    fn action(&self, t: f64) -> Action<'_> {
        Action::Dense(Cow::Owned(self(t)))
    }
}

impl Generator for Eigenbasis {
    fn action(&self, _t: f64) -> Action<'_> {
        Action::Spectral { basis: self, scale: 1.0 }
    }
}

/// `H(t) = c(t)·H` for a fixed Hermitian `H`; each midpoint step is exponentiated exactly.
#[derive(Clone, Debug)]
pub struct ScaledGenerator<F> {
    pub basis: Eigenbasis,
    pub scale: F,
}

impl<F: Fn(f64) -> f64> Generator for ScaledGenerator<F> {
    fn action(&self, t: f64) -> Action<'_> {
        Action::Spectral { basis: &self.basis, scale: (self.scale)(t) }
    }
}

/// Adapts a closure producing factored operators.
pub struct StructuredFamily<F>(pub F);

impl<F: Fn(f64) -> StructuredOperator> Generator for StructuredFamily<F> {
    fn action(&self, t: f64) -> Action<'_> {
        Action::Structured(Cow::Owned((self.0)(t)))
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IntegratorOptions {
    pub hbar: f64,
    pub krylov: KrylovOptions,
}

impl Default for IntegratorOptions {
    fn default() -> Self {
        Self { hbar: HBAR, krylov: KrylovOptions::default() }
    }
}

impl IntegratorOptions {
    pub fn with_hbar(hbar: f64) -> Self {
        Self { hbar, ..Self::default() }
    }
}

/// Midpoint exponential integration of `iħ ∂ψ/∂t = H(t)ψ` from `t0` to `t1`.
pub fn evolve<G: Generator + ?Sized>(state: &StateVector, generator: &G, t0: f64, t1: f64, steps: usize) -> Result<StateVector> {
    evolve_with(state, generator, t0, t1, steps, &IntegratorOptions::default())
}

pub fn evolve_with<G: Generator + ?Sized>(
    state: &StateVector,
    generator: &G,
    t0: f64,
    t1: f64,
    steps: usize,
    opts: &IntegratorOptions,
) -> Result<StateVector> {
    if steps == 0 {
        return Err(Error::InvalidParameter("evolve needs at least one step".into()));
    }
    let dt = (t1 - t0) / steps as f64;
    let mut amps = state.amplitudes().clone();
    for k in 0..steps {
        let tm = t0 + (k as f64 + 0.5) * dt;
        let h = generator.action(tm);
        if h.layout() != state.layout() {
            return Err(Error::LayoutMismatch(format!("generator {} vs state {}", h.layout(), state.layout())));
        }
        amps = match h {
            Action::Spectral { basis, scale } => {
                let phase = -scale * dt / opts.hbar;
                basis.apply_function(&amps, |e| C64::from_polar(1.0, phase * e))
            }
            _ => expmv_action(&|v: &Array1<C64>| h.apply_amplitudes(v), &amps, dt / opts.hbar, &opts.krylov).map_err(
                |e| match e {
                    Error::NonFinite(_) => Error::NonFinite(tm),
                    other => other,
                },
            )?,
        };
        if amps.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite(t0 + (k + 1) as f64 * dt));
        }
    }
    StateVector::new(state.layout().clone(), amps)
}

/// States at each of `times`, integrating with `substeps` midpoint steps per interval.
pub fn evolve_sampled<G: Generator + ?Sized>(
    state: &StateVector,
    generator: &G,
    times: &[f64],
    substeps: usize,
    opts: &IntegratorOptions,
) -> Result<Vec<StateVector>> {
    if times.is_empty() {
        return Ok(Vec::new());
    }
    let mut out = Vec::with_capacity(times.len());
    out.push(state.clone());
    for w in times.windows(2) {
        let next = evolve_with(out.last().expect("non-empty"), generator, w[0], w[1], substeps, opts)?;
        out.push(next);
    }
    Ok(out)
}

/// `|Ψ⟩⟩ = Σ_k |t_A^k⟩⊗|ψ(t_A^k)⟩`, stored slice by slice.
#[derive(Clone, Debug)]
pub struct HistoryState {
    pub slices: Vec<StateVector>,
    pub clock_a: ClockModel,
    /// Quadrature weight `dt_A`.
    pub weight: f64,
}

impl HistoryState {
    pub fn times(&self) -> &[f64] {
        self.clock_a.times()
    }

    pub fn slice_layout(&self) -> &SpaceLayout {
        self.slices[0].layout()
    }
}

/// Builds the history by propagating `psi0` across clock A's grid.
pub fn assemble_history<G: Generator + ?Sized>(
    clock_a: &ClockModel,
    psi0: &StateVector,
    generator: &G,
    substeps: usize,
    opts: &IntegratorOptions,
) -> Result<HistoryState> {
    if (psi0.norm() - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidParameter(format!("history seed must be normalised (norm {})", psi0.norm())));
    }
    let slices = evolve_sampled(psi0, generator, clock_a.times(), substeps, opts)?;
    Ok(HistoryState { slices, clock_a: clock_a.clone(), weight: clock_a.dt() })
}

/// Per-slice constraint residuals with interior and boundary maxima.
#[derive(Clone, Debug)]
pub struct ConstraintReport {
    pub series: ExpectationSeries,
    pub interior_max: f64,
    pub boundary_max: f64,
    /// Slices at each end counted as boundary.
    pub boundary_width: usize,
}

/// `r_k = ‖iħ(Dψ)_k − H(t_k)ψ_k‖` with `D` the spectral derivative on clock A's periodic grid.
///
/// Since `iħD = −H_A` on the grid this is the k-th block of `H_T|Ψ⟩⟩`.
pub fn constraint_residual<G: Generator + ?Sized>(history: &HistoryState, generator: &G) -> Result<ConstraintReport> {
    let n = history.slices.len();
    if n < 8 {
        return Err(Error::TooFewSamples(format!("constraint residual needs ≥ 8 slices, got {n}")));
    }
    let h_a = history.clock_a.hamiltonian().entries();
    let times = history.times().to_vec();
    let dim = history.slices[0].dim();
    let mut values = Vec::with_capacity(n);
    for k in 0..n {
        let mut acc = Array1::<C64>::zeros(dim);
        for l in 0..n {
            let c = h_a[[k, l]];
            if c != C64::new(0.0, 0.0) {
                acc.scaled_add(c, history.slices[l].amplitudes());
            }
        }
        let h = generator.action(times[k]);
        acc += &h.apply_amplitudes(history.slices[k].amplitudes());
        values.push(acc.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt());
    }
    let boundary_width = (n / 8).max(2);
    let mut interior_max: f64 = 0.0;
    let mut boundary_max: f64 = 0.0;
    for (k, v) in values.iter().enumerate() {
        if k < boundary_width || k >= n - boundary_width {
            boundary_max = boundary_max.max(*v);
        } else {
            interior_max = interior_max.max(*v);
        }
    }
    Ok(ConstraintReport { series: ExpectationSeries::new(times, values, None)?, interior_max, boundary_max, boundary_width })
}

/// `φ_j = Σ_k √dt |t_A^k⟩ ⊗ ⟨t_B^j|ψ(t_A^k)⟩` on `A ⊗ (rest)`; left unnormalised.
pub fn condition_on_clock(history: &HistoryState, clock_b_label: &str, t_b_index: usize) -> Result<StateVector> {
    let parts: Result<Vec<StateVector>> =
        history.slices.iter().map(|s| condition(s, clock_b_label, t_b_index)).collect();
    let parts = parts?;
    let rest = parts[0].layout().clone();
    let layout = history.clock_a.layout().concat(&rest)?;
    let w = history.weight.sqrt();
    let m = rest.total_dim();
    let mut amps = Array1::<C64>::zeros(layout.total_dim());
    for (k, p) in parts.iter().enumerate() {
        let mut block = amps.slice_mut(ndarray::s![k * m..(k + 1) * m]);
        block.zip_mut_with(p.amplitudes(), |o, a| *o = a * w);
    }
    StateVector::new(layout, amps)
}

/// A sampled scalar quantity, optionally with variances.
#[derive(Clone, Debug, PartialEq)]
pub struct ExpectationSeries {
    pub times: Vec<f64>,
    pub values: Vec<f64>,
    pub variances: Option<Vec<f64>>,
}

impl ExpectationSeries {
    pub fn new(times: Vec<f64>, values: Vec<f64>, variances: Option<Vec<f64>>) -> Result<Self> {
        if times.len() != values.len() || variances.as_ref().is_some_and(|v| v.len() != times.len()) {
            return Err(Error::InvalidParameter("series lengths differ".into()));
        }
        if times.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::InvalidParameter("series times must be strictly increasing".into()));
        }
        Ok(Self { times, values, variances })
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    pub fn first(&self) -> f64 {
        self.values[0]
    }

    pub fn last(&self) -> f64 {
        *self.values.last().expect("non-empty series")
    }

    /// Value at `t` by linear interpolation (clamped to the ends).
    pub fn interpolate(&self, t: f64) -> f64 {
        let n = self.len();
        if t <= self.times[0] {
            return self.values[0];
        }
        if t >= self.times[n - 1] {
            return self.values[n - 1];
        }
        let k = self.times.partition_point(|&x| x <= t) - 1;
        let (t0, t1) = (self.times[k], self.times[k + 1]);
        self.values[k] + (self.values[k + 1] - self.values[k]) * (t - t0) / (t1 - t0)
    }
}

/// Mean and variance of `op` along a list of states.
pub fn track<O: LinearMap + ?Sized>(states: &[StateVector], times: &[f64], op: &O) -> Result<ExpectationSeries> {
    if states.len() != times.len() {
        return Err(Error::InvalidParameter("one time per state required".into()));
    }
    let mut values = Vec::with_capacity(states.len());
    let mut vars = Vec::with_capacity(states.len());
    for s in states {
        let (m, v) = mean_and_variance(s, op)?;
        values.push(m);
        vars.push(v);
    }
    ExpectationSeries::new(times.to_vec(), values, Some(vars))
}

/// Mean and variance of `op` along the slices of a history.
pub fn track_history<O: LinearMap + ?Sized>(history: &HistoryState, op: &O) -> Result<ExpectationSeries> {
    track(&history.slices, history.times(), op)
}

/// Centered three-point derivative at interior samples (non-uniform spacing allowed).
pub fn flow_rate(series: &ExpectationSeries) -> Result<ExpectationSeries> {
    let n = series.len();
    if n < 3 {
        return Err(Error::TooFewSamples("flow rate needs at least three samples".into()));
    }
    let (t, v) = (&series.times, &series.values);
    let mut times = Vec::with_capacity(n - 2);
    let mut rates = Vec::with_capacity(n - 2);
    for k in 1..n - 1 {
        let (h0, h1) = (t[k] - t[k - 1], t[k + 1] - t[k]);
        let d = -h1 / (h0 * (h0 + h1)) * v[k - 1] + (h1 - h0) / (h0 * h1) * v[k] + h0 / (h1 * (h0 + h1)) * v[k + 1];
        times.push(t[k]);
        rates.push(d);
    }
    ExpectationSeries::new(times, rates, None)
}

/// Average of a sampled quantity over the centered three-point stencil, `(f₋ + 4f₀ + f₊)/6`.
///
/// For uniform spacing this is the exact counterpart of a centered difference of its integral.
pub fn stencil_average(series: &ExpectationSeries) -> Result<ExpectationSeries> {
    let n = series.len();
    if n < 3 {
        return Err(Error::TooFewSamples("stencil average needs at least three samples".into()));
    }
    let v = &series.values;
    let values = (1..n - 1).map(|k| (v[k - 1] + 4.0 * v[k] + v[k + 1]) / 6.0).collect();
    ExpectationSeries::new(series.times[1..n - 1].to_vec(), values, None)
}

/// First time the series crosses `level` upward, by linear interpolation.
pub fn crossing_time(series: &ExpectationSeries, level: f64) -> Result<f64> {
    let (t, v) = (&series.times, &series.values);
    if v.first().is_some_and(|&x| x >= level) {
        return Err(Error::CrossingNotFound(format!("series starts at or above {level}")));
    }
    for k in 1..v.len() {
        if v[k] >= level {
            let f = (level - v[k - 1]) / (v[k] - v[k - 1]);
            return Ok(t[k - 1] + f * (t[k] - t[k - 1]));
        }
    }
    Err(Error::CrossingNotFound(format!("series never reaches {level}")))
}
