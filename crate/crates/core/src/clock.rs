//! Ideal clocks realised as a Fourier-conjugate (T, H) pair on a periodic grid.

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::fourier::ConjugateGrid;
use crate::tensor::{commutator, OperatorMatrix, SpaceLayout, StateVector};
use crate::{Error, Result, C64, HBAR};

/// Smallest admissible clock dimension.
pub const MIN_CLOCK_DIM: usize = 8;

/// Number of standard deviations a wavepacket must keep from the grid edge.
pub const SUPPORT_SIGMAS: f64 = 5.0;

#[derive(Clone, Debug)]
pub struct ClockModel {
    label: String,
    dim: usize,
    dt: f64,
    hbar: f64,
    grid: ConjugateGrid,
    time_op: OperatorMatrix,
    hamiltonian: OperatorMatrix,
}

/// Builds a clock labelled `"clock"` with ħ = 1.
pub fn build_ideal_clock(dim: usize, dt: f64) -> Result<ClockModel> {
    ClockModel::new("clock", dim, dt, HBAR)
}

impl ClockModel {
    pub fn new(label: &str, dim: usize, dt: f64, hbar: f64) -> Result<Self> {
        if dim < MIN_CLOCK_DIM {
            return Err(Error::InvalidParameter(format!("clock dimension {dim} < {MIN_CLOCK_DIM}")));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidParameter(format!("clock spacing dt = {dt} must be positive")));
        }
        if !(hbar > 0.0 && hbar.is_finite()) {
            return Err(Error::InvalidParameter(format!("hbar = {hbar} must be positive")));
        }
        let times: Vec<f64> = (0..dim).map(|k| k as f64 * dt).collect();
        let grid = ConjugateGrid::new(times.clone(), dt);
        let layout = SpaceLayout::single(label, dim)?;
        let time_op = OperatorMatrix::from_real_diagonal(layout.clone(), &times)?;
        // Plane waves e^{iωt} with eigenvalue ħω make exp(−iH s/ħ) shift ψ(t) → ψ(t − s).
        let h = grid.conjugate_function(|w| hbar * w);
        let hamiltonian = OperatorMatrix::new(layout, h)?.hermitian_part();
        Ok(Self { label: label.to_string(), dim, dt, hbar, grid, time_op, hamiltonian })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn times(&self) -> &[f64] {
        &self.grid.points
    }

    /// Grid span `dim · dt` (one full period).
    pub fn period(&self) -> f64 {
        self.dim as f64 * self.dt
    }

    pub fn last_time(&self) -> f64 {
        (self.dim - 1) as f64 * self.dt
    }

    /// Angular frequencies ω_m of the energy eigenbasis.
    pub fn frequencies(&self) -> &[f64] {
        &self.grid.wavenumbers
    }

    pub fn layout(&self) -> SpaceLayout {
        self.time_op.layout().clone()
    }

    pub fn time_op(&self) -> &OperatorMatrix {
        &self.time_op
    }

    pub fn hamiltonian(&self) -> &OperatorMatrix {
        &self.hamiltonian
    }

    /// Diagonal operator `f(T)`.
    pub fn time_function(&self, f: impl Fn(f64) -> f64) -> OperatorMatrix {
        let vals: Vec<f64> = self.times().iter().map(|&t| f(t)).collect();
        OperatorMatrix::from_real_diagonal(self.layout(), &vals).expect("grid length matches layout")
    }

    /// `f(H)` evaluated in the known energy eigenbasis.
    pub fn energy_function(&self, f: impl Fn(f64) -> f64) -> OperatorMatrix {
        let m = self.grid.conjugate_function(|w| f(self.hbar * w));
        OperatorMatrix::new(self.layout(), m).expect("square").hermitian_part()
    }

    /// Exact discrete propagator `exp(−i H s / ħ)`.
    pub fn translation(&self, s: f64) -> OperatorMatrix {
        OperatorMatrix::new(self.layout(), self.grid.translation(s)).expect("square")
    }

    /// Checks the interior-support rule for a wavepacket specification.
    pub fn check_state_spec(&self, spec: &ClockStateSpec) -> Result<()> {
        if !(spec.sigma >= 4.0 * self.dt * (1.0 - 1e-12)) {
            return Err(Error::InvalidParameter(format!(
                "clock spread sigma = {} is below 4·dt = {}",
                spec.sigma,
                4.0 * self.dt
            )));
        }
        self.check_interior(spec.t0, spec.sigma)
    }

    fn check_interior(&self, center: f64, sigma: f64) -> Result<()> {
        let lo = center - SUPPORT_SIGMAS * sigma;
        let hi = center + SUPPORT_SIGMAS * sigma;
        if lo < -1e-12 || hi > self.last_time() + 1e-12 {
            return Err(Error::BoundaryContact(format!(
                "[{lo:.4}, {hi:.4}] leaves the clock grid [0, {:.4}]",
                self.last_time()
            )));
        }
        Ok(())
    }

    /// Residual `‖([T,H] − iħ)ψ‖ / ‖ψ‖`.
    pub fn commutator_residual(&self, state: &StateVector) -> Result<f64> {
        let c = commutator(&self.time_op, &self.hamiltonian)?;
        let c_psi = c.apply(state)?;
        let target = state.scaled(C64::new(0.0, self.hbar));
        Ok(c_psi.minus(&target)?.norm() / state.norm())
    }
}

/// A Gaussian clock wavepacket: center `t0`, spread `sigma`, optional carrier frequency.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClockStateSpec {
    pub t0: f64,
    pub sigma: f64,
    /// Carrier angular frequency; sets the mean clock energy `ħ·carrier`.
    #[serde(default)]
    pub carrier: f64,
}

impl ClockStateSpec {
    pub fn new(t0: f64, sigma: f64) -> Self {
        Self { t0, sigma, carrier: 0.0 }
    }

    pub fn with_carrier(mut self, carrier: f64) -> Self {
        self.carrier = carrier;
        self
    }
}

fn gaussian_amplitudes(times: &[f64], center: f64, sigma: f64, carrier: f64) -> Array1<C64> {
    let mut a = Array1::from_shape_fn(times.len(), |k| {
        let x = times[k] - center;
        C64::from_polar((-x * x / (4.0 * sigma * sigma)).exp(), carrier * times[k])
    });
    let n = a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    a.mapv_inplace(|z| z / n);
    a
}

/// Normalised Gaussian wavepacket with `|ψ(t)|²` of mean `t0` and spread `sigma`.
pub fn gaussian_clock_state(clock: &ClockModel, spec: &ClockStateSpec) -> Result<StateVector> {
    clock.check_state_spec(spec)?;
    StateVector::new(clock.layout(), gaussian_amplitudes(clock.times(), spec.t0, spec.sigma, spec.carrier))
}

fn wrapped_center(clock: &ClockModel, t: f64) -> f64 {
    t.rem_euclid(clock.period())
}

fn fidelity_unchecked(clock: &ClockModel, spec: &ClockStateSpec, s: f64) -> Result<f64> {
    let psi0 = StateVector::new(clock.layout(), gaussian_amplitudes(clock.times(), spec.t0, spec.sigma, spec.carrier))?;
    let evolved = clock.translation(s).apply(&psi0)?;
    let target = StateVector::new(
        clock.layout(),
        gaussian_amplitudes(clock.times(), wrapped_center(clock, spec.t0 + s), spec.sigma, spec.carrier),
    )?;
    Ok(target.inner(&evolved)?.norm().min(1.0))
}

/// `|⟨ψ_{t0+s}| exp(−iHs/ħ) |ψ_{t0}⟩|` against the analytically shifted wavepacket.
///
/// Shifts are taken modulo the grid period; the shifted support must stay interior.
pub fn covariance_fidelity(clock: &ClockModel, spec: &ClockStateSpec, s: f64) -> Result<f64> {
    clock.check_state_spec(spec)?;
    clock.check_interior(wrapped_center(clock, spec.t0 + s), spec.sigma)?;
    if s == 0.0 {
        return Ok(1.0);
    }
    fidelity_unchecked(clock, spec, s)
}

/// Fidelities for a list of shifts without the interior check, so edge degradation is visible.
pub fn fidelity_profile(clock: &ClockModel, spec: &ClockStateSpec, shifts: &[f64]) -> Result<Vec<f64>> {
    shifts.iter().map(|&s| fidelity_unchecked(clock, spec, s)).collect()
}
