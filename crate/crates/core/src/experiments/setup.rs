//! Model construction shared by the scenario runners.

use ndarray::{Array1, Array2};

use super::config::{ClockConfig, PointerConfig, SystemConfig};
use crate::clock::{gaussian_clock_state, ClockModel};
use crate::dynamics::{Eigenbasis, ExpectationSeries};
use crate::pulse::PulseProfile;
use crate::hamiltonians::{SystemSpec, SYSTEM_LABEL};
use crate::pointer::{nonneg_momentum_state, PointerModel, PointerStateSpec};
use crate::tensor::{OperatorMatrix, SpaceLayout, StateVector};
use crate::{Error, Result, C64, HBAR};

pub(crate) fn clock(label: &str, cfg: &ClockConfig) -> Result<ClockModel> {
    ClockModel::new(label, cfg.dim, cfg.dt, HBAR)
}

pub(crate) fn clock_state(clock: &ClockModel, cfg: &ClockConfig) -> Result<StateVector> {
    gaussian_clock_state(clock, &cfg.state_spec())
}

/// System spec and normalised initial state.
pub(crate) fn system(cfg: &SystemConfig) -> Result<(SystemSpec, StateVector)> {
    let mut spec = SystemSpec::diagonal(&cfg.energies)?;
    if let Some(c) = &cfg.coupling {
        let n = cfg.energies.len();
        let v = Array2::from_shape_fn((n, n), |(i, j)| C64::new(c.matrix[i][j], 0.0));
        let v = OperatorMatrix::new(spec.layout(), v)?;
        spec = spec.with_interaction(&v, c.profile)?;
    }
    let amps: Vec<C64> = cfg.initial.iter().map(|&a| C64::new(a, 0.0)).collect();
    let psi = StateVector::from_vec(SpaceLayout::single(SYSTEM_LABEL, amps.len())?, amps)?.normalized()?;
    Ok((spec, psi))
}

pub(crate) struct Pointer {
    pub model: PointerModel,
    pub state: StateVector,
    pub leakage: f64,
}

pub(crate) fn pointer(label: &str, cfg: &PointerConfig, p_mean: f64, p_sigma: f64) -> Result<Pointer> {
    let model = PointerModel::new(label, cfg.dim, cfg.dq, HBAR)?;
    let ps = nonneg_momentum_state(&model, &PointerStateSpec::new(p_mean, p_sigma))?;
    Ok(Pointer { model, state: ps.state, leakage: ps.leakage })
}

/// A pointer in the decoupled baseline `⟨P⟩ = 0`: momentum eigenstate `p = 0`.
pub(crate) fn zero_momentum_pointer(label: &str, cfg: &PointerConfig) -> Result<Pointer> {
    let model = PointerModel::new(label, cfg.dim, cfg.dq, HBAR)?;
    let n = cfg.dim;
    let amps = vec![C64::new(1.0 / (n as f64).sqrt(), 0.0); n];
    let state = StateVector::from_vec(model.layout(), amps)?;
    Ok(Pointer { model, state, leakage: 0.0 })
}

/// Sample grid with spacing `τ/(samples − 1)` covering the pulse window and a quarter-window
/// margin on each side; the window edges are grid points.
pub(crate) fn window_times(t_start: f64, tau: f64, samples: usize) -> (Vec<f64>, usize, usize) {
    let n = samples - 1;
    let pad = (n / 4).max(2);
    let h = tau / n as f64;
    let times = (0..=n + 2 * pad).map(|k| t_start + h * (k as f64 - pad as f64)).collect();
    (times, pad, pad + n)
}

pub(crate) fn series(times: &[f64], values: Vec<f64>) -> Result<ExpectationSeries> {
    ExpectationSeries::new(times.to_vec(), values, None)
}

/// Maximum of `|a_k − b_k|` over `k`.
pub(crate) fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

/// Components with less weight than this are dropped.
pub(crate) const BLOCK_WEIGHT_FLOOR: f64 = 1e-28;

/// One conserved sector: `φ ⊗ suffix` with `φ` evolving under `(1 + coupling·g(t))·H_b`.
struct Component {
    suffix: StateVector,
    phi: Array1<C64>,
    basis: usize,
    coupling: f64,
}

/// A state `Σ_c φ_c ⊗ e_c` under a generator that conserves every suffix `e_c` (pointer
/// momenta, system levels) and acts on sector `c` as `(1 + κ_c g(t))·H_c` with constant `H_c`.
///
/// All generators of one sector commute, so the midpoint integrator reduces to
/// `exp(−iθ_k H_c/ħ)` with `θ_k` the midpoint-rule quadrature of `1 + κ_c g`; whole
/// trajectories then cost one matrix product per sector.
pub(crate) struct SpectralBlocks {
    rest: SpaceLayout,
    bases: Vec<Eigenbasis>,
    components: Vec<Component>,
}

impl SpectralBlocks {
    pub fn new(rest: SpaceLayout) -> Self {
        Self { rest, bases: Vec::new(), components: Vec::new() }
    }

    /// Registers a sector generator and returns its index.
    pub fn add_basis(&mut self, basis: Eigenbasis) -> usize {
        self.bases.push(basis);
        self.bases.len() - 1
    }

    pub fn add_component(&mut self, phi: &StateVector, suffix: StateVector, basis: usize, coupling: f64) {
        self.components.push(Component { suffix, phi: phi.amplitudes().clone(), basis, coupling });
    }

    /// One sector per populated pointer momentum `p`, with coupling `κ = p` or `0`.
    pub fn momentum_sectors(
        rest: &StateVector,
        pointer: &Pointer,
        scaled: bool,
        mut basis_for: impl FnMut(f64) -> Result<Eigenbasis>,
    ) -> Result<Self> {
        let mut out = Self::new(rest.layout().clone());
        let amps = pointer.model.momentum_amplitudes(&pointer.state)?;
        let momenta = pointer.model.momenta();
        for (m, a) in amps.iter().enumerate() {
            if a.norm_sqr() > BLOCK_WEIGHT_FLOOR {
                let b = out.add_basis(basis_for(momenta[m])?);
                let coupling = if scaled { momenta[m] } else { 0.0 };
                out.add_component(&rest.scaled(*a), pointer.model.momentum_eigenstate(m)?, b, coupling);
            }
        }
        Ok(out)
    }

    /// States at `times` with `g` applied through the midpoint rule using `substeps` steps per
    /// interval; `pulse = None` means every coupling is inert.
    pub fn trajectory(&self, times: &[f64], pulse: Option<&PulseProfile>, substeps: usize) -> Result<BlockTrajectory> {
        if self.components.is_empty() {
            return Err(Error::InvalidParameter("no populated sector".into()));
        }
        let mut weight = vec![0.0; times.len()];
        if let Some(g) = pulse {
            for k in 1..times.len() {
                let dt = (times[k] - times[k - 1]) / substeps as f64;
                let step: f64 = (0..substeps).map(|j| g.evaluate(times[k - 1] + (j as f64 + 0.5) * dt) * dt).sum();
                weight[k] = weight[k - 1] + step;
            }
        }
        let columns = self
            .components
            .iter()
            .map(|c| {
                let thetas: Vec<f64> =
                    times.iter().zip(&weight).map(|(t, w)| (t - times[0]) + c.coupling * w).collect();
                self.bases[c.basis].propagate_many(&c.phi, &thetas, HBAR)
            })
            .collect();
        let ns = self.components[0].suffix.dim();
        let suffixes = Array2::from_shape_fn((self.components.len(), ns), |(c, s)| self.components[c].suffix.amplitudes()[s]);
        let layout = self.rest.concat(self.components[0].suffix.layout())?;
        Ok(BlockTrajectory { layout, columns, suffixes, len: times.len() })
    }
}

/// Sector trajectories from [`SpectralBlocks::trajectory`].
pub(crate) struct BlockTrajectory {
    layout: SpaceLayout,
    /// Per sector, `φ_c(t_k)` in column `k`.
    columns: Vec<Array2<C64>>,
    suffixes: Array2<C64>,
    len: usize,
}

impl BlockTrajectory {
    /// Full state `Σ_c φ_c(t_k) ⊗ e_c`.
    pub fn state(&self, k: usize) -> Result<StateVector> {
        let n = self.columns[0].nrows();
        let phis = Array2::from_shape_fn((n, self.columns.len()), |(i, c)| self.columns[c][[i, k]]);
        let full = phis.dot(&self.suffixes);
        StateVector::new(self.layout.clone(), full.into_shape_with_order(n * self.suffixes.ncols()).expect("contiguous"))
    }

    pub fn states(&self) -> Result<Vec<StateVector>> {
        (0..self.len).map(|k| self.state(k)).collect()
    }
}
