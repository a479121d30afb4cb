//! Measurement pointers: a (Q, P) conjugate pair and non-negative momentum states.

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::fourier::ConjugateGrid;
use crate::tensor::{OperatorMatrix, SpaceLayout, StateVector};
use crate::{Error, Result, C64, HBAR};

pub const MIN_POINTER_DIM: usize = 8;

#[derive(Clone, Debug)]
pub struct PointerModel {
    label: String,
    dim: usize,
    dq: f64,
    hbar: f64,
    grid: ConjugateGrid,
    position_op: OperatorMatrix,
    momentum_op: OperatorMatrix,
}

/// Builds a pointer labelled `"pointer"` with ħ = 1.
pub fn build_pointer(dim: usize, dq: f64) -> Result<PointerModel> {
    PointerModel::new("pointer", dim, dq, HBAR)
}

impl PointerModel {
    /// Positions are `q_k = (k − dim/2)·dq`, centred on zero.
    pub fn new(label: &str, dim: usize, dq: f64, hbar: f64) -> Result<Self> {
        if dim < MIN_POINTER_DIM {
            return Err(Error::InvalidParameter(format!("pointer dimension {dim} < {MIN_POINTER_DIM}")));
        }
        if !(dq > 0.0 && dq.is_finite()) {
            return Err(Error::InvalidParameter(format!("pointer spacing dq = {dq} must be positive")));
        }
        let half = (dim / 2) as f64;
        let positions: Vec<f64> = (0..dim).map(|k| (k as f64 - half) * dq).collect();
        let grid = ConjugateGrid::new(positions.clone(), dq);
        let layout = SpaceLayout::single(label, dim)?;
        let position_op = OperatorMatrix::from_real_diagonal(layout.clone(), &positions)?;
        let momentum_op = OperatorMatrix::new(layout, grid.conjugate_function(|k| hbar * k))?.hermitian_part();
        Ok(Self { label: label.to_string(), dim, dq, hbar, grid, position_op, momentum_op })
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn dq(&self) -> f64 {
        self.dq
    }

    pub fn hbar(&self) -> f64 {
        self.hbar
    }

    pub fn positions(&self) -> &[f64] {
        &self.grid.points
    }

    /// Momentum eigenvalues `ħ k_m`, centred.
    pub fn momenta(&self) -> Vec<f64> {
        self.grid.wavenumbers.iter().map(|k| self.hbar * k).collect()
    }

    /// Momentum spacing `2πħ / (dim·dq)`.
    pub fn dp(&self) -> f64 {
        2.0 * std::f64::consts::PI * self.hbar / (self.dim as f64 * self.dq)
    }

    pub fn layout(&self) -> SpaceLayout {
        self.position_op.layout().clone()
    }

    pub fn position_op(&self) -> &OperatorMatrix {
        &self.position_op
    }

    pub fn momentum_op(&self) -> &OperatorMatrix {
        &self.momentum_op
    }

    /// `f(P)` evaluated in the momentum eigenbasis.
    pub fn momentum_function(&self, f: impl Fn(f64) -> f64) -> OperatorMatrix {
        let m = self.grid.conjugate_function(|k| f(self.hbar * k));
        OperatorMatrix::new(self.layout(), m).expect("square").hermitian_part()
    }

    /// Non-negative part `max(P, 0)`.
    ///
    /// Coincides with P on every state built by [`nonneg_momentum_state`].
    pub fn positive_momentum_op(&self) -> OperatorMatrix {
        self.momentum_function(|p| p.max(0.0))
    }

    /// Exact discrete translation `exp(−i a P / ħ)`.
    pub fn translation(&self, a: f64) -> OperatorMatrix {
        OperatorMatrix::new(self.layout(), self.grid.translation(a)).expect("square")
    }

    /// Amplitudes of `state` in the momentum eigenbasis, ordered like [`Self::momenta`].
    pub fn momentum_amplitudes(&self, state: &StateVector) -> Result<Array1<C64>> {
        if state.layout() != &self.layout() {
            return Err(Error::LayoutMismatch(format!("{} vs {}", state.layout(), self.layout())));
        }
        Ok(self.grid.modes.t().mapv(|z| z.conj()).dot(state.amplitudes()))
    }

    /// Momentum eigenstate `|p_m⟩`, indexed like [`Self::momenta`].
    pub fn momentum_eigenstate(&self, m: usize) -> Result<StateVector> {
        if m >= self.dim {
            return Err(Error::IndexOutOfRange { index: m, dim: self.dim });
        }
        StateVector::new(self.layout(), self.grid.modes.column(m).to_owned())
    }

    /// Momentum probabilities `|⟨p_m|ψ⟩|²`, ordered like [`Self::momenta`].
    pub fn momentum_distribution(&self, state: &StateVector) -> Result<Vec<f64>> {
        Ok(self.momentum_amplitudes(state)?.iter().map(|z| z.norm_sqr()).collect())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointerStateSpec {
    pub p_mean: f64,
    pub p_sigma: f64,
}

impl PointerStateSpec {
    pub fn new(p_mean: f64, p_sigma: f64) -> Self {
        Self { p_mean, p_sigma }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.p_mean > 0.0) {
            return Err(Error::InvalidParameter(format!("p_mean = {} must be positive", self.p_mean)));
        }
        if !(self.p_sigma > 0.0) {
            return Err(Error::InvalidParameter(format!("p_sigma = {} must be positive", self.p_sigma)));
        }
        if self.p_mean < 4.0 * self.p_sigma {
            return Err(Error::InvalidParameter(format!(
                "positivity regime requires p_mean ≥ 4·p_sigma (p_mean = {}, p_sigma = {})",
                self.p_mean, self.p_sigma
            )));
        }
        Ok(())
    }
}

/// A pointer state with non-negative momentum support.
#[derive(Clone, Debug)]
pub struct PointerState {
    pub state: StateVector,
    /// Probability on negative momenta before projection.
    pub leakage: f64,
}

/// Gaussian in momentum, centred at `p_mean` in momentum and at `q = 0` in position,
/// with negative-momentum components projected out and the result renormalised.
pub fn nonneg_momentum_state(pointer: &PointerModel, spec: &PointerStateSpec) -> Result<PointerState> {
    spec.validate()?;
    let momenta = pointer.momenta();
    let p_max = momenta.iter().cloned().fold(f64::MIN, f64::max);
    if spec.p_mean + 4.0 * spec.p_sigma > p_max {
        return Err(Error::BoundaryContact(format!(
            "momentum support p_mean + 4·p_sigma = {} exceeds the grid maximum {p_max}",
            spec.p_mean + 4.0 * spec.p_sigma
        )));
    }
    let q_ref = pointer.positions()[0];
    let weights: Vec<C64> = momenta
        .iter()
        .map(|&p| {
            let x = p - spec.p_mean;
            // Position centring at q = 0 relative to the grid's phase reference q_ref.
            C64::from_polar((-x * x / (4.0 * spec.p_sigma * spec.p_sigma)).exp(), p * q_ref / pointer.hbar())
        })
        .collect();
    let total: f64 = weights.iter().map(|z| z.norm_sqr()).sum();
    let leak: f64 = weights.iter().zip(&momenta).filter(|(_, p)| **p < 0.0).map(|(z, _)| z.norm_sqr()).sum();
    // The Nyquist column carries eigenvalue 0 but oscillates at the grid scale; it is never populated.
    let projected: Array1<C64> = weights
        .iter()
        .zip(&momenta)
        .enumerate()
        .map(|(m, (z, p))| if *p < 0.0 || Some(m) == pointer.grid.nyquist { C64::new(0.0, 0.0) } else { *z })
        .collect();
    let amps = pointer.grid.modes.dot(&projected);
    let state = StateVector::new(pointer.layout(), amps)?.normalized()?;
    Ok(PointerState { state, leakage: leak / total })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::{commutator, mean_and_variance};

    #[test]
    fn spectra_and_positions() {
        let p = build_pointer(16, 0.5).unwrap();
        assert_eq!(p.position_op().real_diagonal(), p.positions().to_vec());
        assert_eq!(p.positions()[8], 0.0);
        let mut m = p.momenta();
        m.sort_by(f64::total_cmp);
        for k in 0..m.len() {
            assert!((m[k] + m[m.len() - 1 - k]).abs() < 1e-12);
        }
    }

    #[test]
    fn nonneg_state_has_target_moments() {
        let p = build_pointer(64, 0.8).unwrap();
        let s = nonneg_momentum_state(&p, &PointerStateSpec::new(2.0, 0.25)).unwrap();
        assert!(s.leakage < 1e-12);
        let (mp, vp) = mean_and_variance(&s.state, p.momentum_op()).unwrap();
        assert!((mp - 2.0).abs() < 1e-3);
        let (mq, vq) = mean_and_variance(&s.state, p.position_op()).unwrap();
        assert!(mq.abs() < 1e-9);
        assert!(vq * vp >= 0.25 * 0.99);
        let dist = p.momentum_distribution(&s.state).unwrap();
        let neg: f64 = dist.iter().zip(p.momenta()).filter(|(_, q)| *q < 0.0).map(|(w, _)| w).sum();
        assert!(neg < 1e-28);
    }

    #[test]
    fn projection_zeroes_negative_momenta_exactly_in_momentum_basis() {
        let p = build_pointer(16, 0.7).unwrap();
        let s = nonneg_momentum_state(&p, &PointerStateSpec::new(1.0, 0.25)).unwrap();
        let amps = p.momentum_amplitudes(&s.state).unwrap();
        for (a, q) in amps.iter().zip(p.momenta()) {
            if q < 0.0 {
                assert!(a.norm() < 1e-14);
            }
        }
    }

    #[test]
    fn spec_rules() {
        assert!(PointerStateSpec::new(0.0, 0.1).validate().is_err());
        assert!(PointerStateSpec::new(1.0, 0.3).validate().is_err());
        assert!(PointerStateSpec::new(1.2, 0.3).validate().is_ok());
    }

    #[test]
    fn canonical_commutator_on_interior_wavepacket() {
        let p = build_pointer(128, 0.3).unwrap();
        let s = nonneg_momentum_state(&p, &PointerStateSpec::new(2.0, 0.25)).unwrap();
        let c = commutator(p.position_op(), p.momentum_op()).unwrap();
        let r = c.apply(&s.state).unwrap().minus(&s.state.scaled(C64::new(0.0, 1.0))).unwrap().norm();
        assert!(r < 1e-3, "{r}");
    }

    #[test]
    fn translation_shifts_position() {
        let p = build_pointer(128, 0.3).unwrap();
        let s = nonneg_momentum_state(&p, &PointerStateSpec::new(2.0, 0.25)).unwrap();
        let moved = p.translation(1.5).apply(&s.state).unwrap();
        let (mq, _) = mean_and_variance(&moved, p.position_op()).unwrap();
        assert!((mq - 1.5).abs() < 1e-6, "{mq}");
        let back = p.translation(-1.5).apply(&moved).unwrap();
        assert!(back.inner(&s.state).unwrap().norm() > 0.999);
    }
}
