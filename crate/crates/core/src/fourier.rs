//! Discrete Fourier-conjugate pairs shared by clocks and pointers.

use std::f64::consts::PI;

use ndarray::Array2;

use crate::linalg;
use crate::C64;

/// A uniform grid together with its centered conjugate wavenumbers.
///
/// Wavenumbers are `k_m = 2π m / (N·spacing)` for `m ∈ [−N/2, N/2)`, with the
/// unpaired Nyquist mode assigned zero so the spectrum is symmetric about 0.
#[derive(Clone, Debug)]
pub(crate) struct ConjugateGrid {
    pub points: Vec<f64>,
    pub wavenumbers: Vec<f64>,
    /// Columns are the plane waves `e^{i k_m x_a} / √N`.
    pub modes: Array2<C64>,
    /// Column of the unpaired Nyquist mode, if any.
    pub nyquist: Option<usize>,
}

impl ConjugateGrid {
    pub fn new(points: Vec<f64>, spacing: f64) -> Self {
        let n = points.len();
        let half = (n / 2) as i64;
        let wavenumbers: Vec<f64> = (0..n as i64)
            .map(|idx| {
                let m = idx - half;
                if n % 2 == 0 && m == -half {
                    0.0
                } else {
                    2.0 * PI * m as f64 / (n as f64 * spacing)
                }
            })
            .collect();
        // Plane-wave phases use the mode index even for the Nyquist column so the
        // columns stay an orthonormal basis.
        let norm = 1.0 / (n as f64).sqrt();
        let modes = Array2::from_shape_fn((n, n), |(a, idx)| {
            let m = idx as i64 - half;
            let k = 2.0 * PI * m as f64 / (n as f64 * spacing);
            C64::from_polar(norm, k * (points[a] - points[0]))
        });
        let nyquist = (n % 2 == 0).then_some(0);
        Self { points, wavenumbers, modes, nyquist }
    }

    /// `F diag(f(k_m)) F†`.
    pub fn conjugate_function(&self, f: impl Fn(f64) -> f64) -> Array2<C64> {
        let vals: Vec<f64> = self.wavenumbers.iter().map(|&k| f(k)).collect();
        linalg::reconstruct(&self.modes, &vals)
    }

    /// `F diag(e^{−i k s}) F†`: translation by `s` along the grid.
    pub fn translation(&self, s: f64) -> Array2<C64> {
        let mut scaled = self.modes.clone();
        for (mut col, k) in scaled.columns_mut().into_iter().zip(&self.wavenumbers) {
            let phase = C64::from_polar(1.0, -k * s);
            col.mapv_inplace(|z| z * phase);
        }
        scaled.dot(&self.modes.t().mapv(|z| z.conj()))
    }
}
