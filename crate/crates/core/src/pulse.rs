//! Measurement control profiles `g(t)` with strength `K = ∫ g`.

use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::clock::ClockModel;
use crate::tensor::OperatorMatrix;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum PulseShape {
    /// Flat top with cosine ramps of the given width at both ends.
    BoxcarSmoothed { edge_width: f64 },
    /// `(K/τ)(1 − cos 2πs/τ)`.
    RaisedCosine,
    /// Gaussian centred in the window, `cutoff` standard deviations to each edge,
    /// shifted down so it vanishes at the edges.
    GaussianTruncated { cutoff: f64 },
}

impl Default for PulseShape {
    fn default() -> Self {
        PulseShape::RaisedCosine
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulseProfile {
    shape: PulseShape,
    t_start: f64,
    tau: f64,
    strength: f64,
    amplitude: f64,
}

// Five-point Gauss–Legendre rule on [−1, 1].
const GL_NODES: [f64; 5] = [-0.906_179_845_938_664, -0.538_469_310_105_683_1, 0.0, 0.538_469_310_105_683_1, 0.906_179_845_938_664];
const GL_WEIGHTS: [f64; 5] = [0.236_926_885_056_189_1, 0.478_628_670_499_366_5, 0.568_888_888_888_888_9, 0.478_628_670_499_366_5, 0.236_926_885_056_189_1];
const PANELS_PER_PIECE: usize = 64;

fn gauss_legendre(f: &impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
    if b <= a {
        return 0.0;
    }
    let h = (b - a) / PANELS_PER_PIECE as f64;
    let mut acc = 0.0;
    for p in 0..PANELS_PER_PIECE {
        let mid = a + (p as f64 + 0.5) * h;
        for (x, w) in GL_NODES.iter().zip(GL_WEIGHTS.iter()) {
            acc += w * f(mid + 0.5 * h * x);
        }
    }
    0.5 * h * acc
}

impl PulseProfile {
    /// A pulse starting at `t = 0`.
    pub fn new(shape: PulseShape, tau: f64, strength: f64) -> Result<Self> {
        Self::starting_at(shape, 0.0, tau, strength)
    }

    pub fn raised_cosine(tau: f64, strength: f64) -> Result<Self> {
        Self::new(PulseShape::RaisedCosine, tau, strength)
    }

    pub fn starting_at(shape: PulseShape, t_start: f64, tau: f64, strength: f64) -> Result<Self> {
        if !(tau > 0.0 && tau.is_finite()) {
            return Err(Error::InvalidParameter(format!("pulse duration tau = {tau} must be positive")));
        }
        if !(strength >= 0.0 && strength.is_finite()) {
            return Err(Error::InvalidParameter(format!("pulse strength K = {strength} must be non-negative")));
        }
        if !t_start.is_finite() {
            return Err(Error::InvalidParameter("pulse start must be finite".into()));
        }
        let amplitude = match shape {
            PulseShape::RaisedCosine => strength / tau,
            PulseShape::BoxcarSmoothed { edge_width } => {
                if !(edge_width >= 0.0 && edge_width <= 0.5 * tau) {
                    return Err(Error::InvalidParameter(format!(
                        "edge width {edge_width} must lie in [0, tau/2 = {}]",
                        0.5 * tau
                    )));
                }
                strength / (tau - edge_width)
            }
            PulseShape::GaussianTruncated { cutoff } => {
                if !(cutoff > 0.0 && cutoff.is_finite()) {
                    return Err(Error::InvalidParameter(format!("gaussian cutoff {cutoff} must be positive")));
                }
                let sigma = tau / (2.0 * cutoff);
                let area = sigma * (2.0 * PI).sqrt() * statrs::function::erf::erf(cutoff / 2f64.sqrt())
                    - tau * (-0.5 * cutoff * cutoff).exp();
                strength / area
            }
        };
        Ok(Self { shape, t_start, tau, strength, amplitude })
    }

    pub fn shape(&self) -> PulseShape {
        self.shape
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn t_end(&self) -> f64 {
        self.t_start + self.tau
    }

    pub fn tau(&self) -> f64 {
        self.tau
    }

    /// Strength `K`.
    pub fn strength(&self) -> f64 {
        self.strength
    }

    /// Same shape and window with a different strength.
    pub fn with_strength(&self, strength: f64) -> Result<Self> {
        Self::starting_at(self.shape, self.t_start, self.tau, strength)
    }

    /// Same shape and strength, shifted to start at `t_start`.
    pub fn with_start(&self, t_start: f64) -> Result<Self> {
        Self::starting_at(self.shape, t_start, self.tau, self.strength)
    }

    pub fn evaluate(&self, t: f64) -> f64 {
        let s = t - self.t_start;
        if !(0.0..=self.tau).contains(&s) {
            return 0.0;
        }
        let a = self.amplitude;
        match self.shape {
            PulseShape::RaisedCosine => a * (1.0 - (2.0 * PI * s / self.tau).cos()),
            PulseShape::BoxcarSmoothed { edge_width: w } => {
                if w > 0.0 && s < w {
                    a * 0.5 * (1.0 - (PI * s / w).cos())
                } else if w > 0.0 && s > self.tau - w {
                    a * 0.5 * (1.0 - (PI * (self.tau - s) / w).cos())
                } else {
                    a
                }
            }
            PulseShape::GaussianTruncated { cutoff } => {
                let sigma = self.tau / (2.0 * cutoff);
                let x = s - 0.5 * self.tau;
                a * ((-0.5 * x * x / (sigma * sigma)).exp() - (-0.5 * cutoff * cutoff).exp())
            }
        }
    }

    /// Analytic `g′(t)`; zero outside the window.
    pub fn derivative(&self, t: f64) -> Result<f64> {
        if let PulseShape::BoxcarSmoothed { edge_width } = self.shape {
            if edge_width == 0.0 {
                return Err(Error::NotDifferentiable("boxcar with zero edge width".into()));
            }
        }
        let s = t - self.t_start;
        if !(0.0..=self.tau).contains(&s) {
            return Ok(0.0);
        }
        let a = self.amplitude;
        Ok(match self.shape {
            PulseShape::RaisedCosine => a * (2.0 * PI / self.tau) * (2.0 * PI * s / self.tau).sin(),
            PulseShape::BoxcarSmoothed { edge_width: w } => {
                if s < w {
                    a * 0.5 * (PI / w) * (PI * s / w).sin()
                } else if s > self.tau - w {
                    -a * 0.5 * (PI / w) * (PI * (self.tau - s) / w).sin()
                } else {
                    0.0
                }
            }
            PulseShape::GaussianTruncated { cutoff } => {
                let sigma = self.tau / (2.0 * cutoff);
                let x = s - 0.5 * self.tau;
                -a * x / (sigma * sigma) * (-0.5 * x * x / (sigma * sigma)).exp()
            }
        })
    }

    pub fn is_differentiable(&self) -> bool {
        !matches!(self.shape, PulseShape::BoxcarSmoothed { edge_width } if edge_width == 0.0)
    }

    /// Points where the profile changes analytic form.
    fn breakpoints(&self) -> Vec<f64> {
        let mut pts = vec![self.t_start];
        if let PulseShape::BoxcarSmoothed { edge_width } = self.shape {
            if edge_width > 0.0 {
                pts.push(self.t_start + edge_width);
                pts.push(self.t_end() - edge_width);
            }
        }
        pts.push(self.t_end());
        pts
    }

    fn piecewise_integral(&self, f: impl Fn(f64) -> f64, upto: f64) -> f64 {
        let pts = self.breakpoints();
        let mut acc = 0.0;
        for w in pts.windows(2) {
            let (a, b) = (w[0], w[1].min(upto));
            if b > a {
                acc += gauss_legendre(&f, a, b);
            }
        }
        acc
    }

    /// `∫ g dt` by composite Gauss–Legendre quadrature over the analytic pieces.
    pub fn quadrature(&self) -> f64 {
        self.piecewise_integral(|t| self.evaluate(t), f64::INFINITY)
    }

    /// `G(t) = ∫_{t_start}^{t} g`.
    pub fn cumulative(&self, t: f64) -> f64 {
        self.piecewise_integral(|x| self.evaluate(x), t)
    }

    /// Quadrature of an arbitrary integrand over the pulse window, split at breakpoints.
    pub fn integrate_over_window(&self, f: impl Fn(f64) -> f64) -> f64 {
        self.piecewise_integral(f, f64::INFINITY)
    }

    /// Sum `Σ_k g(t_k)·dt` on a clock grid.
    pub fn grid_quadrature(&self, clock: &ClockModel) -> f64 {
        clock.times().iter().map(|&t| self.evaluate(t)).sum::<f64>() * clock.dt()
    }

    /// Number of clock grid points strictly inside the pulse window.
    pub fn support_points(&self, clock: &ClockModel) -> usize {
        clock.times().iter().filter(|&&t| t > self.t_start && t < self.t_end()).count()
    }

    pub fn check_support(&self, clock: &ClockModel) -> Result<()> {
        let tol = 1e-9 * clock.dt();
        if self.t_start < -tol || self.t_end() > clock.last_time() + tol {
            return Err(Error::InvalidParameter(format!(
                "pulse window [{}, {}] exceeds clock `{}` grid [0, {}]",
                self.t_start,
                self.t_end(),
                clock.label(),
                clock.last_time()
            )));
        }
        Ok(())
    }
}

/// Diagonal operator `g(T)` on the clock's factor.
pub fn as_clock_operator(pulse: &PulseProfile, clock: &ClockModel) -> Result<OperatorMatrix> {
    pulse.check_support(clock)?;
    Ok(clock.time_function(|t| pulse.evaluate(t)))
}

/// Diagonal operator `g′(T)` on the clock's factor.
pub fn derivative_clock_operator(pulse: &PulseProfile, clock: &ClockModel) -> Result<OperatorMatrix> {
    pulse.check_support(clock)?;
    let vals: Result<Vec<f64>> = clock.times().iter().map(|&t| pulse.derivative(t)).collect();
    OperatorMatrix::from_real_diagonal(clock.layout(), &vals?)
}
