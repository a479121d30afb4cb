//! Finite-dimensional laboratory for relational quantum clocks.
//!
//! Clocks are Fourier-conjugate (T, H) pairs on periodic grids, measurement
//! pointers are (Q, P) pairs, and every generator is a dense complex matrix
//! tagged with the tensor layout it acts on. Evolution uses a midpoint
//! exponential integrator backed by a Krylov exponential action.

pub mod clock;
pub mod dynamics;
pub mod error;
pub mod eta;
pub mod experiments;
mod fourier;
pub mod hamiltonians;
pub mod linalg;
pub mod pointer;
pub mod pulse;
pub mod structured;
pub mod tensor;

pub use error::{Error, Result};
pub use num_complex::Complex64 as C64;

/// Default reduced Planck constant.
pub const HBAR: f64 = 1.0;

/// Imaginary unit.
pub const I: C64 = C64::new(0.0, 1.0);
