//! Numerical kernels: Hermitian eigendecomposition, small dense exponentials,
//! and the Krylov action `exp(−i t H) v` used by the integrator.

use nalgebra::DMatrix;
use ndarray::{Array1, Array2};

use crate::{Error, Result, C64};

fn to_na(a: &Array2<C64>) -> DMatrix<C64> {
    let (r, c) = a.dim();
    DMatrix::from_fn(r, c, |i, j| a[[i, j]])
}

fn from_na(m: &DMatrix<C64>) -> Array2<C64> {
    Array2::from_shape_fn((m.nrows(), m.ncols()), |(i, j)| m[(i, j)])
}

/// Eigenvalues (ascending) and eigenvector columns of a Hermitian matrix.
pub fn eigh(a: &Array2<C64>) -> (Vec<f64>, Array2<C64>) {
    let sym = {
        let mut m = to_na(a);
        let adj = m.adjoint();
        m += adj;
        m *= C64::new(0.5, 0.0);
        m
    };
    let eig = nalgebra::SymmetricEigen::new(sym);
    let mut order: Vec<usize> = (0..eig.eigenvalues.len()).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));
    let vals = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    let n = a.nrows();
    let vecs = Array2::from_shape_fn((n, n), |(r, c)| eig.eigenvectors[(r, order[c])]);
    (vals, vecs)
}

/// `U diag(values) U†`.
pub fn reconstruct(u: &Array2<C64>, values: &[f64]) -> Array2<C64> {
    let mut scaled = u.clone();
    for (mut col, v) in scaled.columns_mut().into_iter().zip(values) {
        col.mapv_inplace(|z| z * *v);
    }
    scaled.dot(&u.t().mapv(|z| z.conj()))
}

/// Dense matrix exponential (Padé scaling and squaring); intended for small matrices.
pub fn expm(a: &Array2<C64>) -> Array2<C64> {
    from_na(&to_na(a).exp())
}

/// Inverse of a small dense matrix, `None` when singular.
pub fn inverse(a: &Array2<C64>) -> Option<Array2<C64>> {
    to_na(a).try_inverse().map(|m| from_na(&m))
}

/// Controls for the Krylov exponential action.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct KrylovOptions {
    /// Local error bound per unit of `t·‖v‖`.
    pub tol: f64,
    /// Maximum Krylov subspace dimension.
    pub max_dim: usize,
}

impl Default for KrylovOptions {
    fn default() -> Self {
        Self { tol: 1e-12, max_dim: 30 }
    }
}

fn vnorm(v: &Array1<C64>) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

fn vdot(a: &Array1<C64>, b: &Array1<C64>) -> C64 {
    a.iter().zip(b.iter()).map(|(x, y)| x.conj() * y).sum()
}

/// Small exponential `exp(−i t H_m)` of the leading `m×m` Hessenberg block.
fn small_exp(hm: &Array2<C64>, m: usize, t: f64) -> DMatrix<C64> {
    let a = DMatrix::from_fn(m, m, |i, j| hm[[i, j]] * C64::new(0.0, -t));
    a.exp()
}

/// Computes `exp(−i t H) v` by Arnoldi projection with adaptive substeps.
///
/// Works for non-Hermitian `H`; no unitarization is applied.
pub fn expmv(h: &Array2<C64>, v: &Array1<C64>, t: f64, opts: &KrylovOptions) -> Result<Array1<C64>> {
    let n = v.len();
    if h.dim() != (n, n) {
        return Err(Error::DimensionMismatch { expected: n, found: h.nrows() });
    }
    expmv_action(&|x: &Array1<C64>| h.dot(x), v, t, opts)
}

/// [`expmv`] for an operator given only through its action `x ↦ Hx`.
pub fn expmv_action(
    h: &dyn Fn(&Array1<C64>) -> Array1<C64>,
    v: &Array1<C64>,
    t: f64,
    opts: &KrylovOptions,
) -> Result<Array1<C64>> {
    let n = v.len();
    let mut w = v.clone();
    if t == 0.0 || vnorm(&w) == 0.0 {
        return Ok(w);
    }
    let m_max = opts.max_dim.max(1).min(n);
    let mut remaining = t;
    let mut rounds = 0usize;
    while remaining != 0.0 {
        rounds += 1;
        if rounds > 1_000_000 {
            return Err(Error::InvalidParameter("Krylov substep control failed to converge".into()));
        }
        let beta = vnorm(&w);
        if !beta.is_finite() {
            return Err(Error::NonFinite(t - remaining));
        }
        if beta == 0.0 {
            return Ok(w);
        }
        let mut basis: Vec<Array1<C64>> = Vec::with_capacity(m_max + 1);
        basis.push(w.mapv(|z| z / beta));
        let mut hm = Array2::<C64>::zeros((m_max + 1, m_max));
        let mut scale = 0.0f64;
        let mut done: Option<(usize, DMatrix<C64>, f64)> = None;
        let mut last_next = 0.0;
        for j in 0..m_max {
            let mut u = h(&basis[j]);
            for _ in 0..2 {
                for (i, b) in basis.iter().enumerate().take(j + 1) {
                    let c = vdot(b, &u);
                    hm[[i, j]] += c;
                    u.scaled_add(-c, b);
                }
            }
            let next = vnorm(&u);
            for i in 0..=j {
                scale = scale.max(hm[[i, j]].norm());
            }
            let m = j + 1;
            let breakdown = next <= 1e-14 * scale.max(1e-300) || m == n;
            let e = small_exp(&hm, m, remaining);
            let err = if breakdown { 0.0 } else { beta * next * remaining.abs() * e[(m - 1, 0)].norm() };
            if err <= opts.tol * beta * remaining.abs().max(1e-300) {
                done = Some((m, e, remaining));
                break;
            }
            last_next = next;
            if j + 1 < m_max {
                hm[[j + 1, j]] = C64::new(next, 0.0);
                basis.push(u.mapv(|z| z / next));
            }
        }
        let (m, e, step) = match done {
            Some(d) => d,
            None => {
                // Subspace exhausted: shrink the step until the estimate passes.
                let m = m_max;
                let mut s = remaining;
                loop {
                    s *= 0.5;
                    if s.abs() < 1e-14 * t.abs() {
                        return Err(Error::InvalidParameter("Krylov step underflow".into()));
                    }
                    let e = small_exp(&hm, m, s);
                    let err = beta * last_next * s.abs() * e[(m - 1, 0)].norm();
                    if err <= opts.tol * beta * s.abs() {
                        break (m, e, s);
                    }
                }
            }
        };
        let mut next_w = Array1::<C64>::zeros(n);
        for (i, b) in basis.iter().enumerate().take(m) {
            next_w.scaled_add(e[(i, 0)] * beta, b);
        }
        w = next_w;
        remaining -= step;
        if remaining.abs() <= 1e-15 * t.abs() {
            remaining = 0.0;
        }
    }
    if w.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
        return Err(Error::NonFinite(t));
    }
    Ok(w)
}
