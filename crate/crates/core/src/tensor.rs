//! Dense states and operators over labelled tensor-product spaces.
//!
//! Factor ordering is row-major: the last factor varies fastest in the flat
//! index, so `|a⟩⊗|b⟩` sits at `a * dim_b + b`.

use std::fmt;

use ndarray::{s, Array1, Array2};

use crate::linalg;
use crate::{Error, Result, C64};

/// Tolerance below which an operator counts as Hermitian for spectral calculus.
pub const HERMITIAN_TOL: f64 = 1e-10;

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct Factor {
    pub label: String,
    pub dim: usize,
}

/// Ordered list of labelled tensor factors.
#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub struct SpaceLayout {
    factors: Vec<Factor>,
    total_dim: usize,
}

impl SpaceLayout {
    pub fn new<S: AsRef<str>>(factors: &[(S, usize)]) -> Result<Self> {
        let mut out: Vec<Factor> = Vec::with_capacity(factors.len());
        for (label, dim) in factors {
            let label = label.as_ref();
            if *dim == 0 {
                return Err(Error::InvalidParameter(format!("factor `{label}` has dimension 0")));
            }
            if out.iter().any(|f| f.label == label) {
                return Err(Error::DuplicateFactor(label.to_string()));
            }
            out.push(Factor { label: label.to_string(), dim: *dim });
        }
        let total_dim = out.iter().map(|f| f.dim).product();
        Ok(Self { factors: out, total_dim })
    }

    pub fn single(label: &str, dim: usize) -> Result<Self> {
        Self::new(&[(label, dim)])
    }

    /// The zero-factor layout of a scalar (dimension 1).
    pub fn scalar() -> Self {
        Self { factors: Vec::new(), total_dim: 1 }
    }

    pub fn factors(&self) -> &[Factor] {
        &self.factors
    }

    pub fn total_dim(&self) -> usize {
        self.total_dim
    }

    pub fn labels(&self) -> Vec<&str> {
        self.factors.iter().map(|f| f.label.as_str()).collect()
    }

    pub fn position(&self, label: &str) -> Result<usize> {
        self.factors
            .iter()
            .position(|f| f.label == label)
            .ok_or_else(|| Error::UnknownFactor(label.to_string()))
    }

    pub fn contains(&self, label: &str) -> bool {
        self.factors.iter().any(|f| f.label == label)
    }

    pub fn dim_of(&self, label: &str) -> Result<usize> {
        Ok(self.factors[self.position(label)?].dim)
    }

    /// Layout with one factor removed.
    pub fn without(&self, label: &str) -> Result<Self> {
        let pos = self.position(label)?;
        let mut factors = self.factors.clone();
        factors.remove(pos);
        let total_dim = factors.iter().map(|f| f.dim).product();
        Ok(Self { factors, total_dim })
    }

    /// Concatenation `self ⊗ other`; labels must stay unique.
    pub fn concat(&self, other: &SpaceLayout) -> Result<Self> {
        let pairs: Vec<(&str, usize)> = self
            .factors
            .iter()
            .chain(other.factors.iter())
            .map(|f| (f.label.as_str(), f.dim))
            .collect();
        Self::new(&pairs)
    }

    /// Splits a flat index into per-factor indices.
    pub fn multi_index(&self, mut flat: usize) -> Vec<usize> {
        let mut idx = vec![0; self.factors.len()];
        for (k, f) in self.factors.iter().enumerate().rev() {
            idx[k] = flat % f.dim;
            flat /= f.dim;
        }
        idx
    }
}

impl fmt::Display for SpaceLayout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.factors.is_empty() {
            return write!(f, "scalar");
        }
        let parts: Vec<String> = self.factors.iter().map(|x| format!("{}({})", x.label, x.dim)).collect();
        write!(f, "{}", parts.join("⊗"))
    }
}

fn check_same(a: &SpaceLayout, b: &SpaceLayout) -> Result<()> {
    if a == b {
        Ok(())
    } else {
        Err(Error::LayoutMismatch(format!("{a} vs {b}")))
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    amplitudes: Array1<C64>,
    layout: SpaceLayout,
}

impl StateVector {
    pub fn new(layout: SpaceLayout, amplitudes: Array1<C64>) -> Result<Self> {
        if amplitudes.len() != layout.total_dim() {
            return Err(Error::DimensionMismatch { expected: layout.total_dim(), found: amplitudes.len() });
        }
        Ok(Self { amplitudes, layout })
    }

    pub fn from_vec(layout: SpaceLayout, amplitudes: Vec<C64>) -> Result<Self> {
        Self::new(layout, Array1::from(amplitudes))
    }

    pub fn zeros(layout: SpaceLayout) -> Self {
        let n = layout.total_dim();
        Self { amplitudes: Array1::zeros(n), layout }
    }

    pub fn basis(layout: SpaceLayout, index: usize) -> Result<Self> {
        let n = layout.total_dim();
        if index >= n {
            return Err(Error::IndexOutOfRange { index, dim: n });
        }
        let mut amplitudes = Array1::zeros(n);
        amplitudes[index] = C64::new(1.0, 0.0);
        Ok(Self { amplitudes, layout })
    }

    pub fn amplitudes(&self) -> &Array1<C64> {
        &self.amplitudes
    }

    pub fn layout(&self) -> &SpaceLayout {
        &self.layout
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn into_amplitudes(self) -> Array1<C64> {
        self.amplitudes
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amplitudes.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sqr().sqrt()
    }

    pub fn normalized(&self) -> Result<Self> {
        let n = self.norm();
        if !(n > 0.0) || !n.is_finite() {
            return Err(Error::InvalidParameter("cannot normalize a zero or non-finite state".into()));
        }
        Ok(self.scaled(C64::new(1.0 / n, 0.0)))
    }

    pub fn scaled(&self, c: C64) -> Self {
        Self { amplitudes: &self.amplitudes * c, layout: self.layout.clone() }
    }

    pub fn is_finite(&self) -> bool {
        self.amplitudes.iter().all(|a| a.re.is_finite() && a.im.is_finite())
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Result<C64> {
        check_same(&self.layout, &other.layout)?;
        Ok(self.amplitudes.iter().zip(other.amplitudes.iter()).map(|(a, b)| a.conj() * b).sum())
    }

    pub fn plus(&self, other: &StateVector) -> Result<Self> {
        check_same(&self.layout, &other.layout)?;
        Ok(Self { amplitudes: &self.amplitudes + &other.amplitudes, layout: self.layout.clone() })
    }

    pub fn minus(&self, other: &StateVector) -> Result<Self> {
        check_same(&self.layout, &other.layout)?;
        Ok(Self { amplitudes: &self.amplitudes - &other.amplitudes, layout: self.layout.clone() })
    }

    /// Tensor product `self ⊗ other`.
    pub fn tensor(&self, other: &StateVector) -> Result<Self> {
        let layout = self.layout.concat(&other.layout)?;
        let (na, nb) = (self.dim(), other.dim());
        let mut amplitudes = Array1::zeros(na * nb);
        for (i, a) in self.amplitudes.iter().enumerate() {
            if *a == C64::new(0.0, 0.0) {
                continue;
            }
            let mut block = amplitudes.slice_mut(s![i * nb..(i + 1) * nb]);
            block.zip_mut_with(&other.amplitudes, |x, b| *x = a * b);
        }
        Ok(Self { amplitudes, layout })
    }

    /// Same amplitudes under a relabelled layout with identical dimensions.
    pub fn with_layout(&self, layout: SpaceLayout) -> Result<Self> {
        Self::new(layout, self.amplitudes.clone())
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OperatorMatrix {
    entries: Array2<C64>,
    layout: SpaceLayout,
}

impl OperatorMatrix {
    pub fn new(layout: SpaceLayout, entries: Array2<C64>) -> Result<Self> {
        let n = layout.total_dim();
        let (r, c) = entries.dim();
        if r != c {
            return Err(Error::InvalidParameter(format!("operator is not square ({r}×{c})")));
        }
        if r != n {
            return Err(Error::DimensionMismatch { expected: n, found: r });
        }
        Ok(Self { entries, layout })
    }

    pub fn identity(layout: SpaceLayout) -> Self {
        let n = layout.total_dim();
        Self { entries: Array2::eye(n), layout }
    }

    pub fn zeros(layout: SpaceLayout) -> Self {
        let n = layout.total_dim();
        Self { entries: Array2::zeros((n, n)), layout }
    }

    pub fn from_real_diagonal(layout: SpaceLayout, diag: &[f64]) -> Result<Self> {
        let n = layout.total_dim();
        if diag.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: diag.len() });
        }
        let mut entries = Array2::zeros((n, n));
        for (k, d) in diag.iter().enumerate() {
            entries[[k, k]] = C64::new(*d, 0.0);
        }
        Ok(Self { entries, layout })
    }

    pub fn entries(&self) -> &Array2<C64> {
        &self.entries
    }

    pub fn into_entries(self) -> Array2<C64> {
        self.entries
    }

    pub fn layout(&self) -> &SpaceLayout {
        &self.layout
    }

    pub fn dim(&self) -> usize {
        self.entries.nrows()
    }

    pub fn adjoint(&self) -> Self {
        Self { entries: self.entries.t().mapv(|z| z.conj()), layout: self.layout.clone() }
    }

    pub fn scaled(&self, c: C64) -> Self {
        Self { entries: &self.entries * c, layout: self.layout.clone() }
    }

    pub fn scaled_re(&self, c: f64) -> Self {
        self.scaled(C64::new(c, 0.0))
    }

    pub fn plus(&self, other: &OperatorMatrix) -> Result<Self> {
        check_same(&self.layout, &other.layout)?;
        Ok(Self { entries: &self.entries + &other.entries, layout: self.layout.clone() })
    }

    pub fn minus(&self, other: &OperatorMatrix) -> Result<Self> {
        check_same(&self.layout, &other.layout)?;
        Ok(Self { entries: &self.entries - &other.entries, layout: self.layout.clone() })
    }

    /// In-place `self += c·other`.
    pub fn add_scaled(&mut self, c: C64, other: &OperatorMatrix) -> Result<()> {
        check_same(&self.layout, &other.layout)?;
        self.entries.scaled_add(c, &other.entries);
        Ok(())
    }

    /// Matrix product `self · other`.
    pub fn dot(&self, other: &OperatorMatrix) -> Result<Self> {
        check_same(&self.layout, &other.layout)?;
        Ok(Self { entries: self.entries.dot(&other.entries), layout: self.layout.clone() })
    }

    pub fn apply(&self, state: &StateVector) -> Result<StateVector> {
        check_same(&self.layout, &state.layout)?;
        Ok(StateVector { amplitudes: self.entries.dot(&state.amplitudes), layout: self.layout.clone() })
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.entries.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn trace(&self) -> C64 {
        self.entries.diag().sum()
    }

    /// True when every off-diagonal entry is exactly zero.
    pub fn is_diagonal(&self) -> bool {
        self.entries.indexed_iter().all(|((i, j), z)| i == j || *z == C64::new(0.0, 0.0))
    }

    /// Real parts of the diagonal.
    pub fn real_diagonal(&self) -> Vec<f64> {
        self.entries.diag().iter().map(|z| z.re).collect()
    }

    /// Kronecker product `self ⊗ other` with concatenated layout.
    pub fn tensor(&self, other: &OperatorMatrix) -> Result<Self> {
        let layout = self.layout.concat(&other.layout)?;
        Ok(Self { entries: kron(&self.entries, &other.entries), layout })
    }

    pub fn with_layout(&self, layout: SpaceLayout) -> Result<Self> {
        Self::new(layout, self.entries.clone())
    }

    /// `½(A + A†)`.
    pub fn hermitian_part(&self) -> Self {
        let mut e = &self.entries + &self.entries.t().mapv(|z| z.conj());
        e.mapv_inplace(|z| z * 0.5);
        Self { entries: e, layout: self.layout.clone() }
    }
}

pub fn kron(a: &Array2<C64>, b: &Array2<C64>) -> Array2<C64> {
    let (ar, ac) = a.dim();
    let (br, bc) = b.dim();
    let mut out = Array2::zeros((ar * br, ac * bc));
    for ((i, j), x) in a.indexed_iter() {
        if *x == C64::new(0.0, 0.0) {
            continue;
        }
        let mut block = out.slice_mut(s![i * br..(i + 1) * br, j * bc..(j + 1) * bc]);
        block.zip_mut_with(b, |o, y| *o = x * y);
    }
    out
}

/// `[A, B] = AB − BA`.
pub fn commutator(a: &OperatorMatrix, b: &OperatorMatrix) -> Result<OperatorMatrix> {
    a.dot(b)?.minus(&b.dot(a)?)
}

/// `{A, B} = AB + BA`.
pub fn anticommutator(a: &OperatorMatrix, b: &OperatorMatrix) -> Result<OperatorMatrix> {
    a.dot(b)?.plus(&b.dot(a)?)
}

/// Lifts a single-factor operator onto `layout`, acting as identity elsewhere.
pub fn lift_operator(op: &OperatorMatrix, factor_label: &str, layout: &SpaceLayout) -> Result<OperatorMatrix> {
    let dim = layout.dim_of(factor_label)?;
    if op.dim() != dim {
        return Err(Error::DimensionMismatch { expected: dim, found: op.dim() });
    }
    let relabeled = op.with_layout(SpaceLayout::single(factor_label, dim)?)?;
    embed(&relabeled, layout)
}

/// Embeds an operator whose layout names a subset of `layout`'s factors.
///
/// The sub-factors may appear in any order and need not be adjacent.
pub fn embed(op: &OperatorMatrix, layout: &SpaceLayout) -> Result<OperatorMatrix> {
    if op.layout() == layout {
        return Ok(op.clone());
    }
    let sub = op.layout();
    let mut positions = Vec::with_capacity(sub.factors().len());
    for f in sub.factors() {
        let pos = layout.position(&f.label)?;
        let full_dim = layout.factors()[pos].dim;
        if full_dim != f.dim {
            return Err(Error::DimensionMismatch { expected: full_dim, found: f.dim });
        }
        positions.push(pos);
    }
    let n = layout.total_dim();
    let n_sub = sub.total_dim();
    let n_rest = n / n_sub;
    // groups[r * n_sub + a] = flat index with rest index r and sub index a.
    let mut groups = vec![0usize; n];
    for flat in 0..n {
        let digits = layout.multi_index(flat);
        let mut a = 0;
        for (k, &pos) in positions.iter().enumerate() {
            a = a * sub.factors()[k].dim + digits[pos];
        }
        let mut r = 0;
        for (pos, f) in layout.factors().iter().enumerate() {
            if !positions.contains(&pos) {
                r = r * f.dim + digits[pos];
            }
        }
        groups[r * n_sub + a] = flat;
    }
    let mut entries = Array2::zeros((n, n));
    let src = op.entries();
    for r in 0..n_rest {
        let idx = &groups[r * n_sub..(r + 1) * n_sub];
        for (a, &i) in idx.iter().enumerate() {
            for (b, &j) in idx.iter().enumerate() {
                let v = src[[a, b]];
                if v != C64::new(0.0, 0.0) {
                    entries[[i, j]] = v;
                }
            }
        }
    }
    OperatorMatrix::new(layout.clone(), entries)
}

/// Tensor product of single-factor operators on distinct factors, embedded in `layout`.
pub fn tensor_embed(layout: &SpaceLayout, ops: &[(&str, &OperatorMatrix)]) -> Result<OperatorMatrix> {
    let mut acc: Option<OperatorMatrix> = None;
    for (label, op) in ops {
        let dim = layout.dim_of(label)?;
        if op.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: op.dim() });
        }
        let single = op.with_layout(SpaceLayout::single(label, dim)?)?;
        acc = Some(match acc {
            None => single,
            Some(a) => a.tensor(&single)?,
        });
    }
    match acc {
        None => Ok(OperatorMatrix::identity(layout.clone())),
        Some(a) => embed(&a, layout),
    }
}

/// Anything that acts linearly on states of a fixed layout.
pub trait LinearMap {
    fn layout(&self) -> &SpaceLayout;

    fn apply_amplitudes(&self, v: &Array1<C64>) -> Array1<C64>;

    fn apply_to(&self, state: &StateVector) -> Result<StateVector> {
        check_same(self.layout(), state.layout())?;
        Ok(StateVector { amplitudes: self.apply_amplitudes(state.amplitudes()), layout: state.layout().clone() })
    }
}

impl LinearMap for OperatorMatrix {
    fn layout(&self) -> &SpaceLayout {
        &self.layout
    }

    fn apply_amplitudes(&self, v: &Array1<C64>) -> Array1<C64> {
        self.entries.dot(v)
    }
}

/// `⟨ψ|A|ψ⟩`.
pub fn expectation<O: LinearMap + ?Sized>(state: &StateVector, op: &O) -> Result<C64> {
    let a_psi = op.apply_to(state)?;
    state.inner(&a_psi)
}

/// Real expectation divided by the state's squared norm.
pub fn mean_value<O: LinearMap + ?Sized>(state: &StateVector, op: &O) -> Result<f64> {
    Ok(expectation(state, op)?.re / state.norm_sqr())
}

/// Mean and variance of a Hermitian observable in a (possibly unnormalized) state.
pub fn mean_and_variance<O: LinearMap + ?Sized>(state: &StateVector, op: &O) -> Result<(f64, f64)> {
    let a_psi = op.apply_to(state)?;
    let n = state.norm_sqr();
    let mean = state.inner(&a_psi)?.re / n;
    let second = a_psi.norm_sqr() / n;
    Ok((mean, (second - mean * mean).max(0.0)))
}

/// `‖A − A†‖_F`.
pub fn hermiticity_defect(op: &OperatorMatrix) -> f64 {
    let e = op.entries();
    let n = e.nrows();
    let mut acc = 0.0;
    for i in 0..n {
        for j in 0..n {
            acc += (e[[i, j]] - e[[j, i]].conj()).norm_sqr();
        }
    }
    acc.sqrt()
}

fn require_hermitian(op: &OperatorMatrix) -> Result<()> {
    let defect = hermiticity_defect(op);
    if defect > HERMITIAN_TOL {
        return Err(Error::NotHermitian(defect));
    }
    Ok(())
}

/// Real eigenvalues and eigenvector columns of a Hermitian operator.
///
/// Exactly diagonal operators short-circuit to their diagonal.
pub fn hermitian_spectrum(op: &OperatorMatrix) -> Result<(Vec<f64>, Option<Array2<C64>>)> {
    require_hermitian(op)?;
    if op.is_diagonal() {
        return Ok((op.real_diagonal(), None));
    }
    let (vals, vecs) = linalg::eigh(op.entries());
    Ok((vals, Some(vecs)))
}

/// Spectral calculus `f(A)` for Hermitian `A`.
pub fn operator_function(op: &OperatorMatrix, f: impl Fn(f64) -> f64) -> Result<OperatorMatrix> {
    let (vals, vecs) = hermitian_spectrum(op)?;
    let mapped: Vec<f64> = vals.iter().map(|&x| f(x)).collect();
    match vecs {
        None => OperatorMatrix::from_real_diagonal(op.layout().clone(), &mapped),
        Some(u) => {
            let m = linalg::reconstruct(&u, &mapped);
            Ok(OperatorMatrix::new(op.layout().clone(), m)?.hermitian_part())
        }
    }
}

/// A joint function of commuting Hermitian operators living on distinct factors.
#[derive(Clone, Debug)]
pub struct ProductFunction {
    pub operator: OperatorMatrix,
    /// Spectrum of `operator` on the full layout, with multiplicities.
    pub spectrum: Vec<f64>,
}

/// Evaluates `f(A_1, …, A_m)` where each `A_k` is Hermitian on its own factor.
///
/// `f` receives one eigenvalue per factor, in the order given.
pub fn product_function(
    layout: &SpaceLayout,
    ops: &[(&str, &OperatorMatrix)],
    f: impl Fn(&[f64]) -> f64,
) -> Result<ProductFunction> {
    if ops.is_empty() {
        return Err(Error::InvalidParameter("product_function needs at least one operator".into()));
    }
    let mut spectra = Vec::with_capacity(ops.len());
    let mut sub_factors = Vec::with_capacity(ops.len());
    for (label, op) in ops {
        let dim = layout.dim_of(label)?;
        if op.dim() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: op.dim() });
        }
        sub_factors.push((label.to_string(), dim));
        spectra.push(hermitian_spectrum(op)?);
    }
    let sub_layout = SpaceLayout::new(&sub_factors)?;
    let n_sub = sub_layout.total_dim();
    let mut values = Vec::with_capacity(n_sub);
    let mut args = vec![0.0; ops.len()];
    for flat in 0..n_sub {
        for (k, d) in sub_layout.multi_index(flat).into_iter().enumerate() {
            args[k] = spectra[k].0[d];
        }
        values.push(f(&args));
    }
    let all_diagonal = spectra.iter().all(|(_, v)| v.is_none());
    let sub_op = if all_diagonal {
        OperatorMatrix::from_real_diagonal(sub_layout.clone(), &values)?
    } else {
        let mut u: Option<Array2<C64>> = None;
        for (vals, vecs) in &spectra {
            let uk = vecs.clone().unwrap_or_else(|| Array2::eye(vals.len()));
            u = Some(match u {
                None => uk,
                Some(acc) => kron(&acc, &uk),
            });
        }
        let m = linalg::reconstruct(&u.expect("non-empty"), &values);
        OperatorMatrix::new(sub_layout.clone(), m)?.hermitian_part()
    };
    let rest = layout.total_dim() / n_sub;
    let mut spectrum = Vec::with_capacity(layout.total_dim());
    for v in &values {
        spectrum.extend(std::iter::repeat_n(*v, rest));
    }
    Ok(ProductFunction { operator: embed(&sub_op, layout)?, spectrum })
}

/// Partial inner product with basis vector `index` of the labelled factor.
pub fn condition(state: &StateVector, factor_label: &str, index: usize) -> Result<StateVector> {
    let layout = state.layout();
    let pos = layout.position(factor_label)?;
    let dim = layout.factors()[pos].dim;
    if index >= dim {
        return Err(Error::IndexOutOfRange { index, dim });
    }
    let inner: usize = layout.factors()[pos + 1..].iter().map(|f| f.dim).product();
    let outer: usize = layout.factors()[..pos].iter().map(|f| f.dim).product();
    let amps = state.amplitudes();
    let mut out = Array1::zeros(outer * inner);
    for o in 0..outer {
        let src = (o * dim + index) * inner;
        out.slice_mut(s![o * inner..(o + 1) * inner]).assign(&amps.slice(s![src..src + inner]));
    }
    StateVector::new(layout.without(factor_label)?, out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn flip() -> OperatorMatrix {
        let e = ndarray::array![[c(0.0), c(1.0)], [c(1.0), c(0.0)]];
        OperatorMatrix::new(SpaceLayout::single("q", 2).unwrap(), e).unwrap()
    }

    fn two_qubits() -> SpaceLayout {
        SpaceLayout::new(&[("a", 2), ("b", 2)]).unwrap()
    }

    #[test]
    fn layout_rejects_duplicates_and_counts_dims() {
        assert!(matches!(SpaceLayout::new(&[("a", 2), ("a", 3)]), Err(Error::DuplicateFactor(_))));
        let l = SpaceLayout::new(&[("a", 2), ("b", 3), ("c", 5)]).unwrap();
        assert_eq!(l.total_dim(), 30);
        assert_eq!(l.multi_index(29), vec![1, 2, 4]);
        assert_eq!(l.without("b").unwrap().total_dim(), 10);
    }

    #[test]
    fn lifted_flip_acts_on_first_factor() {
        let layout = two_qubits();
        let f = lift_operator(&flip(), "a", &layout).unwrap();
        let psi = StateVector::basis(layout.clone(), 0).unwrap();
        let out = f.apply(&psi).unwrap();
        assert_eq!(out, StateVector::basis(layout, 2).unwrap());
    }

    #[test]
    fn lift_identity_is_identity() {
        let layout = SpaceLayout::new(&[("a", 3), ("b", 2)]).unwrap();
        let id = OperatorMatrix::identity(SpaceLayout::single("b", 2).unwrap());
        assert_eq!(lift_operator(&id, "b", &layout).unwrap(), OperatorMatrix::identity(layout));
    }

    #[test]
    fn lift_diag_on_second_factor() {
        let layout = two_qubits();
        let d = OperatorMatrix::from_real_diagonal(SpaceLayout::single("x", 2).unwrap(), &[1.0, 2.0]).unwrap();
        let lifted = lift_operator(&d, "b", &layout).unwrap();
        let expected = OperatorMatrix::from_real_diagonal(layout, &[1.0, 2.0, 1.0, 2.0]).unwrap();
        assert_eq!(lifted, expected);
    }

    #[test]
    fn lift_errors() {
        let layout = two_qubits();
        assert!(matches!(lift_operator(&flip(), "z", &layout), Err(Error::UnknownFactor(_))));
        let three = OperatorMatrix::identity(SpaceLayout::single("x", 3).unwrap());
        assert!(matches!(lift_operator(&three, "a", &layout), Err(Error::DimensionMismatch { .. })));
    }

    #[test]
    fn embed_handles_non_adjacent_factors() {
        // Operator on (c, a) embedded into a⊗b⊗c must match the explicit product.
        let layout = SpaceLayout::new(&[("a", 2), ("b", 3), ("c", 2)]).unwrap();
        let za = OperatorMatrix::from_real_diagonal(SpaceLayout::single("a", 2).unwrap(), &[1.0, -1.0]).unwrap();
        let xc = flip().with_layout(SpaceLayout::single("c", 2).unwrap()).unwrap();
        let joint = xc.tensor(&za).unwrap();
        let embedded = embed(&joint, &layout).unwrap();
        let explicit = lift_operator(&za, "a", &layout).unwrap().dot(&lift_operator(&xc, "c", &layout).unwrap()).unwrap();
        assert!(embedded.minus(&explicit).unwrap().frobenius_norm() < 1e-15);
        let via_tensor = tensor_embed(&layout, &[("c", &xc), ("a", &za)]).unwrap();
        assert_eq!(via_tensor, embedded);
    }

    #[test]
    fn flip_expectations() {
        let l = SpaceLayout::single("q", 2).unwrap();
        let zero = StateVector::basis(l.clone(), 0).unwrap();
        assert_eq!(expectation(&zero, &flip()).unwrap(), c(0.0));
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let plus = StateVector::from_vec(l, vec![c(h), c(h)]).unwrap();
        assert!((expectation(&plus, &flip()).unwrap() - c(1.0)).norm() < 1e-15);
    }

    #[test]
    fn operator_function_examples() {
        let l = SpaceLayout::single("q", 2).unwrap();
        let d = OperatorMatrix::from_real_diagonal(l.clone(), &[0.0, 2f64.ln()]).unwrap();
        let e = operator_function(&d, f64::exp).unwrap();
        assert!((e.entries()[[0, 0]] - c(1.0)).norm() < 1e-15);
        assert!((e.entries()[[1, 1]] - c(2.0)).norm() < 1e-15);
        let x = flip();
        let same = operator_function(&x, |v| v).unwrap();
        assert!(same.minus(&x).unwrap().frobenius_norm() < 1e-14);
        let not_h = OperatorMatrix::new(l, ndarray::array![[c(0.0), c(1.0)], [c(0.0), c(0.0)]]).unwrap();
        assert!(matches!(operator_function(&not_h, |v| v), Err(Error::NotHermitian(_))));
    }

    #[test]
    fn defect_of_nilpotent_is_sqrt_two() {
        let l = SpaceLayout::single("q", 2).unwrap();
        let a = OperatorMatrix::new(l, ndarray::array![[c(0.0), c(1.0)], [c(0.0), c(0.0)]]).unwrap();
        assert!((hermiticity_defect(&a) - 2f64.sqrt()).abs() < 1e-15);
        assert_eq!(hermiticity_defect(&flip()), 0.0);
    }

    #[test]
    fn conditioning_examples() {
        let layout = two_qubits();
        let h = std::f64::consts::FRAC_1_SQRT_2;
        let phi = StateVector::from_vec(SpaceLayout::single("b", 2).unwrap(), vec![c(0.6), C64::new(0.0, 0.8)]).unwrap();
        let zero = StateVector::basis(SpaceLayout::single("a", 2).unwrap(), 0).unwrap();
        let prod = zero.tensor(&phi).unwrap();
        assert_eq!(condition(&prod, "a", 0).unwrap(), phi);
        assert_eq!(condition(&prod, "a", 1).unwrap().norm(), 0.0);
        let bell = StateVector::from_vec(layout, vec![c(h), c(0.0), c(0.0), c(h)]).unwrap();
        let out = condition(&bell, "a", 0).unwrap();
        assert_eq!(out.amplitudes().to_vec(), vec![c(h), c(0.0)]);
        assert!(matches!(condition(&bell, "a", 2), Err(Error::IndexOutOfRange { .. })));
        assert!(matches!(condition(&bell, "z", 0), Err(Error::UnknownFactor(_))));
    }

    #[test]
    fn product_function_matches_explicit_resolvent() {
        let layout = SpaceLayout::new(&[("a", 2), ("s", 2), ("e", 2)]).unwrap();
        let g = OperatorMatrix::from_real_diagonal(SpaceLayout::single("a", 2).unwrap(), &[0.0, 0.5]).unwrap();
        let p = flip().scaled_re(2.0);
        let pf = product_function(&layout, &[("a", &g), ("e", &p)], |x| 1.0 / (1.0 + x[0] * x[1].max(0.0))).unwrap();
        // On a=1 the e-block is (I + 0.5·P₊)^{-1} with P₊ = |+⟩⟨+|·2, i.e. I − ½|+⟩⟨+|.
        let ga = lift_operator(&g, "a", &layout).unwrap();
        let pe = lift_operator(&p.scaled_re(0.25).plus(&OperatorMatrix::identity(p.layout().clone()).scaled_re(0.5)).unwrap(), "e", &layout).unwrap();
        let expected = OperatorMatrix::identity(layout.clone()).minus(&ga.dot(&pe).unwrap()).unwrap();
        assert!(pf.operator.minus(&expected).unwrap().frobenius_norm() < 1e-14);
        let mut spec = pf.spectrum.clone();
        spec.sort_by(f64::total_cmp);
        assert_eq!(spec.len(), 8);
        assert!((spec[0] - 0.5).abs() < 1e-15 && (spec[7] - 1.0).abs() < 1e-15);
    }
}
