//! Builders for the reference, measurement, effective and multi-clock generators.
//!
//! Factor labels come from the models passed in; the system factor is always `"S"`.

use std::borrow::Cow;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::clock::ClockModel;
use crate::dynamics::{Action, Generator};
use crate::pointer::PointerModel;
use crate::pulse::{as_clock_operator, PulseProfile};
use crate::structured::StructuredOperator;
use crate::tensor::{
    anticommutator, embed, hermiticity_defect, lift_operator, product_function, tensor_embed, OperatorMatrix,
    SpaceLayout, HERMITIAN_TOL,
};
use crate::{Error, Result, C64};

pub const SYSTEM_LABEL: &str = "S";

/// Scalar time profile `f_int(t_B)` of the separable interaction `f_int(T_B)⊗V`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InteractionProfile {
    #[default]
    None,
    Constant { value: f64 },
    Linear { slope: f64, offset: f64 },
    Sine { amplitude: f64, period: f64, #[serde(default)] phase: f64 },
    Gaussian { amplitude: f64, center: f64, width: f64 },
}

impl InteractionProfile {
    pub fn eval(&self, t: f64) -> f64 {
        match *self {
            InteractionProfile::None => 0.0,
            InteractionProfile::Constant { value } => value,
            InteractionProfile::Linear { slope, offset } => slope * t + offset,
            InteractionProfile::Sine { amplitude, period, phase } => {
                amplitude * (2.0 * std::f64::consts::PI * t / period + phase).sin()
            }
            InteractionProfile::Gaussian { amplitude, center, width } => {
                amplitude * (-0.5 * ((t - center) / width).powi(2)).exp()
            }
        }
    }

    pub fn is_none(&self) -> bool {
        matches!(self, InteractionProfile::None)
    }
}

/// The measured system `S`: its Hamiltonian and an optional separable coupling to clock B.
#[derive(Clone, Debug)]
pub struct SystemSpec {
    h_s: OperatorMatrix,
    coupling: Option<(OperatorMatrix, InteractionProfile)>,
}

impl SystemSpec {
    /// One-dimensional system with `H_S = 0`.
    pub fn trivial() -> Self {
        Self { h_s: OperatorMatrix::zeros(SpaceLayout::single(SYSTEM_LABEL, 1).expect("valid")), coupling: None }
    }

    pub fn new(h_s: &OperatorMatrix) -> Result<Self> {
        let defect = hermiticity_defect(h_s);
        if defect > HERMITIAN_TOL {
            return Err(Error::NotHermitian(defect));
        }
        let h_s = h_s.with_layout(SpaceLayout::single(SYSTEM_LABEL, h_s.dim())?)?;
        Ok(Self { h_s, coupling: None })
    }

    pub fn diagonal(energies: &[f64]) -> Result<Self> {
        if energies.is_empty() {
            return Err(Error::InvalidParameter("system needs at least one level".into()));
        }
        Self::new(&OperatorMatrix::from_real_diagonal(SpaceLayout::single(SYSTEM_LABEL, energies.len())?, energies)?)
    }

    pub fn with_interaction(mut self, v: &OperatorMatrix, profile: InteractionProfile) -> Result<Self> {
        if v.dim() != self.dim() {
            return Err(Error::DimensionMismatch { expected: self.dim(), found: v.dim() });
        }
        let defect = hermiticity_defect(v);
        if defect > HERMITIAN_TOL {
            return Err(Error::NotHermitian(defect));
        }
        self.coupling = Some((v.with_layout(self.layout())?, profile));
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.h_s.dim()
    }

    pub fn layout(&self) -> SpaceLayout {
        self.h_s.layout().clone()
    }

    pub fn h_s(&self) -> &OperatorMatrix {
        &self.h_s
    }

    pub fn coupling(&self) -> Option<&(OperatorMatrix, InteractionProfile)> {
        self.coupling.as_ref()
    }

    pub fn f_int(&self, t: f64) -> f64 {
        self.coupling.as_ref().map_or(0.0, |(_, p)| p.eval(t))
    }

    pub fn has_interaction(&self) -> bool {
        self.coupling.as_ref().is_some_and(|(_, p)| !p.is_none())
    }
}

/// `H_R = H_B + H_S + f_int(T_B)⊗V` on `B⊗S`.
pub fn build_hr(clock_b: &ClockModel, system: &SystemSpec) -> Result<OperatorMatrix> {
    let layout = clock_b.layout().concat(&system.layout())?;
    let mut hr = lift_operator(clock_b.hamiltonian(), clock_b.label(), &layout)?;
    hr.add_scaled(C64::new(1.0, 0.0), &lift_operator(system.h_s(), SYSTEM_LABEL, &layout)?)?;
    if let Some((v, profile)) = system.coupling() {
        let f = clock_b.time_function(|t| profile.eval(t));
        hr.add_scaled(C64::new(1.0, 0.0), &tensor_embed(&layout, &[(clock_b.label(), &f), (SYSTEM_LABEL, v)])?)?;
    }
    Ok(hr)
}

/// Interaction part `f_int(T_B)⊗V` on `B⊗S` (zero without coupling).
pub fn build_interaction(clock_b: &ClockModel, system: &SystemSpec) -> Result<OperatorMatrix> {
    let layout = clock_b.layout().concat(&system.layout())?;
    match system.coupling() {
        None => Ok(OperatorMatrix::zeros(layout)),
        Some((v, profile)) => {
            let f = clock_b.time_function(|t| profile.eval(t));
            tensor_embed(&layout, &[(clock_b.label(), &f), (SYSTEM_LABEL, v)])
        }
    }
}

/// Appends `c · H_R ⊗ extra` to `op`, term by term (`H_B`, `H_S`, `f_int(T_B)⊗V`).
fn add_hr_terms(
    op: &mut StructuredOperator,
    c: C64,
    clock_b: &ClockModel,
    system: &SystemSpec,
    clock_weight: Option<&OperatorMatrix>,
    extra: &[&OperatorMatrix],
) -> Result<()> {
    fn with<'b>(first: Vec<&'b OperatorMatrix>, extra: &[&'b OperatorMatrix]) -> Vec<&'b OperatorMatrix> {
        first.into_iter().chain(extra.iter().copied()).collect()
    }
    match clock_weight {
        None => op.add_product(c, &with(vec![clock_b.hamiltonian()], extra))?,
        Some(g) => {
            // ½{g(T_B), H_B}
            let sym = anticommutator(g, clock_b.hamiltonian())?.scaled_re(0.5);
            op.add_product(c, &with(vec![&sym], extra))?;
        }
    }
    if system.h_s().frobenius_norm() > 0.0 {
        match clock_weight {
            None => op.add_product(c, &with(vec![system.h_s()], extra))?,
            Some(g) => op.add_product(c, &with(vec![g, system.h_s()], extra))?,
        }
    }
    if let Some((v, profile)) = system.coupling() {
        if !profile.is_none() {
            let f = clock_b.time_function(|t| profile.eval(t));
            let f = match clock_weight {
                None => f,
                Some(g) => f.dot(g)?,
            };
            op.add_product(c, &with(vec![&f, v], extra))?;
        }
    }
    Ok(())
}

/// Layout `B⊗S⊗X` used by the B-clocked generators.
fn clocked_layout(clock: &ClockModel, system: &SystemSpec, pointer: &PointerModel) -> Result<SpaceLayout> {
    SpaceLayout::new(&[(clock.label(), clock.dim()), (SYSTEM_LABEL, system.dim()), (pointer.label(), pointer.dim())])
}

/// `H_R` on `B⊗S` in factored form.
pub fn build_hr_structured(clock_b: &ClockModel, system: &SystemSpec) -> Result<StructuredOperator> {
    let mut op = StructuredOperator::zero(clock_b.layout().concat(&system.layout())?);
    add_hr_terms(&mut op, C64::new(1.0, 0.0), clock_b, system, None, &[])?;
    Ok(op)
}

/// `½{w(T_B), H_R}⊗extra` on `layout` (plain `H_R⊗extra` without a weight), for use as an observable.
pub fn hr_observable(
    layout: &SpaceLayout,
    clock_b: &ClockModel,
    system: &SystemSpec,
    clock_weight: Option<&OperatorMatrix>,
    extra: &[&OperatorMatrix],
) -> Result<StructuredOperator> {
    let mut op = StructuredOperator::zero(layout.clone());
    add_hr_terms(&mut op, C64::new(1.0, 0.0), clock_b, system, clock_weight, extra)?;
    Ok(op)
}

/// `H1(t) = H_R⊗I + g(t)·H_R⊗P_E` on `B⊗S⊗E`.
#[derive(Clone, Debug)]
pub struct H1Family {
    free: StructuredOperator,
    coupled: StructuredOperator,
    pulse: PulseProfile,
}

impl H1Family {
    pub fn new(clock_b: &ClockModel, system: &SystemSpec, pulse: &PulseProfile, pointer_e: &PointerModel) -> Result<Self> {
        let layout = clocked_layout(clock_b, system, pointer_e)?;
        let mut free = StructuredOperator::zero(layout.clone());
        add_hr_terms(&mut free, C64::new(1.0, 0.0), clock_b, system, None, &[])?;
        let mut coupled = StructuredOperator::zero(layout);
        add_hr_terms(&mut coupled, C64::new(1.0, 0.0), clock_b, system, None, &[pointer_e.momentum_op()])?;
        Ok(Self { free, coupled, pulse: *pulse })
    }

    pub fn layout(&self) -> &SpaceLayout {
        self.free.layout()
    }

    pub fn pulse(&self) -> &PulseProfile {
        &self.pulse
    }

    pub fn structured_at(&self, t: f64) -> StructuredOperator {
        let g = self.pulse.evaluate(t);
        let mut h = self.free.clone();
        if g != 0.0 {
            h.add_scaled(C64::new(g, 0.0), &self.coupled).expect("same layout");
        }
        h
    }
}

impl Generator for H1Family {
    fn action(&self, t: f64) -> Action<'_> {
        if self.pulse.evaluate(t) == 0.0 {
            Action::Structured(Cow::Borrowed(&self.free))
        } else {
            Action::Structured(Cow::Owned(self.structured_at(t)))
        }
    }
}

/// Dense `H1(t)` from a dense `H_R`.
pub fn build_h1(hr: &OperatorMatrix, pulse: &PulseProfile, pointer_e: &PointerModel, t: f64) -> Result<OperatorMatrix> {
    let mut h = hr.tensor(&OperatorMatrix::identity(pointer_e.layout()))?;
    let g = pulse.evaluate(t);
    if g != 0.0 {
        h.add_scaled(C64::new(g, 0.0), &hr.tensor(pointer_e.momentum_op())?)?;
    }
    Ok(h)
}

/// Resolvent `(I + g(T)⊗P₊)^{-1}` on `layout`, by joint spectral calculus.
pub fn clock_pointer_resolvent(
    layout: &SpaceLayout,
    pulse: &PulseProfile,
    clock: &ClockModel,
    pointer: &PointerModel,
) -> Result<OperatorMatrix> {
    let g = as_clock_operator(pulse, clock)?;
    check_resolvent(&g, pointer)?;
    let pf = product_function(layout, &[(clock.label(), &g), (pointer.label(), pointer.momentum_op())], |x| {
        1.0 / (1.0 + x[0] * x[1].max(0.0))
    })?;
    Ok(pf.operator)
}

fn check_resolvent(g: &OperatorMatrix, pointer: &PointerModel) -> Result<()> {
    let mut min_denominator = f64::INFINITY;
    for gv in g.real_diagonal() {
        for pv in pointer.momenta() {
            min_denominator = min_denominator.min(1.0 + gv * pv.max(0.0));
        }
    }
    if min_denominator <= 1e-12 {
        return Err(Error::Singular(format!("I + g·P has eigenvalue {min_denominator:e}")));
    }
    Ok(())
}

/// `H2(t_B) = (I + g(T_A)P₊)^{-1} H_A + H_S + f_int(t_B) V` on `A⊗S⊗E`.
#[derive(Clone, Debug)]
pub struct H2Family {
    clock_a: ClockModel,
    pointer_e: PointerModel,
    pulse: PulseProfile,
    system: SystemSpec,
    base: StructuredOperator,
    interaction: Option<(StructuredOperator, InteractionProfile)>,
}

impl H2Family {
    pub fn new(clock_a: &ClockModel, pulse: &PulseProfile, pointer_e: &PointerModel, system: &SystemSpec) -> Result<Self> {
        let layout = clocked_layout(clock_a, system, pointer_e)?;
        let g = as_clock_operator(pulse, clock_a)?;
        check_resolvent(&g, pointer_e)?;
        let mut base = StructuredOperator::zero(layout.clone());
        base.add_spectral_then_product(
            C64::new(1.0, 0.0),
            &[&g, pointer_e.momentum_op()],
            |x| 1.0 / (1.0 + x[0] * x[1].max(0.0)),
            &[clock_a.hamiltonian()],
        )?;
        if system.h_s().frobenius_norm() > 0.0 {
            base.add_product(C64::new(1.0, 0.0), &[system.h_s()])?;
        }
        let interaction = match system.coupling() {
            Some((v, profile)) if !profile.is_none() => {
                Some((StructuredOperator::zero(layout).with_product(C64::new(1.0, 0.0), &[v])?, *profile))
            }
            _ => None,
        };
        Ok(Self { clock_a: clock_a.clone(), pointer_e: pointer_e.clone(), pulse: *pulse, system: system.clone(), base, interaction })
    }

    pub fn layout(&self) -> &SpaceLayout {
        self.base.layout()
    }

    pub fn structured_at(&self, t_b: f64) -> StructuredOperator {
        let mut h = self.base.clone();
        if let Some((v, profile)) = &self.interaction {
            h.add_scaled(C64::new(profile.eval(t_b), 0.0), v).expect("same layout");
        }
        h
    }

    /// Dense `H2(t_B)`, assembled independently of the factored form.
    pub fn at(&self, t_b: f64) -> Result<OperatorMatrix> {
        build_h2(&self.clock_a, &self.pulse, &self.pointer_e, &self.system, t_b)
    }
}

impl Generator for H2Family {
    fn action(&self, t: f64) -> Action<'_> {
        match self.interaction {
            None => Action::Structured(Cow::Borrowed(&self.base)),
            Some(_) => Action::Structured(Cow::Owned(self.structured_at(t))),
        }
    }
}

pub fn build_h2(
    clock_a: &ClockModel,
    pulse: &PulseProfile,
    pointer_e: &PointerModel,
    system: &SystemSpec,
    t_b: f64,
) -> Result<OperatorMatrix> {
    let layout = clocked_layout(clock_a, system, pointer_e)?;
    let resolvent = clock_pointer_resolvent(&layout, pulse, clock_a, pointer_e)?;
    let h_a = lift_operator(clock_a.hamiltonian(), clock_a.label(), &layout)?;
    let mut h = resolvent.dot(&h_a)?;
    h.add_scaled(C64::new(1.0, 0.0), &lift_operator(system.h_s(), SYSTEM_LABEL, &layout)?)?;
    if let Some((v, profile)) = system.coupling() {
        h.add_scaled(C64::new(profile.eval(t_b), 0.0), &lift_operator(v, SYSTEM_LABEL, &layout)?)?;
    }
    Ok(h)
}

/// `H3 = H_R + ½{g(T_B), H_R}⊗P_I` on `B⊗S⊗I`; time independent.
pub fn build_h3(
    clock_b: &ClockModel,
    pulse: &PulseProfile,
    pointer_i: &PointerModel,
    hr: &OperatorMatrix,
) -> Result<OperatorMatrix> {
    let g = lift_operator(&as_clock_operator(pulse, clock_b)?, clock_b.label(), hr.layout())?;
    let sym = anticommutator(&g, hr)?.scaled_re(0.5);
    let mut h = hr.tensor(&OperatorMatrix::identity(pointer_i.layout()))?;
    h.add_scaled(C64::new(1.0, 0.0), &sym.tensor(pointer_i.momentum_op())?)?;
    Ok(h)
}

/// [`build_h3`] in factored form. With `f_int(T_B)` diagonal, `½{g, f⊗V} = g f⊗V` and `½{g, H_S} = g⊗H_S`.
pub fn build_h3_structured(
    clock_b: &ClockModel,
    pulse: &PulseProfile,
    pointer_i: &PointerModel,
    system: &SystemSpec,
) -> Result<StructuredOperator> {
    let g = as_clock_operator(pulse, clock_b)?;
    let mut h = StructuredOperator::zero(clocked_layout(clock_b, system, pointer_i)?);
    add_hr_terms(&mut h, C64::new(1.0, 0.0), clock_b, system, None, &[])?;
    add_hr_terms(&mut h, C64::new(1.0, 0.0), clock_b, system, Some(&g), &[pointer_i.momentum_op()])?;
    Ok(h)
}

/// `H4(t_B) = (I + g(t_B)P_I)^{-1}(H_A − (iħ/2) g′(t_B) P_I) + H_S + H_int(t_B)` on `A⊗S⊗I`.
#[derive(Clone, Debug)]
pub struct H4Family {
    layout: SpaceLayout,
    clock_a: ClockModel,
    pointer_i: PointerModel,
    pulse: PulseProfile,
    system: SystemSpec,
}

impl H4Family {
    pub fn new(clock_a: &ClockModel, pulse: &PulseProfile, pointer_i: &PointerModel, system: &SystemSpec) -> Result<Self> {
        if !pulse.is_differentiable() {
            return Err(Error::NotDifferentiable("the internal generator needs g′".into()));
        }
        let layout = clocked_layout(clock_a, system, pointer_i)?;
        Ok(Self { layout, clock_a: clock_a.clone(), pointer_i: pointer_i.clone(), pulse: *pulse, system: system.clone() })
    }

    pub fn layout(&self) -> &SpaceLayout {
        &self.layout
    }

    fn pointer_parts(&self, t_b: f64) -> Result<(OperatorMatrix, Option<(f64, OperatorMatrix)>)> {
        let g = self.pulse.evaluate(t_b);
        let dg = self.pulse.derivative(t_b)?;
        let resolvent = self.pointer_i.momentum_function(|p| 1.0 / (1.0 + g * p.max(0.0)));
        let drift = (dg != 0.0).then(|| (dg, self.pointer_i.momentum_function(|p| p.max(0.0) / (1.0 + g * p.max(0.0)))));
        Ok((resolvent, drift))
    }

    /// Dense `H4(t_B)`.
    pub fn try_at(&self, t_b: f64) -> Result<OperatorMatrix> {
        let (resolvent, drift) = self.pointer_parts(t_b)?;
        let hbar = self.clock_a.hbar();
        let mut h = tensor_embed(&self.layout, &[(self.clock_a.label(), self.clock_a.hamiltonian()), (self.pointer_i.label(), &resolvent)])?;
        if let Some((dg, rp)) = drift {
            h.add_scaled(C64::new(0.0, -0.5 * hbar * dg), &lift_operator(&rp, self.pointer_i.label(), &self.layout)?)?;
        }
        h.add_scaled(C64::new(1.0, 0.0), &lift_operator(self.system.h_s(), SYSTEM_LABEL, &self.layout)?)?;
        if let Some((v, profile)) = self.system.coupling() {
            h.add_scaled(C64::new(profile.eval(t_b), 0.0), &lift_operator(v, SYSTEM_LABEL, &self.layout)?)?;
        }
        Ok(h)
    }

    pub fn structured_at(&self, t_b: f64) -> Result<StructuredOperator> {
        let (resolvent, drift) = self.pointer_parts(t_b)?;
        let hbar = self.clock_a.hbar();
        let mut h = StructuredOperator::zero(self.layout.clone());
        h.add_product(C64::new(1.0, 0.0), &[self.clock_a.hamiltonian(), &resolvent])?;
        if let Some((dg, rp)) = drift {
            h.add_product(C64::new(0.0, -0.5 * hbar * dg), &[&rp])?;
        }
        if self.system.h_s().frobenius_norm() > 0.0 {
            h.add_product(C64::new(1.0, 0.0), &[self.system.h_s()])?;
        }
        if let Some((v, profile)) = self.system.coupling() {
            h.add_product(C64::new(profile.eval(t_b), 0.0), &[v])?;
        }
        Ok(h)
    }
}

impl Generator for H4Family {
    fn action(&self, t: f64) -> Action<'_> {
        Action::Structured(Cow::Owned(self.structured_at(t).expect("pulse differentiability checked at construction")))
    }
}

pub fn build_h4(
    clock_a: &ClockModel,
    pulse: &PulseProfile,
    pointer_i: &PointerModel,
    system: &SystemSpec,
    t_b: f64,
) -> Result<OperatorMatrix> {
    H4Family::new(clock_a, pulse, pointer_i, system)?.try_at(t_b)
}

/// Scalar control function of several clock readings.
pub type ClockFunction = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

/// Self-interaction data: the target clock's own reading enters as a parameter.
#[derive(Clone)]
pub struct SelfInteraction {
    pub t_s: f64,
    pub f_prime: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
}

#[derive(Clone)]
pub struct MultiClockSpec {
    pub clocks: Vec<ClockModel>,
    pub f_args: Vec<usize>,
    pub target: usize,
    pub f: ClockFunction,
    pub self_interaction: Option<SelfInteraction>,
    /// Interaction on the non-target clocks' layout.
    pub h_int: Option<OperatorMatrix>,
}

impl MultiClockSpec {
    /// Layout of every clock except the target, in order.
    pub fn reduced_layout(&self) -> Result<SpaceLayout> {
        let pairs: Vec<(&str, usize)> = self
            .clocks
            .iter()
            .enumerate()
            .filter(|(k, _)| *k != self.target)
            .map(|(_, c)| (c.label(), c.dim()))
            .collect();
        SpaceLayout::new(&pairs)
    }

    fn validate(&self) -> Result<()> {
        if self.clocks.len() < 2 {
            return Err(Error::InvalidParameter("multi-clock spec needs at least two clocks".into()));
        }
        if self.target >= self.clocks.len() {
            return Err(Error::IndexOutOfRange { index: self.target, dim: self.clocks.len() });
        }
        for &r in &self.f_args {
            if r >= self.clocks.len() {
                return Err(Error::IndexOutOfRange { index: r, dim: self.clocks.len() });
            }
        }
        if self.self_interaction.is_none() && self.f_args.contains(&self.target) {
            return Err(Error::InvalidParameter("target clock cannot be an argument of f without self-interaction".into()));
        }
        Ok(())
    }

    /// `I + f` on the reduced layout (scalar multiple of the identity in the self-interaction case).
    pub fn redshift_factor(&self) -> Result<OperatorMatrix> {
        self.validate()?;
        let layout = self.reduced_layout()?;
        if let Some(si) = &self.self_interaction {
            let f = (self.f)(&[si.t_s]);
            return Ok(OperatorMatrix::identity(layout).scaled_re(1.0 + f));
        }
        if self.f_args.is_empty() {
            return Ok(OperatorMatrix::identity(layout).scaled_re(1.0 + (self.f)(&[])));
        }
        let ops: Vec<(&str, &OperatorMatrix)> =
            self.f_args.iter().map(|&r| (self.clocks[r].label(), self.clocks[r].time_op())).collect();
        Ok(product_function(&layout, &ops, |x| 1.0 + (self.f)(x))?.operator)
    }
}

/// Effective generator for the target clock's perspective in an n-clock universe.
pub fn build_multiclock_effective(spec: &MultiClockSpec) -> Result<OperatorMatrix> {
    spec.validate()?;
    let layout = spec.reduced_layout()?;
    let mut sum = OperatorMatrix::zeros(layout.clone());
    for (k, c) in spec.clocks.iter().enumerate() {
        if k != spec.target {
            sum.add_scaled(C64::new(1.0, 0.0), &lift_operator(c.hamiltonian(), c.label(), &layout)?)?;
        }
    }
    if let Some(h) = &spec.h_int {
        let defect = hermiticity_defect(h);
        if defect > HERMITIAN_TOL {
            return Err(Error::NotHermitian(defect));
        }
        sum.add_scaled(C64::new(1.0, 0.0), &embed(h, &layout)?)?;
    }
    if let Some(si) = &spec.self_interaction {
        let f = (spec.f)(&[si.t_s]);
        if !(1.0 + f).is_finite() || (1.0 + f).abs() <= 1e-12 {
            return Err(Error::Singular(format!("1 + f(t_s) = {}", 1.0 + f)));
        }
        let hbar = spec.clocks[spec.target].hbar();
        let id = OperatorMatrix::identity(layout.clone());
        sum.add_scaled(C64::new(0.0, -0.5 * hbar * (si.f_prime)(si.t_s)), &id)?;
        return Ok(sum.scaled_re(1.0 / (1.0 + f)));
    }
    if spec.f_args.is_empty() {
        let f = (spec.f)(&[]);
        return Ok(sum.scaled_re(1.0 / (1.0 + f)));
    }
    let ops: Vec<(&str, &OperatorMatrix)> =
        spec.f_args.iter().map(|&r| (spec.clocks[r].label(), spec.clocks[r].time_op())).collect();
    let denominator = product_function(&layout, &ops, |x| 1.0 + (spec.f)(x))?;
    let min_value = denominator.spectrum.iter().cloned().fold(f64::INFINITY, f64::min);
    if min_value < 1.0 - 1e-12 {
        return Err(Error::InvalidParameter(format!("f must be non-negative on the clock grids (min 1+f = {min_value})")));
    }
    let resolvent = product_function(&layout, &ops, |x| 1.0 / (1.0 + (spec.f)(x)))?;
    resolvent.operator.dot(&sum)
}

/// `(I + λH_B)^{-1} H_B` by spectral calculus in the clock's energy basis.
pub fn build_gravitational_effective(clock_b: &ClockModel, lambda: f64) -> Result<OperatorMatrix> {
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!("lambda = {lambda} must be non-negative")));
    }
    let hbar = clock_b.hbar();
    for &w in clock_b.frequencies() {
        let d = 1.0 + lambda * hbar * w;
        if d.abs() <= 1e-10 {
            return Err(Error::Singular(format!("I + λH_B has eigenvalue {d:e}")));
        }
    }
    Ok(clock_b.energy_function(|e| e / (1.0 + lambda * e)))
}
