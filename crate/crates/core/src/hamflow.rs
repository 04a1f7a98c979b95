//! Hamiltonian isotopies of the disk.
//!
//! Sign convention: `i_X omega = dH` with `omega = f dx^dy`, so
//! `X = (H_y, -H_x) / f`, i.e. `X = -i grad(H) / f` in complex notation.

use alloc::boxed::Box;
use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)] // inherent float methods shadow it when std is linked
use num_traits::Float;

use crate::diskforms::{DensityForm, Primitive};
use crate::maximizer::CutoffProfile;
use crate::mobius::Mobius;
use crate::poly::Poly2;
use crate::{Error, Result, C, PI, TAU};

/// Default number of integration steps on `[0, 1]`.
pub const DEFAULT_STEPS: usize = 2000;
/// Tolerance for leaving the closed disk.
pub const TOL_GEOM: f64 = 1e-9;

/// A time-dependent Hamiltonian `H(t, z)`, `t` in `[0, 1]`.
pub trait TimeHamiltonian {
    fn value(&self, t: f64, z: C) -> f64;
    /// Gradient packed as `H_x + i H_y`.
    fn gradient(&self, t: f64, z: C) -> C;
    /// Whether `H(t, .)` vanishes on the boundary circle for every `t`.
    fn boundary_flag(&self) -> bool;
    fn is_autonomous(&self) -> bool {
        false
    }
}

impl<T: TimeHamiltonian + ?Sized> TimeHamiltonian for &T {
    fn value(&self, t: f64, z: C) -> f64 {
        (**self).value(t, z)
    }
    fn gradient(&self, t: f64, z: C) -> C {
        (**self).gradient(t, z)
    }
    fn boundary_flag(&self) -> bool {
        (**self).boundary_flag()
    }
    fn is_autonomous(&self) -> bool {
        (**self).is_autonomous()
    }
}

impl<T: TimeHamiltonian + ?Sized> TimeHamiltonian for Box<T> {
    fn value(&self, t: f64, z: C) -> f64 {
        (**self).value(t, z)
    }
    fn gradient(&self, t: f64, z: C) -> C {
        (**self).gradient(t, z)
    }
    fn boundary_flag(&self) -> bool {
        (**self).boundary_flag()
    }
    fn is_autonomous(&self) -> bool {
        (**self).is_autonomous()
    }
}

/// Radial profile `h(s)`, `s = |z|^2`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(tag = "profile", rename_all = "kebab-case"))]
pub enum RadialProfile {
    /// `h(s) = sum_k c_k (1 - s)^(k+1)`.
    Poly { coeffs: Vec<f64> },
    /// `h(s) = amp * chi(s / scale)`.
    Cutoff { amp: f64, scale: f64, chi: CutoffProfile },
}

impl RadialProfile {
    /// `h(s) = (beta / 2)(1 - s)`, whose time-1 map is rotation by `beta`.
    pub fn rotation(beta: f64) -> Self {
        RadialProfile::Poly { coeffs: vec![0.5 * beta] }
    }

    /// `h(s) = (pi / n)(1 - s)`.
    pub fn global_rotation(n: usize) -> Self {
        RadialProfile::Poly { coeffs: vec![PI / n as f64] }
    }

    /// `h(s) = (pi / n) chi_delta(s)`.
    pub fn cutoff_rotation(n: usize, chi: CutoffProfile) -> Self {
        RadialProfile::Cutoff { amp: PI / n as f64, scale: 1.0, chi }
    }

    /// `h(s) = -c chi_eps(s / r^2)`, a rotor of radius `r`.
    pub fn rotor(c: f64, r: f64, chi: CutoffProfile) -> Self {
        RadialProfile::Cutoff { amp: -c, scale: r * r, chi }
    }

    pub fn h(&self, s: f64) -> f64 {
        match self {
            RadialProfile::Poly { coeffs } => {
                let u = 1.0 - s;
                coeffs.iter().rev().fold(0.0, |acc, &c| acc * u + c) * u
            }
            RadialProfile::Cutoff { amp, scale, chi } => amp * chi.value(s / scale),
        }
    }

    pub fn dh(&self, s: f64) -> f64 {
        match self {
            RadialProfile::Poly { coeffs } => {
                let u = 1.0 - s;
                // d/ds of sum c_k u^(k+1) = -sum (k+1) c_k u^k
                -coeffs.iter().enumerate().rev().fold(0.0, |acc, (k, &c)| acc * u + (k + 1) as f64 * c)
            }
            RadialProfile::Cutoff { amp, scale, chi } => amp * chi.d1(s / scale) / scale,
        }
    }

    pub fn d2h(&self, s: f64) -> f64 {
        match self {
            RadialProfile::Poly { coeffs } => {
                let u = 1.0 - s;
                coeffs
                    .iter()
                    .enumerate()
                    .skip(1)
                    .rev()
                    .fold(0.0, |acc, (k, &c)| acc * u + ((k + 1) * k) as f64 * c)
            }
            RadialProfile::Cutoff { amp, scale, chi } => amp * chi.d2(s / scale) / (scale * scale),
        }
    }

    /// `h(s) - s h'(s)`, the action of the time-one map w.r.t. `lambda_0`.
    pub fn action(&self, s: f64) -> f64 {
        match self {
            RadialProfile::Cutoff { amp, scale, chi } => amp * chi.action_part(s / scale),
            _ => self.h(s) - s * self.dh(s),
        }
    }

    /// `s` beyond which the profile vanishes identically, if any.
    pub fn support_end(&self) -> Option<f64> {
        match self {
            RadialProfile::Poly { .. } => None,
            RadialProfile::Cutoff { scale, chi, .. } => Some(scale * chi.support_end()),
        }
    }

    pub fn name(&self) -> String {
        match self {
            RadialProfile::Poly { coeffs } => format!("poly{coeffs:?}"),
            RadialProfile::Cutoff { amp, scale, chi } => {
                format!("cutoff(amp={amp}, scale={scale}, delta={})", chi.delta())
            }
        }
    }
}

/// The closed-form flow `z -> e^{-2 t h'(|z|^2) i} z`.
pub fn radial_flow(h: &RadialProfile, z: C, t: f64) -> C {
    z * C::from_polar(1.0, -2.0 * t * h.dh(z.norm_sqr()))
}

/// `H(z) = h(|z - center|^2)`, autonomous.
#[derive(Clone, Debug, PartialEq)]
pub struct RadialHamiltonian {
    pub profile: RadialProfile,
    pub center: C,
}

impl RadialHamiltonian {
    pub fn centered(profile: RadialProfile) -> Self {
        Self { profile, center: C::new(0.0, 0.0) }
    }
}

impl TimeHamiltonian for RadialHamiltonian {
    fn value(&self, _t: f64, z: C) -> f64 {
        self.profile.h((z - self.center).norm_sqr())
    }
    fn gradient(&self, _t: f64, z: C) -> C {
        let w = z - self.center;
        w * (2.0 * self.profile.dh(w.norm_sqr()))
    }
    fn boundary_flag(&self) -> bool {
        (0..256).all(|k| {
            let z = C::from_polar(1.0, TAU * k as f64 / 256.0);
            self.value(0.0, z).abs() < 1e-14
        })
    }
    fn is_autonomous(&self) -> bool {
        true
    }
}

/// `H(t, z) = (1 - |z|^2)^p (q0(z) + t q1(z))`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct EnvelopedPoly {
    pub power: u32,
    pub q0: Poly2,
    pub q1: Poly2,
}

impl EnvelopedPoly {
    pub fn autonomous(power: u32, q0: Poly2) -> Self {
        Self { power, q0, q1: Poly2::zero() }
    }
}

impl TimeHamiltonian for EnvelopedPoly {
    fn value(&self, t: f64, z: C) -> f64 {
        (1.0 - z.norm_sqr()).powi(self.power as i32) * (self.q0.value(z) + t * self.q1.value(z))
    }
    fn gradient(&self, t: f64, z: C) -> C {
        let u = 1.0 - z.norm_sqr();
        let p = self.power as i32;
        let q = self.q0.value(z) + t * self.q1.value(z);
        let dq = self.q0.gradient(z) + self.q1.gradient(z) * t;
        let env = u.powi(p);
        let denv = if p == 0 { C::new(0.0, 0.0) } else { z * (-2.0 * p as f64 * u.powi(p - 1)) };
        denv * q + dq * env
    }
    fn boundary_flag(&self) -> bool {
        self.power >= 1
    }
    fn is_autonomous(&self) -> bool {
        self.q1.is_zero()
    }
}

/// `-H`; for autonomous `H` it generates the inverse isotopy.
#[derive(Clone, Debug)]
pub struct Negated<H>(pub H);

impl<H: TimeHamiltonian> TimeHamiltonian for Negated<H> {
    fn value(&self, t: f64, z: C) -> f64 {
        -self.0.value(t, z)
    }
    fn gradient(&self, t: f64, z: C) -> C {
        -self.0.gradient(t, z)
    }
    fn boundary_flag(&self) -> bool {
        self.0.boundary_flag()
    }
    fn is_autonomous(&self) -> bool {
        self.0.is_autonomous()
    }
}

/// `H o h` for a Mobius map `h`; generates `h^-1 o phi_t o h` w.r.t. `h^* omega`.
#[derive(Clone, Debug)]
pub struct PulledBack<H> {
    pub ham: H,
    pub mobius: Mobius,
}

impl<H: TimeHamiltonian> TimeHamiltonian for PulledBack<H> {
    fn value(&self, t: f64, z: C) -> f64 {
        self.ham.value(t, self.mobius.apply(z))
    }
    fn gradient(&self, t: f64, z: C) -> C {
        self.mobius.derivative(z).conj() * self.ham.gradient(t, self.mobius.apply(z))
    }
    fn boundary_flag(&self) -> bool {
        self.ham.boundary_flag()
    }
    fn is_autonomous(&self) -> bool {
        self.ham.is_autonomous()
    }
}

/// Generator of the product isotopy `psi_t o phi_t` for the standard form,
/// where `psi_t` is a radial flow: `K_t = H_psi + H_phi,t o psi_t^-1`.
#[derive(Clone, Debug)]
pub struct ProductHamiltonian<H> {
    pub outer: RadialHamiltonian,
    pub inner: H,
}

impl<H: TimeHamiltonian> TimeHamiltonian for ProductHamiltonian<H> {
    fn value(&self, t: f64, z: C) -> f64 {
        let flow = RadialFlow::from(&self.outer);
        self.outer.value(t, z) + self.inner.value(t, flow.inverse_at(t, z))
    }
    fn gradient(&self, t: f64, z: C) -> C {
        let flow = RadialFlow::from(&self.outer);
        let w = flow.inverse_at(t, z);
        let j = flow.inverse_jacobian_at(t, z);
        let g = self.inner.gradient(t, w);
        // transpose(J) g
        let transported = C::new(j[0][0] * g.re + j[1][0] * g.im, j[0][1] * g.re + j[1][1] * g.im);
        self.outer.gradient(t, z) + transported
    }
    fn boundary_flag(&self) -> bool {
        self.outer.boundary_flag() && self.inner.boundary_flag()
    }
}

/// Identically zero Hamiltonian.
#[derive(Clone, Copy, Debug, Default)]
pub struct ZeroHamiltonian;

impl TimeHamiltonian for ZeroHamiltonian {
    fn value(&self, _t: f64, _z: C) -> f64 {
        0.0
    }
    fn gradient(&self, _t: f64, _z: C) -> C {
        C::new(0.0, 0.0)
    }
    fn boundary_flag(&self) -> bool {
        true
    }
    fn is_autonomous(&self) -> bool {
        true
    }
}

/// `X` with `i_X omega = dH(t, .)` at `z`.
pub fn hamiltonian_vector_field(h: &dyn TimeHamiltonian, form: &DensityForm, t: f64, z: C) -> Result<C> {
    let f = form.planar(z);
    let g = h.gradient(t, z);
    if f <= 0.0 || !f.is_finite() {
        if z.norm() < 1.0 - 1e-12 {
            return Err(Error::DegenerateForm { x: z.re, y: z.im, value: f });
        }
        if g.norm() == 0.0 {
            return Ok(C::new(0.0, 0.0));
        }
        return Err(Error::DegenerateForm { x: z.re, y: z.im, value: f });
    }
    Ok(C::new(g.im, -g.re) / f)
}

/// Sampled trajectory with the two action integrands accumulated alongside.
#[derive(Clone, Debug, PartialEq)]
pub struct FlowTrace {
    pub times: Vec<f64>,
    pub points: Vec<C>,
    /// `int lambda` along the trajectory (0 when no primitive was supplied).
    pub line_integral: f64,
    /// `int H_t(phi_t(z0)) dt`.
    pub hamiltonian_integral: f64,
}

impl FlowTrace {
    pub fn end(&self) -> C {
        *self.points.last().expect("trace is never empty")
    }

    /// `int lambda + int H`: the action at the initial point.
    pub fn action(&self) -> f64 {
        self.line_integral + self.hamiltonian_integral
    }
}

#[derive(Clone, Copy, Debug)]
pub struct FlowOptions<'p> {
    pub steps: usize,
    pub t_end: f64,
    pub primitive: Option<&'p Primitive>,
    /// Keep every step instead of just the endpoints.
    pub record: bool,
}

impl Default for FlowOptions<'_> {
    fn default() -> Self {
        Self { steps: DEFAULT_STEPS, t_end: 1.0, primitive: None, record: false }
    }
}

/// Classical fourth-order integration of `z' = X_{H_t}(z)` on `[0, t_end]`,
/// with `int lambda(z') dt` and `int H dt` integrated by the same stages.
pub fn integrate_flow(
    h: &dyn TimeHamiltonian,
    form: &DensityForm,
    z0: C,
    opts: FlowOptions<'_>,
) -> Result<FlowTrace> {
    if opts.steps == 0 {
        return Err(Error::ParameterOutOfRange("integrate_flow needs steps >= 1".into()));
    }
    let dt = opts.t_end / opts.steps as f64;
    let rhs = |t: f64, z: C| -> Result<(C, f64, f64)> {
        let x = hamiltonian_vector_field(h, form, t, z)?;
        let l = opts.primitive.map_or(0.0, |p| p.pair(z, x));
        Ok((x, l, h.value(t, z)))
    };
    let mut z = z0;
    let (mut lam, mut ham) = (0.0, 0.0);
    let cap = if opts.record { opts.steps + 1 } else { 2 };
    let mut times = Vec::with_capacity(cap);
    let mut points = Vec::with_capacity(cap);
    times.push(0.0);
    points.push(z);
    for k in 0..opts.steps {
        let t = k as f64 * dt;
        let (k1, l1, h1) = rhs(t, z)?;
        let (k2, l2, h2) = rhs(t + 0.5 * dt, z + k1 * (0.5 * dt))?;
        let (k3, l3, h3) = rhs(t + 0.5 * dt, z + k2 * (0.5 * dt))?;
        let (k4, l4, h4) = rhs(t + dt, z + k3 * dt)?;
        z += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        lam += dt / 6.0 * (l1 + 2.0 * l2 + 2.0 * l3 + l4);
        ham += dt / 6.0 * (h1 + 2.0 * h2 + 2.0 * h3 + h4);
        let r = z.norm();
        if r > 1.0 + TOL_GEOM || !r.is_finite() {
            return Err(Error::Escape { radius: r });
        }
        if r > 1.0 {
            z /= r;
        }
        if opts.record {
            times.push(t + dt);
            points.push(z);
        }
    }
    if !opts.record {
        times.push(opts.t_end);
        points.push(z);
    }
    Ok(FlowTrace { times, points, line_integral: lam, hamiltonian_integral: ham })
}

/// Endpoint of the same scheme as [`integrate_flow`], without the action
/// integrands.
fn flow_endpoint(h: &dyn TimeHamiltonian, form: &DensityForm, z0: C, t_end: f64, steps: usize) -> Result<C> {
    let dt = t_end / steps as f64;
    let x = |t: f64, z: C| hamiltonian_vector_field(h, form, t, z);
    let mut z = z0;
    for k in 0..steps {
        let t = k as f64 * dt;
        let k1 = x(t, z)?;
        let k2 = x(t + 0.5 * dt, z + k1 * (0.5 * dt))?;
        let k3 = x(t + 0.5 * dt, z + k2 * (0.5 * dt))?;
        let k4 = x(t + dt, z + k3 * dt)?;
        z += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        let r = z.norm();
        if r > 1.0 + TOL_GEOM || !r.is_finite() {
            return Err(Error::Escape { radius: r });
        }
        if r > 1.0 {
            z /= r;
        }
    }
    Ok(z)
}

/// A path of disk maps `t -> phi_t`, `phi_0 = id`.
pub trait DiskIsotopy {
    fn at(&self, t: f64, z: C) -> C;

    fn map(&self, z: C) -> C {
        self.at(1.0, z)
    }
}

impl<T: DiskIsotopy + ?Sized> DiskIsotopy for &T {
    fn at(&self, t: f64, z: C) -> C {
        (**self).at(t, z)
    }
}

impl<T: DiskIsotopy + ?Sized> DiskIsotopy for Box<T> {
    fn at(&self, t: f64, z: C) -> C {
        (**self).at(t, z)
    }
}

impl<T: DiskIsotopy + ?Sized> DiskIsotopy for Arc<T> {
    fn at(&self, t: f64, z: C) -> C {
        (**self).at(t, z)
    }
}

/// Type-erased isotopy shared across threads.
pub type SharedIsotopy = Arc<dyn DiskIsotopy + Send + Sync>;

/// A closed-form action `sigma_t(z)` w.r.t. `lambda_0` attached to an isotopy.
pub trait ActionSource {
    fn action_at(&self, t: f64, z: C) -> f64;

    fn action(&self, z: C) -> f64 {
        self.action_at(1.0, z)
    }
}

impl<T: ActionSource + ?Sized> ActionSource for &T {
    fn action_at(&self, t: f64, z: C) -> f64 {
        (**self).action_at(t, z)
    }
}

#[derive(Clone, Copy, Debug, Default)]
pub struct Identity;

impl DiskIsotopy for Identity {
    fn at(&self, _t: f64, z: C) -> C {
        z
    }
}

impl ActionSource for Identity {
    fn action_at(&self, _t: f64, _z: C) -> f64 {
        0.0
    }
}

/// Closed-form flow of `h(|z - center|^2)` for the standard form.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct RadialFlow {
    pub profile: RadialProfile,
    pub center: C,
}

impl From<&RadialHamiltonian> for RadialFlow {
    fn from(h: &RadialHamiltonian) -> Self {
        Self { profile: h.profile.clone(), center: h.center }
    }
}

impl RadialFlow {
    pub fn centered(profile: RadialProfile) -> Self {
        Self { profile, center: C::new(0.0, 0.0) }
    }

    pub fn hamiltonian(&self) -> RadialHamiltonian {
        RadialHamiltonian { profile: self.profile.clone(), center: self.center }
    }

    /// Rotation angle at squared local radius `s` and time `t`.
    pub fn angle(&self, t: f64, s: f64) -> f64 {
        -2.0 * t * self.profile.dh(s)
    }

    pub fn inverse_at(&self, t: f64, z: C) -> C {
        self.at(-t, z)
    }

    /// Real Jacobian of `phi_t` at `z`, `[[dX/dx, dX/dy], [dY/dx, dY/dy]]`.
    pub fn jacobian_at(&self, t: f64, z: C) -> [[f64; 2]; 2] {
        let w = z - self.center;
        let s = w.norm_sqr();
        let e = C::from_polar(1.0, self.angle(t, s));
        let da = -2.0 * t * self.profile.d2h(s);
        // D(e^{iA} w)[v] = e^{iA} (v + i A'(s) 2<w, v> w)
        let col = |v: C| e * (v + C::new(0.0, da * 2.0 * (w.re * v.re + w.im * v.im)) * w);
        let cx = col(C::new(1.0, 0.0));
        let cy = col(C::new(0.0, 1.0));
        [[cx.re, cy.re], [cx.im, cy.im]]
    }

    pub fn inverse_jacobian_at(&self, t: f64, z: C) -> [[f64; 2]; 2] {
        self.jacobian_at(-t, z)
    }
}

impl DiskIsotopy for RadialFlow {
    fn at(&self, t: f64, z: C) -> C {
        let w = z - self.center;
        self.center + w * C::from_polar(1.0, self.angle(t, w.norm_sqr()))
    }
}

impl ActionSource for RadialFlow {
    fn action_at(&self, t: f64, z: C) -> f64 {
        let w = z - self.center;
        let base = t * self.profile.action(w.norm_sqr());
        if self.center == C::new(0.0, 0.0) {
            return base;
        }
        // lambda_0 = lambda_0(w) + du with u(w) = (x_c b - y_c a) / 2.
        let c = self.center;
        let u = |v: C| 0.5 * (c.re * v.im - c.im * v.re);
        let moved = self.at(t, z) - c;
        base + u(moved) - u(w)
    }
}

/// Numerically integrated Hamiltonian isotopy.
#[derive(Clone, Debug)]
pub struct HamiltonianIsotopy<H> {
    pub ham: H,
    pub form: DensityForm,
    /// Steps per unit time.
    pub steps: usize,
}

impl<H: TimeHamiltonian> HamiltonianIsotopy<H> {
    pub fn new(ham: H, form: DensityForm, steps: usize) -> Self {
        Self { ham, form, steps }
    }

    fn steps_for(&self, t: f64) -> usize {
        ((self.steps as f64 * t.abs()).ceil() as usize).max(1)
    }

    pub fn try_at(&self, t: f64, z: C) -> Result<C> {
        if t == 0.0 {
            return Ok(z);
        }
        flow_endpoint(&self.ham, &self.form, z, t, self.steps_for(t))
    }

    /// Action of the time-`t` map at `z` w.r.t. `lambda`.
    pub fn action_with(&self, lambda: &Primitive, t: f64, z: C) -> Result<f64> {
        let opts = FlowOptions { steps: self.steps_for(t), t_end: t, primitive: Some(lambda), record: false };
        Ok(integrate_flow(&self.ham, &self.form, z, opts)?.action())
    }
}

impl<H: TimeHamiltonian> DiskIsotopy for HamiltonianIsotopy<H> {
    fn at(&self, t: f64, z: C) -> C {
        self.try_at(t, z).unwrap_or(C::new(f64::NAN, f64::NAN))
    }
}

impl<H: TimeHamiltonian> ActionSource for HamiltonianIsotopy<H> {
    /// Action w.r.t. the canonical primitive of the isotopy's form.
    fn action_at(&self, t: f64, z: C) -> f64 {
        self.action_with(&Primitive::for_form(&self.form), t, z).unwrap_or(f64::NAN)
    }
}

/// `t -> outer_t o inner_t`.
#[derive(Clone, Debug)]
pub struct Composed<A, B> {
    pub outer: A,
    pub inner: B,
}

pub fn compose_isotopies<A: DiskIsotopy, B: DiskIsotopy>(outer: A, inner: B) -> Composed<A, B> {
    Composed { outer, inner }
}

impl<A: DiskIsotopy, B: DiskIsotopy> DiskIsotopy for Composed<A, B> {
    fn at(&self, t: f64, z: C) -> C {
        self.outer.at(t, self.inner.at(t, z))
    }
}

impl<A: DiskIsotopy + ActionSource, B: DiskIsotopy + ActionSource> ActionSource for Composed<A, B> {
    /// `sigma_{psi o phi} = sigma_psi o phi + sigma_phi`.
    fn action_at(&self, t: f64, z: C) -> f64 {
        self.outer.action_at(t, self.inner.at(t, z)) + self.inner.action_at(t, z)
    }
}

/// `t -> h^-1 o phi_t o h`.
#[derive(Clone, Debug)]
pub struct Conjugated<I> {
    pub inner: I,
    pub mobius: Mobius,
}

impl<I: DiskIsotopy> DiskIsotopy for Conjugated<I> {
    fn at(&self, t: f64, z: C) -> C {
        self.mobius.inverse(self.inner.at(t, self.mobius.apply(z)))
    }
}

impl<I: ActionSource> ActionSource for Conjugated<I> {
    /// Action w.r.t. `h^* lambda`, transported by naturality.
    fn action_at(&self, t: f64, z: C) -> f64 {
        self.inner.action_at(t, self.mobius.apply(z))
    }
}

/// Finite-difference Jacobian with Richardson extrapolation of central differences.
pub fn jacobian_fd(f: impl Fn(C) -> C, z: C, h: f64) -> [[f64; 2]; 2] {
    let d = |e: C| {
        let c1 = (f(z + e) - f(z - e)) / 2.0;
        let c2 = (f(z + e * 2.0) - f(z - e * 2.0)) / 4.0;
        (c1 * 4.0 - c2) / 3.0
    };
    let dx = d(C::new(h, 0.0)) / h;
    let dy = d(C::new(0.0, h)) / h;
    [[dx.re, dy.re], [dx.im, dy.im]]
}

pub fn det2(j: [[f64; 2]; 2]) -> f64 {
    j[0][0] * j[1][1] - j[0][1] * j[1][0]
}

/// The profiles exercised by the radial oracle.
pub fn registered_profiles() -> Vec<RadialProfile> {
    let chi = |d: f64| crate::maximizer::make_cutoff(d).expect("valid delta");
    vec![
        RadialProfile::rotation(0.3),
        RadialProfile::global_rotation(8),
        RadialProfile::Poly { coeffs: vec![0.0, -0.2] },
        RadialProfile::Poly { coeffs: vec![0.1, -0.4, 0.2] },
        RadialProfile::Poly { coeffs: vec![0.5, 0.0, 0.0, -0.3] },
        RadialProfile::Poly { coeffs: vec![-1.0, 0.6] },
        RadialProfile::cutoff_rotation(8, chi(0.1)),
        RadialProfile::cutoff_rotation(16, chi(0.05)),
        RadialProfile::Cutoff { amp: -0.3, scale: 0.8, chi: chi(0.2) },
        RadialProfile::Cutoff { amp: 0.5, scale: 1.0, chi: chi(0.3) },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::maximizer::make_cutoff;
    use proptest::prelude::*;

    fn std_form() -> DensityForm {
        DensityForm::standard()
    }

    #[test]
    fn global_rotation_field() {
        let n = 8;
        let h = RadialHamiltonian::centered(RadialProfile::global_rotation(n));
        for &z in &[C::new(0.3, 0.1), C::new(-0.5, 0.7), C::new(0.0, 0.0)] {
            let x = hamiltonian_vector_field(&h, &std_form(), 0.0, z).unwrap();
            let want = C::new(0.0, 1.0) * z * (TAU / n as f64);
            assert!((x - want).norm() < 1e-14);
        }
        let x = hamiltonian_vector_field(&ZeroHamiltonian, &std_form(), 0.5, C::new(0.2, 0.2)).unwrap();
        assert_eq!(x, C::new(0.0, 0.0));
    }

    #[test]
    fn vector_field_solves_defining_equation_at_random_points() {
        // i_X omega = dH: omega(X, v) = dH(v) for all v, with dH by differences.
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        let h = RadialHamiltonian::centered(RadialProfile::Poly { coeffs: vec![-0.5] }); // |z|^2/2 - 1/2
        let forms = [std_form(), DensityForm::tilted(0.5).unwrap()];
        for form in &forms {
            for _ in 0..100 {
                let z = C::from_polar(rng.random::<f64>().sqrt() * 0.95, rng.random::<f64>() * TAU);
                let x = hamiltonian_vector_field(&h, form, 0.0, z).unwrap();
                let e = 1e-6;
                let hx = (h.value(0.0, z + e) - h.value(0.0, z - e)) / (2.0 * e);
                let hy = (h.value(0.0, z + C::new(0.0, e)) - h.value(0.0, z - C::new(0.0, e))) / (2.0 * e);
                let f = form.planar(z);
                // omega(X, e_x) = -f X_y, omega(X, e_y) = f X_x
                assert!((-f * x.im - hx).abs() < 1e-8);
                assert!((f * x.re - hy).abs() < 1e-8);
                if form.is_standard() {
                    assert!((x - C::new(0.0, -1.0) * z).norm() < 1e-12);
                }
            }
        }
    }

    #[test]
    fn degenerate_form_is_reported() {
        let h = RadialHamiltonian::centered(RadialProfile::rotation(1.0));
        let bad = DensityForm::vanishing();
        assert!(hamiltonian_vector_field(&h, &bad, 0.0, C::new(0.3, 0.0)).is_ok());
        let z = C::new(1.0, 0.0);
        assert!(matches!(hamiltonian_vector_field(&h, &bad, 0.0, z), Err(Error::DegenerateForm { .. })));
    }

    #[test]
    fn radial_flow_examples() {
        let n = 8;
        let chi = make_cutoff(0.1).unwrap();
        let h = RadialProfile::cutoff_rotation(n, chi);
        let z = C::from_polar(0.5, 0.3);
        assert!((radial_flow(&h, z, 1.0) - z * C::from_polar(1.0, TAU / n as f64)).norm() < 1e-15);
        let c = RadialProfile::Poly { coeffs: vec![] };
        assert_eq!(radial_flow(&c, z, 1.0), z);
        let beta = 0.77;
        let r = RadialProfile::rotation(beta);
        assert!((radial_flow(&r, z, 1.0) - z * C::from_polar(1.0, beta)).norm() < 1e-15);
    }

    #[test]
    fn zero_hamiltonian_trace_is_constant() {
        let lam = Primitive::Lambda0;
        let opts = FlowOptions { steps: 10, record: true, primitive: Some(&lam), ..FlowOptions::default() };
        let tr = integrate_flow(&ZeroHamiltonian, &std_form(), C::new(0.1, 0.2), opts).unwrap();
        assert!(tr.points.iter().all(|&p| p == C::new(0.1, 0.2)));
        assert_eq!((tr.line_integral, tr.hamiltonian_integral), (0.0, 0.0));
        assert_eq!(tr.times.len(), 11);
        assert!(integrate_flow(&ZeroHamiltonian, &std_form(), C::new(0.0, 0.0), FlowOptions { steps: 0, ..opts }).is_err());
    }

    #[test]
    fn integrated_flow_matches_radial_oracle() {
        for profile in registered_profiles() {
            let h = RadialHamiltonian::centered(profile.clone());
            for k in 0..12 {
                let z = C::from_polar(k as f64 / 12.0, 0.7 * k as f64);
                let tr = integrate_flow(&h, &std_form(), z, FlowOptions::default()).unwrap();
                assert!((tr.end() - radial_flow(&profile, z, 1.0)).norm() < 1e-8, "{}", profile.name());
            }
        }
    }

    #[test]
    fn escape_is_detected_for_outward_fields() {
        struct Outward;
        impl TimeHamiltonian for Outward {
            fn value(&self, _t: f64, z: C) -> f64 {
                z.im
            }
            fn gradient(&self, _t: f64, _z: C) -> C {
                C::new(0.0, 1.0)
            }
            fn boundary_flag(&self) -> bool {
                false
            }
        }
        let r = integrate_flow(&Outward, &std_form(), C::new(0.9, 0.0), FlowOptions { steps: 50, ..Default::default() });
        assert!(matches!(r, Err(Error::Escape { .. })));
    }

    #[test]
    fn area_preservation_of_numeric_flow() {
        let q = Poly2::new(vec![(2, 0, 0.4), (1, 1, -0.3), (0, 3, 0.5)]);
        let forms = [std_form(), DensityForm::radial_bump(0.5).unwrap()];
        for form in forms {
            let iso = HamiltonianIsotopy::new(EnvelopedPoly::autonomous(2, q.clone()), form.clone(), 400);
            for i in 0..20 {
                for j in 0..20 {
                    let z = C::new(-0.9 + 1.8 * i as f64 / 19.0, -0.9 + 1.8 * j as f64 / 19.0);
                    if z.norm() > 0.95 {
                        continue;
                    }
                    let det = det2(jacobian_fd(|w| iso.map(w), z, 1e-4));
                    let lhs = form.planar(iso.map(z)) * det;
                    assert!((lhs - form.planar(z)).abs() < 1e-6 * form.planar(z), "{} at {z}", form.name());
                }
            }
        }
    }

    #[test]
    fn group_law_for_autonomous_flow() {
        let q = Poly2::new(vec![(2, 1, 0.6), (0, 2, -0.4)]);
        let iso = HamiltonianIsotopy::new(EnvelopedPoly::autonomous(2, q), std_form(), 2000);
        for &z in &[C::new(0.2, -0.3), C::new(-0.6, 0.1)] {
            let a = iso.at(0.7, z);
            let b = iso.at(0.3, iso.at(0.4, z));
            assert!((a - b).norm() < 1e-10);
        }
    }

    #[test]
    fn composition_and_inverse() {
        let chi = make_cutoff(0.1).unwrap();
        let plus = RadialFlow::centered(RadialProfile::cutoff_rotation(8, chi));
        let rotor = RadialFlow { profile: RadialProfile::rotor(0.3, 0.1, make_cutoff(0.1).unwrap()), center: C::new(0.5, 0.2) };
        let comp = compose_isotopies(&plus, &rotor);
        for &z in &[C::new(0.5, 0.25), C::new(0.1, 0.0), C::new(-0.3, 0.4)] {
            assert!((comp.map(z) - plus.map(rotor.map(z))).norm() < 1e-10);
            assert_eq!(compose_isotopies(Identity, &rotor).map(z), rotor.map(z));
        }
        let q = Poly2::new(vec![(2, 0, 0.3), (1, 2, 0.2)]);
        let fwd = HamiltonianIsotopy::new(EnvelopedPoly::autonomous(2, q.clone()), std_form(), 2000);
        let back = HamiltonianIsotopy::new(Negated(EnvelopedPoly::autonomous(2, q)), std_form(), 2000);
        let z = C::new(0.4, -0.2);
        assert!((compose_isotopies(&back, &fwd).map(z) - z).norm() < 1e-8);
    }

    #[test]
    fn radial_jacobian_matches_differences() {
        let f = RadialFlow { profile: RadialProfile::Poly { coeffs: vec![0.3, -0.5] }, center: C::new(0.1, -0.2) };
        let z = C::new(0.3, 0.25);
        let a = f.jacobian_at(0.6, z);
        let b = jacobian_fd(|w| f.at(0.6, w), z, 1e-4);
        for i in 0..2 {
            for j in 0..2 {
                assert!((a[i][j] - b[i][j]).abs() < 1e-9);
            }
        }
        assert!((det2(a) - 1.0).abs() < 1e-13);
    }

    #[test]
    fn product_hamiltonian_generates_composition() {
        let outer = RadialHamiltonian { profile: RadialProfile::Poly { coeffs: vec![0.4, 0.2] }, center: C::new(0.0, 0.0) };
        let inner = EnvelopedPoly { power: 2, q0: Poly2::new(vec![(2, 0, 0.5)]), q1: Poly2::new(vec![(1, 1, 0.3)]) };
        let prod = HamiltonianIsotopy::new(ProductHamiltonian { outer: outer.clone(), inner: inner.clone() }, std_form(), 2000);
        let a = RadialFlow::from(&outer);
        let b = HamiltonianIsotopy::new(inner, std_form(), 2000);
        for &z in &[C::new(0.3, 0.3), C::new(-0.7, 0.1)] {
            assert!((prod.map(z) - a.map(b.map(z))).norm() < 1e-9);
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]
        #[test]
        fn radial_flows_preserve_circles_and_boundary_flags(idx in 0usize..10, r in 0.0..1.0f64, t in 0.0..6.3f64, time in -1.0..1.0f64) {
            let p = registered_profiles().swap_remove(idx);
            let z = C::from_polar(r, t);
            prop_assert!((radial_flow(&p, z, time).norm() - r).abs() < 1e-14);
            prop_assert!(RadialHamiltonian::centered(p.clone()).boundary_flag());
        }
    }
}
