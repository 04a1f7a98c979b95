//! The composed map `phi = phi_plus o phi_minus` and its closed-form action.

use alloc::format;
use alloc::vec::Vec;
use alloc::sync::Arc;
#[allow(unused_imports)] // inherent float methods shadow it when std is linked
use num_traits::Float;

use super::cutoff::{make_cutoff, CutoffProfile};
use super::packing::{pack_sector_with, DiskPacking, PackingOptions, SectorIndex};
use crate::calabi::{CalabiRoute, CalabiValue};
use crate::hamflow::{ActionSource, Composed, DiskIsotopy, RadialFlow, RadialProfile, SharedIsotopy};
use crate::quad::GaussLegendre;
use crate::{Error, Result, C, PI, TAU};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "lowercase"))]
pub enum Variant {
    /// Rotor strength `2 pi / n`: small action, negative Calabi invariant.
    Calpic,
    /// Rotor strength `pi - 2 pi / n`: Calabi invariant close to `-pi^2`.
    Sysgra,
}

impl Variant {
    pub fn rotor_strength(self, n: usize) -> f64 {
        match self {
            Variant::Calpic => TAU / n as f64,
            Variant::Sysgra => PI - TAU / n as f64,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Variant::Calpic => "calpic",
            Variant::Sysgra => "sysgra",
        }
    }
}

impl core::str::FromStr for Variant {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "calpic" => Ok(Variant::Calpic),
            "sysgra" => Ok(Variant::Sysgra),
            other => Err(Error::ParameterOutOfRange(format!("unknown variant {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MaximizerParams {
    pub variant: Variant,
    pub n: usize,
    pub delta: f64,
    pub eps: f64,
    pub rho_target: f64,
    pub seed: u64,
}

impl MaximizerParams {
    pub fn new(variant: Variant, n: usize, eps: f64, rho_target: f64, seed: u64) -> Self {
        Self { variant, n, delta: 0.02, eps, rho_target, seed }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n < 2 {
            return Err(Error::ParameterOutOfRange(format!("n = {} must be at least 2", self.n)));
        }
        if !(self.delta > 0.0 && self.delta < 0.5) {
            return Err(Error::ParameterOutOfRange(format!("delta = {} outside (0, 1/2)", self.delta)));
        }
        if !(self.eps > 0.0 && self.eps < 0.5) {
            return Err(Error::ParameterOutOfRange(format!("eps = {} outside (0, 1/2)", self.eps)));
        }
        Ok(())
    }

    /// Radius of the disk on which `phi_plus` is an exact rotation.
    pub fn core_radius(&self) -> f64 {
        (1.0 - 2.0 * self.delta).sqrt()
    }
}

/// Global rotation by `2 pi / n`, cut off near the boundary:
/// the radial flow of `(pi / n) chi_delta(|z|^2)`.
pub fn build_phi_plus(n: usize, delta: f64) -> Result<RadialFlow> {
    if n < 1 {
        return Err(Error::ParameterOutOfRange("n must be positive".into()));
    }
    Ok(RadialFlow::centered(RadialProfile::cutoff_rotation(n, make_cutoff(delta)?)))
}

/// The product of the rotors `K_j = -c chi_eps(|z - z_j|^2 / r_j^2)`.
#[derive(Clone, Debug)]
pub struct PhiMinus {
    packing: Arc<DiskPacking>,
    index: Arc<SectorIndex>,
    chi: CutoffProfile,
    c: f64,
}

/// Builds `phi_minus` over `packing` with cutoff parameter `eps` and strength `c`.
pub fn build_phi_minus(packing: Arc<DiskPacking>, eps: f64, c: f64) -> Result<PhiMinus> {
    if !(eps > 0.0 && eps < 0.5) {
        return Err(Error::ParameterOutOfRange(format!("eps = {eps} outside (0, 1/2)")));
    }
    if !(c > 0.0) {
        return Err(Error::ParameterOutOfRange(format!("rotor strength c = {c} must be positive")));
    }
    let index = Arc::new(SectorIndex::new(&packing));
    Ok(PhiMinus { packing, index, chi: make_cutoff(eps)?, c })
}

impl PhiMinus {
    pub fn packing(&self) -> &DiskPacking {
        &self.packing
    }

    pub fn strength(&self) -> f64 {
        self.c
    }

    pub fn chi(&self) -> &CutoffProfile {
        &self.chi
    }

    /// `(k, i, w)`: `z` lies in the rotation by `2 pi k / n` of
    /// fundamental-sector disk `i`, and `w` is `z` rotated back.
    pub fn locate(&self, z: C) -> Option<(usize, usize, C)> {
        if self.packing.disks.is_empty() {
            return None;
        }
        let alpha = self.packing.sector_angle();
        let mut theta = z.im.atan2(z.re);
        if theta < 0.0 {
            theta += TAU;
        }
        let k = ((theta / alpha).floor() as usize).min(self.packing.n - 1);
        let w = z * C::from_polar(1.0, -alpha * k as f64);
        self.index
            .at(w)
            .iter()
            .find(|&&i| self.packing.disks[i as usize].contains(w))
            .map(|&i| (k, i as usize, w))
    }

    /// The rotor of fundamental-sector disk `i`.
    pub fn rotor(&self, i: usize) -> RadialFlow {
        let d = self.packing.disks[i];
        RadialFlow { profile: RadialProfile::rotor(self.c, d.radius, self.chi), center: d.center }
    }

    /// Rotation angle inside the core of rotor `i` (negative: clockwise).
    pub fn core_angle(&self, i: usize) -> f64 {
        let r = self.packing.disks[i].radius;
        -2.0 * self.c / (r * r)
    }
}

impl DiskIsotopy for PhiMinus {
    fn at(&self, t: f64, z: C) -> C {
        match self.locate(z) {
            Some((k, i, w)) => self.rotor(i).at(t, w) * C::from_polar(1.0, self.packing.sector_angle() * k as f64),
            None => z,
        }
    }
}

impl ActionSource for PhiMinus {
    /// The rotation by `2 pi / n` preserves `lambda_0`, so rotated rotors
    /// share the action of the fundamental one.
    fn action_at(&self, t: f64, z: C) -> f64 {
        match self.locate(z) {
            Some((_, i, w)) => self.rotor(i).action_at(t, w),
            None => 0.0,
        }
    }
}

pub type PhiIsotopy = Composed<RadialFlow, PhiMinus>;

/// Gauss integral of `f` over `[a, b]` split at the given interior points.
fn piecewise(rule: &GaussLegendre, a: f64, b: f64, breaks: &[f64], mut f: impl FnMut(f64) -> f64) -> f64 {
    let mut x0 = a;
    let mut acc = 0.0;
    for &x in breaks.iter().filter(|&&x| x > a && x < b).chain(core::iter::once(&b)) {
        acc += rule.integrate(x0, x, &mut f);
        x0 = x;
    }
    acc
}

#[derive(Clone, Debug)]
pub struct MaximizerConstruction {
    pub params: MaximizerParams,
    /// Rotor strength.
    pub c: f64,
    pub packing: Arc<DiskPacking>,
    pub phi_plus: RadialFlow,
    pub phi_minus: PhiMinus,
    /// `CAL(phi)` by the Hamiltonian route, error estimate from the action route.
    pub cal: CalabiValue,
    pub cal_plus: f64,
    pub cal_minus: f64,
    /// Closed forms of the two pieces for the realized cutoff.
    pub cal_plus_closed: f64,
    pub cal_minus_closed: f64,
    /// `int sigma dx dy` by structured quadrature of the closed-form action.
    pub action_integral: f64,
}

/// Builds `phi = phi_plus o phi_minus` for the given variant and parameters.
pub fn build_counterexample(params: &MaximizerParams) -> Result<MaximizerConstruction> {
    params.validate()?;
    let opts = PackingOptions { outer_radius: params.core_radius(), ..PackingOptions::default() };
    let packing = Arc::new(pack_sector_with(params.n, params.rho_target, params.seed, &opts)?);
    build_with_packing(params, packing)
}

/// Same as [`build_counterexample`] with a given packing.
pub fn build_with_packing(params: &MaximizerParams, packing: Arc<DiskPacking>) -> Result<MaximizerConstruction> {
    params.validate()?;
    if packing.n != params.n {
        return Err(Error::ParameterOutOfRange(format!("packing has n = {}, expected {}", packing.n, params.n)));
    }
    let core = params.core_radius();
    if let Some(d) = packing.disks.iter().find(|d| d.center.norm() + d.radius > core + 1e-12) {
        return Err(Error::GeometryViolation(format!(
            "disk at {} with radius {} crosses the rotation core of radius {core}",
            d.center, d.radius
        )));
    }
    let c = params.variant.rotor_strength(params.n);
    let phi_plus = build_phi_plus(params.n, params.delta)?;
    let phi_minus = build_phi_minus(packing.clone(), params.eps, c)?;
    let mut cx = MaximizerConstruction {
        params: params.clone(),
        c,
        packing,
        phi_plus,
        phi_minus,
        cal: CalabiValue { value: 0.0, route: CalabiRoute::Hamiltonian, error_estimate: 0.0 },
        cal_plus: 0.0,
        cal_minus: 0.0,
        cal_plus_closed: 0.0,
        cal_minus_closed: 0.0,
        action_integral: 0.0,
    };
    cx.compute_invariants();
    Ok(cx)
}

impl MaximizerConstruction {
    fn compute_invariants(&mut self) {
        let rule = GaussLegendre::new(10);
        let n = self.params.n as f64;
        let chi_d = make_cutoff(self.params.delta).expect("validated");
        let chi_e = *self.phi_minus.chi();
        let breaks = |chi: &CutoffProfile| [chi.affine_end(), chi.support_end()];

        // Hamiltonian route: CAL = 2 int H dx dy, radial pieces in s = |z|^2.
        let h_plus = |s: f64| PI / n * chi_d.value(s);
        self.cal_plus = 2.0 * PI * piecewise(&rule, 0.0, 1.0, &breaks(&chi_d), h_plus);
        let unit_rotor = 2.0 * PI * piecewise(&rule, 0.0, 1.0, &breaks(&chi_e), |q| -self.c * chi_e.value(q));
        self.cal_minus = unit_rotor * self.packing.sum_r2();

        let (a, w) = (1.0 - self.params.delta, 0.5 * self.params.delta);
        self.cal_plus_closed = PI * PI / n * (a * a + w * w / 9.0);
        let (ae, we) = (1.0 - self.params.eps, 0.5 * self.params.eps);
        self.cal_minus_closed = -self.c * PI * self.packing.sum_r2() * (ae * ae + we * we / 9.0);

        self.action_integral = self.integrate_action();
        let value = self.cal_plus + self.cal_minus;
        self.cal = CalabiValue { value, route: CalabiRoute::Hamiltonian, error_estimate: (value - self.action_integral).abs() };
    }

    /// `int_D sigma dx dy`: a radial integral of `sigma_plus` plus, on each
    /// rotor disk, the local integral of `sigma - sigma_plus` evaluated
    /// pointwise from the closed-form action.
    fn integrate_action(&self) -> f64 {
        let rule = GaussLegendre::new(10);
        let chi_d = make_cutoff(self.params.delta).expect("validated");
        let radial = PI * piecewise(&rule, 0.0, 1.0, &[chi_d.affine_end(), chi_d.support_end()], |s| {
            self.phi_plus.profile.action(s)
        });
        let chi_e = self.phi_minus.chi();
        let angular = 16;
        let mut correction = 0.0;
        for d in &self.packing.disks {
            let r = d.radius;
            let breaks = [r * chi_e.affine_end().sqrt(), r * chi_e.support_end().sqrt()];
            let ring = |rho: f64| -> f64 {
                let mut acc = 0.0;
                for k in 0..angular {
                    let z = d.center + C::from_polar(rho, TAU * (k as f64 + 0.5) / angular as f64);
                    acc += self.sigma(z) - self.phi_plus.action(z);
                }
                acc * TAU / angular as f64 * rho
            };
            correction += piecewise(&rule, 0.0, r, &breaks, ring);
        }
        radial + correction
    }

    /// A global polar grid (`nr x nt` cell centers) plus an `m x 2m` local
    /// polar grid on every rotor disk, where the map varies fastest.
    pub fn sample_points(&self, nr: usize, nt: usize, m: usize) -> Vec<C> {
        let mut pts = Vec::with_capacity(nr * nt + self.packing.disks.len() * 2 * m * m);
        for i in 0..nr {
            let r = (i as f64 + 0.5) / nr as f64;
            for j in 0..nt {
                pts.push(C::from_polar(r, TAU * j as f64 / nt as f64));
            }
        }
        let alpha = self.packing.sector_angle();
        for k in 0..self.params.n {
            let rot = C::from_polar(1.0, alpha * k as f64);
            for d in self.packing.sector_disks() {
                for i in 0..m {
                    let rho = d.radius * (i as f64 + 0.5) / m as f64;
                    for j in 0..2 * m {
                        pts.push((d.center + C::from_polar(rho, TAU * (j as f64 + 0.25) / (2 * m) as f64)) * rot);
                    }
                }
            }
        }
        pts
    }

    /// `(x, y, r)` rows of the packing.
    pub fn packing_rows(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        self.packing.disks.iter().map(|d| (d.center.re, d.center.im, d.radius))
    }

    pub fn isotopy(&self) -> PhiIsotopy {
        Composed { outer: self.phi_plus.clone(), inner: self.phi_minus.clone() }
    }

    pub fn shared_isotopy(&self) -> SharedIsotopy {
        Arc::new(self.isotopy())
    }

    pub fn phi(&self, z: C) -> C {
        self.phi_at(1.0, z)
    }

    pub fn phi_at(&self, t: f64, z: C) -> C {
        self.phi_plus.at(t, self.phi_minus.at(t, z))
    }

    /// Closed-form `D phi(z)`, chained through the radial pieces.
    pub fn jacobian(&self, z: C) -> [[f64; 2]; 2] {
        let inner = match self.phi_minus.locate(z) {
            Some((k, i, w)) => {
                let a = self.packing.sector_angle() * k as f64;
                let (c, s) = (a.cos(), a.sin());
                let j = self.phi_minus.rotor(i).jacobian_at(1.0, w);
                // R j R^T
                let rj = [[c * j[0][0] - s * j[1][0], c * j[0][1] - s * j[1][1]], [s * j[0][0] + c * j[1][0], s * j[0][1] + c * j[1][1]]];
                [[rj[0][0] * c - rj[0][1] * s, rj[0][0] * s + rj[0][1] * c], [rj[1][0] * c - rj[1][1] * s, rj[1][0] * s + rj[1][1] * c]]
            }
            None => [[1.0, 0.0], [0.0, 1.0]],
        };
        let outer = self.phi_plus.jacobian_at(1.0, self.phi_minus.map(z));
        let mut out = [[0.0; 2]; 2];
        for (r, row) in out.iter_mut().enumerate() {
            for (c, v) in row.iter_mut().enumerate() {
                *v = outer[r][0] * inner[0][c] + outer[r][1] * inner[1][c];
            }
        }
        out
    }

    /// `sigma = sigma_plus o phi_minus + sigma_minus`, w.r.t. `lambda_0`.
    pub fn sigma(&self, z: C) -> f64 {
        self.sigma_at(1.0, z)
    }

    pub fn sigma_at(&self, t: f64, z: C) -> f64 {
        self.phi_plus.action_at(t, self.phi_minus.at(t, z)) + self.phi_minus.action_at(t, z)
    }

    /// Return time `sigma + pi`.
    pub fn tau(&self, z: C) -> f64 {
        self.sigma(z) + PI
    }

    /// `CAL` bound `pi^2 / n - c (1 - eps)^2 rho pi` from the two piece estimates.
    pub fn cal_bound(&self) -> f64 {
        let n = self.params.n as f64;
        PI * PI / n - self.c * (1.0 - self.params.eps).powi(2) * self.params.rho_target * PI
    }

    /// The expression `-pi^2 + pi^2 (1 + 2 (1 - eps)^2 rho) / n`.
    pub fn cal_bound_literal(&self) -> f64 {
        let n = self.params.n as f64;
        -PI * PI + PI * PI * (1.0 + 2.0 * (1.0 - self.params.eps).powi(2) * self.params.rho_target) / n
    }

    /// Squared radius beyond which `phi = id` exactly.
    pub fn band_start(&self) -> f64 {
        1.0 - 0.5 * self.params.delta
    }

    /// Action of the origin, `(pi / n)(1 - delta)`.
    pub fn origin_action(&self) -> f64 {
        PI / self.params.n as f64 * (1.0 - self.params.delta)
    }
}
