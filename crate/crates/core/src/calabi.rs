//! Actions of isotopies and the Calabi invariant, computed by independent routes.

use alloc::string::String;
use alloc::sync::Arc;
use core::fmt;

use crate::diskforms::{DensityForm, Primitive};
use crate::hamflow::{integrate_flow, DiskIsotopy, FlowOptions, RadialProfile, TimeHamiltonian, DEFAULT_STEPS};
use crate::quad::{GaussLegendre, PolarRule};
use crate::{Error, Result, C};

/// Which primitive an action is measured against.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum PrimitiveTag {
    Lambda0,
    LambdaA,
    Other(String),
}

impl PrimitiveTag {
    pub fn of(p: &Primitive) -> Self {
        match p {
            Primitive::Lambda0 => PrimitiveTag::Lambda0,
            Primitive::LambdaA(_) => PrimitiveTag::LambdaA,
            Primitive::PlusExact(..) => PrimitiveTag::Other("exact-shift".into()),
            Primitive::Pullback(..) => PrimitiveTag::Other("pullback".into()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Provenance {
    ClosedForm,
    HamiltonianRoute,
    GeneratingFunction,
}

/// A scalar action field `sigma` on the closed disk, tied to the isotopy it
/// was computed from.
#[derive(Clone)]
pub struct ActionField {
    eval: Arc<dyn Fn(C) -> f64 + Send + Sync>,
    pub primitive: PrimitiveTag,
    pub provenance: Provenance,
}

impl fmt::Debug for ActionField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ActionField")
            .field("primitive", &self.primitive)
            .field("provenance", &self.provenance)
            .finish_non_exhaustive()
    }
}

impl ActionField {
    pub fn new(
        eval: impl Fn(C) -> f64 + Send + Sync + 'static,
        primitive: PrimitiveTag,
        provenance: Provenance,
    ) -> Self {
        Self { eval: Arc::new(eval), primitive, provenance }
    }

    pub fn zero() -> Self {
        Self::new(|_| 0.0, PrimitiveTag::Lambda0, Provenance::ClosedForm)
    }

    /// Closed-form action of the radial flow of `h` w.r.t. `lambda_0`.
    pub fn radial(h: RadialProfile) -> Self {
        Self::new(move |z| action_radial(&h, z), PrimitiveTag::Lambda0, Provenance::ClosedForm)
    }

    /// Trajectory-route action of `ham` w.r.t. `lambda`.
    pub fn hamiltonian<H>(ham: H, form: DensityForm, lambda: Primitive, steps: usize) -> Self
    where
        H: TimeHamiltonian + Send + Sync + 'static,
    {
        let tag = PrimitiveTag::of(&lambda);
        Self::new(
            move |z| action_via_hamiltonian_steps(&ham, &form, &lambda, z, steps).unwrap_or(f64::NAN),
            tag,
            Provenance::HamiltonianRoute,
        )
    }

    pub fn at(&self, z: C) -> f64 {
        (self.eval)(z)
    }
}

/// `sigma(z) = int_{t -> phi_t(z)} lambda + int_0^1 H_t(phi_t(z)) dt`.
pub fn action_via_hamiltonian(h: &dyn TimeHamiltonian, form: &DensityForm, lambda: &Primitive, z: C) -> Result<f64> {
    action_via_hamiltonian_steps(h, form, lambda, z, DEFAULT_STEPS)
}

pub fn action_via_hamiltonian_steps(
    h: &dyn TimeHamiltonian,
    form: &DensityForm,
    lambda: &Primitive,
    z: C,
    steps: usize,
) -> Result<f64> {
    let opts = FlowOptions { steps, primitive: Some(lambda), ..FlowOptions::default() };
    Ok(integrate_flow(h, form, z, opts)?.action())
}

/// `h(s) - s h'(s)` at `s = |z|^2`: the action w.r.t. `lambda_0`.
pub fn action_radial(h: &RadialProfile, z: C) -> f64 {
    h.action(z.norm_sqr())
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum CalabiRoute {
    Hamiltonian,
    ActionIntegral,
    GeneratingFunction,
    ClosedForm,
}

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CalabiValue {
    pub value: f64,
    pub route: CalabiRoute,
    pub error_estimate: f64,
}

impl CalabiValue {
    /// Replaces the error estimate by the gap to an independent route.
    pub fn cross_checked(mut self, other: &CalabiValue) -> Self {
        self.error_estimate = (self.value - other.value).abs();
        self
    }

    pub fn relative_gap(&self, other: &CalabiValue) -> f64 {
        let scale = self.value.abs().max(other.value.abs()).max(1e-300);
        (self.value - other.value).abs() / scale
    }
}

/// Quadrature settings for disk integrals.
#[derive(Clone, Debug)]
pub struct CalabiOptions {
    pub disk: PolarRule,
    /// Gauss nodes in time (ignored for autonomous Hamiltonians).
    pub time_nodes: usize,
    /// Relative refinement gap above which a nonconvergence error is raised.
    pub max_rel_gap: f64,
}

impl Default for CalabiOptions {
    fn default() -> Self {
        Self { disk: PolarRule::default(), time_nodes: 8, max_rel_gap: 1e-2 }
    }
}

fn checked(value: f64, estimate: f64, route: CalabiRoute, opts: &CalabiOptions) -> Result<CalabiValue> {
    if !value.is_finite() || estimate > opts.max_rel_gap * value.abs().max(1.0) {
        return Err(Error::QuadratureNonconvergence { budget: opts.disk.nodes().len() });
    }
    Ok(CalabiValue { value, route, error_estimate: estimate })
}

/// `CAL = 2 int_0^1 int_D H_t omega dt`.
pub fn calabi_via_hamiltonian(h: &dyn TimeHamiltonian, form: &DensityForm) -> Result<CalabiValue> {
    calabi_via_hamiltonian_with(h, form, &CalabiOptions::default())
}

pub fn calabi_via_hamiltonian_with(h: &dyn TimeHamiltonian, form: &DensityForm, opts: &CalabiOptions) -> Result<CalabiValue> {
    let times = if h.is_autonomous() { GaussLegendre::new(1) } else { GaussLegendre::new(opts.time_nodes) };
    let integrand = |r: f64, th: f64| {
        let z = C::from_polar(r, th);
        let ht: f64 = times.mapped(0.0, 1.0).map(|(t, w)| w * h.value(t, z)).sum();
        2.0 * ht * form.density(r, th)
    };
    let (value, est) = opts.disk.integrate_with_estimate(integrand);
    checked(value, est, CalabiRoute::Hamiltonian, opts)
}

/// `CAL = int_D sigma omega`.
pub fn calabi_via_action(sigma: &ActionField, form: &DensityForm) -> Result<CalabiValue> {
    calabi_via_action_with(sigma, form, &CalabiOptions::default())
}

pub fn calabi_via_action_with(sigma: &ActionField, form: &DensityForm, opts: &CalabiOptions) -> Result<CalabiValue> {
    let integrand = |r: f64, th: f64| sigma.at(C::from_polar(r, th)) * form.density(r, th);
    let (value, est) = opts.disk.integrate_with_estimate(integrand);
    checked(value, est, CalabiRoute::ActionIntegral, opts)
}

/// `sigma_{psi o phi} = sigma_psi o phi + sigma_phi`.
pub fn action_of_composition<I>(outer: &ActionField, inner_map: I, inner: &ActionField) -> ActionField
where
    I: DiskIsotopy + Send + Sync + 'static,
{
    let (o, i) = (outer.clone(), inner.clone());
    let provenance = if outer.provenance == inner.provenance { outer.provenance } else { Provenance::HamiltonianRoute };
    ActionField::new(move |z| o.at(inner_map.map(z)) + i.at(z), outer.primitive.clone(), provenance)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::hamflow::*;
    use crate::maximizer::make_cutoff;
    use crate::mobius::Mobius;
    use crate::poly::Poly2;
    use crate::PI;
    use rand::{Rng, SeedableRng};

    fn std_form() -> DensityForm {
        DensityForm::standard()
    }

    #[test]
    fn radial_action_examples() {
        let h = RadialProfile::Poly { coeffs: alloc::vec![PI] };
        for &z in &[C::new(0.0, 0.0), C::new(0.5, 0.5), C::new(1.0, 0.0)] {
            assert!((action_radial(&h, z) - PI).abs() < 1e-15);
        }
        let chi = make_cutoff(0.05).unwrap();
        let n = 8;
        let p = RadialProfile::cutoff_rotation(n, chi);
        for k in 0..=1000 {
            let s = k as f64 / 1000.0;
            let a = action_radial(&p, C::new(s.sqrt(), 0.0));
            assert!(a >= -1e-15 && a <= PI / n as f64 * 0.95 + 1e-12);
        }
    }

    #[test]
    fn hamiltonian_route_examples() {
        let lam = Primitive::Lambda0;
        let z = C::new(0.3, -0.4);
        assert_eq!(action_via_hamiltonian(&ZeroHamiltonian, &std_form(), &lam, z).unwrap(), 0.0);
        let n = 8;
        let delta = 0.05;
        let h = RadialHamiltonian::centered(RadialProfile::cutoff_rotation(n, make_cutoff(delta).unwrap()));
        for &z in &[C::new(0.0, 0.0), C::new(0.6, 0.2), C::new(-0.2, -0.9)] {
            let s = action_via_hamiltonian(&h, &std_form(), &lam, z).unwrap();
            assert!((s - PI / n as f64 * (1.0 - delta)).abs() < 1e-9);
        }
        let beta = 0.9;
        let h = RadialHamiltonian::centered(RadialProfile::rotation(beta));
        let s = action_via_hamiltonian(&h, &std_form(), &lam, C::new(0.0, 0.0)).unwrap();
        assert!((s - beta / 2.0).abs() < 1e-12);
    }

    #[test]
    fn radial_and_trajectory_actions_agree() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for p in registered_profiles() {
            let h = RadialHamiltonian::centered(p.clone());
            for _ in 0..50 {
                let z = C::from_polar(rng.random::<f64>().sqrt(), rng.random::<f64>() * crate::TAU);
                let a = action_via_hamiltonian(&h, &std_form(), &Primitive::Lambda0, z).unwrap();
                assert!((a - action_radial(&p, z)).abs() < 1e-7, "{}", p.name());
            }
        }
    }

    #[test]
    fn calabi_examples() {
        for n in [4usize, 8, 16] {
            let h = RadialHamiltonian::centered(RadialProfile::global_rotation(n));
            let v = calabi_via_hamiltonian(&h, &std_form()).unwrap();
            assert!((v.value - PI * PI / n as f64).abs() < 1e-10);
            let a = calabi_via_action(&ActionField::radial(h.profile.clone()), &std_form()).unwrap();
            assert!((a.value - PI * PI / n as f64).abs() < 1e-10);
            let chi = make_cutoff(0.05).unwrap();
            let hc = RadialHamiltonian::centered(RadialProfile::cutoff_rotation(n, chi));
            let v = calabi_via_hamiltonian(&hc, &std_form()).unwrap().value;
            assert!(v > 0.0 && v <= PI * PI / n as f64);
        }
        assert_eq!(calabi_via_hamiltonian(&ZeroHamiltonian, &std_form()).unwrap().value, 0.0);
        let sigma_pi = ActionField::radial(RadialProfile::Poly { coeffs: alloc::vec![PI] });
        assert!((calabi_via_action(&sigma_pi, &std_form()).unwrap().value - PI * PI).abs() < 1e-10);
    }

    #[test]
    fn rotor_calabi_bound() {
        let eps = 0.1;
        let (c, r) = (0.4, 0.2);
        let rotor = RadialFlow { profile: RadialProfile::rotor(c, r, make_cutoff(eps).unwrap()), center: C::new(0.3, 0.1) };
        let sigma = ActionField::new(move |z| rotor.action(z), PrimitiveTag::Lambda0, Provenance::ClosedForm);
        let opts = CalabiOptions { disk: PolarRule::new(64, 64, 8), ..CalabiOptions::default() };
        let v = calabi_via_action_with(&sigma, &std_form(), &opts).unwrap().value;
        let bound = -c * r * r * (1.0 - eps).powi(2) * PI;
        assert!(v <= bound, "{v} > {bound}");
    }

    #[test]
    fn two_routes_on_nonstandard_forms() {
        let q = Poly2::new(alloc::vec![(2, 0, 0.5), (1, 1, -0.4), (0, 3, 0.3)]);
        let ham = EnvelopedPoly { power: 2, q0: q, q1: Poly2::new(alloc::vec![(0, 2, 0.2)]) };
        let opts = CalabiOptions { disk: PolarRule::new(6, 8, 6), ..CalabiOptions::default() };
        for form in [DensityForm::tilted(0.4).unwrap(), DensityForm::cos_modulated()] {
            let lam = Primitive::for_form(&form);
            let via_h = calabi_via_hamiltonian_with(&ham, &form, &opts).unwrap();
            let sigma = ActionField::hamiltonian(ham.clone(), form.clone(), lam, 300);
            let via_a = calabi_via_action_with(&sigma, &form, &opts).unwrap();
            assert!(via_h.relative_gap(&via_a) < 1e-4, "{} vs {}", via_h.value, via_a.value);
        }
    }

    #[test]
    fn composition_with_identity_and_origin_value() {
        let n = 8;
        let delta = 0.05;
        let sp = ActionField::radial(RadialProfile::cutoff_rotation(n, make_cutoff(delta).unwrap()));
        let same = action_of_composition(&sp, Identity, &ActionField::zero());
        assert_eq!(same.at(C::new(0.2, 0.1)), sp.at(C::new(0.2, 0.1)));
        let rotor = RadialFlow { profile: RadialProfile::rotor(crate::TAU / n as f64, 0.1, make_cutoff(0.1).unwrap()), center: C::new(0.5, 0.2) };
        let sm = {
            let r = rotor.clone();
            ActionField::new(move |z| r.action(z), PrimitiveTag::Lambda0, Provenance::ClosedForm)
        };
        let total = action_of_composition(&sp, rotor, &sm);
        assert!((total.at(C::new(0.0, 0.0)) - PI / n as f64 * (1.0 - delta)).abs() < 1e-15);
    }

    #[test]
    fn naturality_under_mobius() {
        let q = Poly2::new(alloc::vec![(2, 0, 0.5), (1, 2, 0.7)]);
        let ham = EnvelopedPoly::autonomous(2, q);
        let h = Mobius::new(C::new(0.25, 0.3)).unwrap();
        let base = std_form();
        let pulled = DensityForm::pullback(&base, h);
        let a = calabi_via_hamiltonian(&ham, &base).unwrap();
        let b = calabi_via_hamiltonian(&PulledBack { ham: ham.clone(), mobius: h }, &pulled).unwrap();
        assert!(a.relative_gap(&b) < 1e-4, "{} vs {}", a.value, b.value);
    }
}
