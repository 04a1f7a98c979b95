//! The invariant suite run by `verify`: one row per check, with the
//! tolerance it was judged at.

use std::f64::consts::PI;
use std::sync::Arc;

use diskreeb_core::calabi::{
    calabi_via_action_with, calabi_via_hamiltonian, calabi_via_hamiltonian_with, ActionField, CalabiOptions,
};
use diskreeb_core::diskforms::{registered_forms, DensityForm, Primitive};
use diskreeb_core::hamflow::{
    integrate_flow, radial_flow, registered_profiles, ActionSource, EnvelopedPoly, FlowOptions,
    HamiltonianIsotopy, Negated, ProductHamiltonian, PulledBack, RadialFlow, RadialHamiltonian, RadialProfile,
};
use diskreeb_core::maximizer::{
    build_counterexample, pack_sector_with, verify_construction, CheckStatus, MaximizerConstruction, MaximizerParams,
    PackingOptions, Variant,
};
use diskreeb_core::mobius::Mobius;
use diskreeb_core::poly::Poly2;
use diskreeb_core::quad::PolarRule;
use diskreeb_core::reebsys::contact_volume;
use diskreeb_core::striplift::{calabi_from_w, generating_function, lift_map, GenFunOptions, LiftOptions};
use diskreeb_core::C;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::files::packing_csv;
use crate::Failure;

#[derive(Clone, Debug, Serialize)]
pub struct Row {
    pub suite: &'static str,
    pub name: String,
    pub measured: f64,
    pub tolerance: f64,
    pub passed: bool,
    pub note: String,
}

impl Row {
    fn below(suite: &'static str, name: impl Into<String>, measured: f64, tolerance: f64) -> Self {
        Row { suite, name: name.into(), measured, tolerance, passed: measured <= tolerance, note: String::new() }
    }

    fn note(mut self, note: impl Into<String>) -> Self {
        self.note = note.into();
        self
    }
}

pub struct SuiteOptions {
    pub seed: u64,
    /// Randomized instances of the algebraic identities.
    pub instances: usize,
    /// Checked in addition to the built-in calpic instance when given.
    pub construction: Option<MaximizerConstruction>,
}

impl Default for SuiteOptions {
    fn default() -> Self {
        Self { seed: 7, instances: 4, construction: None }
    }
}

fn random_point(rng: &mut ChaCha8Rng, radius: f64) -> C {
    C::from_polar(radius * rng.random::<f64>().sqrt(), rng.random_range(0.0..std::f64::consts::TAU))
}

/// A small random polynomial with monomials of degree 1..=3.
fn random_poly(rng: &mut ChaCha8Rng, scale: f64) -> Poly2 {
    let terms = [(1, 0), (0, 1), (2, 0), (1, 1), (0, 2), (2, 1), (0, 3)];
    Poly2::new(terms.iter().map(|&(i, j)| (i, j, scale * rng.random_range(-1.0..1.0))).collect())
}

fn radial_oracle(rows: &mut Vec<Row>, rng: &mut ChaCha8Rng) -> Result<(), Failure> {
    let form = DensityForm::standard();
    let mut worst = 0.0f64;
    for p in registered_profiles() {
        let ham = RadialHamiltonian::centered(p.clone());
        for _ in 0..20 {
            let z = random_point(rng, 1.0);
            let end = integrate_flow(&ham, &form, z, FlowOptions::default())?.end();
            worst = worst.max((end - radial_flow(&p, z, 1.0)).norm());
        }
    }
    rows.push(Row::below("hamflow", "radial flow vs closed form", worst, 1e-8));
    Ok(())
}

fn two_route_calabi(rows: &mut Vec<Row>) -> Result<(), Failure> {
    let ham = EnvelopedPoly {
        power: 2,
        q0: Poly2::new(vec![(2, 0, 0.5), (1, 1, -0.4), (0, 3, 0.3)]),
        q1: Poly2::new(vec![(0, 2, 0.2)]),
    };
    let opts = CalabiOptions { disk: PolarRule::new(8, 16, 6), ..CalabiOptions::default() };
    let mut worst = 0.0f64;
    for form in registered_forms() {
        let lam = Primitive::for_form(&form);
        let via_h = calabi_via_hamiltonian_with(&ham, &form, &opts)?;
        let sigma = ActionField::hamiltonian(ham.clone(), form.clone(), lam, 300);
        let via_a = calabi_via_action_with(&sigma, &form, &opts)?;
        worst = worst.max(via_h.relative_gap(&via_a));
    }
    rows.push(Row::below("calabi", "two routes, registered forms (relative)", worst, 1e-4));

    let n = 8;
    let exact = PI * PI / n as f64;
    let profile = RadialProfile::global_rotation(n);
    let form = DensityForm::standard();
    let via_h = calabi_via_hamiltonian(&RadialHamiltonian::centered(profile.clone()), &form)?;
    let via_a = calabi_via_action_with(&ActionField::radial(profile), &form, &CalabiOptions::default())?;
    let gap = (via_h.value - exact).abs().max((via_a.value - exact).abs());
    rows.push(Row::below("calabi", "global rotation by 2 pi/8 gives pi^2/8", gap, 1e-6));
    Ok(())
}

fn identities(rows: &mut Vec<Row>, rng: &mut ChaCha8Rng, instances: usize) -> Result<(), Failure> {
    let form = DensityForm::standard();
    let lam = Primitive::Lambda0;
    let (mut gauge, mut comp, mut inv, mut hom, mut nat) = (0.0f64, 0.0f64, 0.0f64, 0.0f64, 0.0f64);
    for _ in 0..instances {
        let q = random_poly(rng, 0.4);
        let ham = EnvelopedPoly::autonomous(2, q.clone());
        let iso = HamiltonianIsotopy::new(ham.clone(), form.clone(), 1000);
        let u = random_poly(rng, 0.5);
        let z = random_point(rng, 0.9);
        let w = iso.try_at(1.0, z)?;

        let base = iso.action_with(&lam, 1.0, z)?;
        let shifted = iso.action_with(&lam.plus_exact(u.clone()), 1.0, z)?;
        gauge = gauge.max((shifted - (base + u.value(w) - u.value(z))).abs());

        let outer = RadialHamiltonian::centered(RadialProfile::Poly { coeffs: vec![rng.random_range(-0.5..0.5), rng.random_range(-0.3..0.3)] });
        let outer_flow = RadialFlow::from(&outer);
        let prod = HamiltonianIsotopy::new(ProductHamiltonian { outer: outer.clone(), inner: ham.clone() }, form.clone(), 1000);
        let direct = prod.action_with(&lam, 1.0, z)?;
        comp = comp.max((direct - (outer_flow.action(w) + base)).abs());

        let back = HamiltonianIsotopy::new(Negated(ham.clone()), form.clone(), 1000);
        inv = inv.max((back.action_with(&lam, 1.0, w)? + base).abs());

        let c_prod = calabi_via_hamiltonian(&ProductHamiltonian { outer: outer.clone(), inner: ham.clone() }, &form)?;
        let c_sum = calabi_via_hamiltonian(&outer, &form)?.value + calabi_via_hamiltonian(&ham, &form)?.value;
        hom = hom.max((c_prod.value - c_sum).abs() / c_sum.abs().max(1.0));

        let h = Mobius::new(random_point(rng, 0.4))?;
        let a = calabi_via_hamiltonian(&ham, &form)?;
        let b = calabi_via_hamiltonian(&PulledBack { ham, mobius: h }, &DensityForm::pullback(&form, h))?;
        nat = nat.max(a.relative_gap(&b));
    }
    let note = format!("{instances} randomized instances");
    rows.push(Row::below("identities", "action under exact change of primitive", gauge, 1e-8).note(note.clone()));
    rows.push(Row::below("identities", "action of a composition", comp, 1e-7).note(note.clone()));
    rows.push(Row::below("identities", "action of the inverse", inv, 1e-7).note(note.clone()));
    rows.push(Row::below("identities", "Calabi homomorphism (relative)", hom, 1e-4).note(note.clone()));
    rows.push(Row::below("identities", "Calabi under Mobius conjugation (relative)", nat, 1e-4).note(note));
    Ok(())
}

fn generating_function_checks(rows: &mut Vec<Row>) -> Result<(), Failure> {
    let beta = 0.3;
    let form = DensityForm::standard();
    let iso = Arc::new(RadialFlow::centered(RadialProfile::rotation(beta)));
    let strip = lift_map(iso, &LiftOptions::grid(32, 64))?;
    let gf = generating_function(&strip, &form, &GenFunOptions::default())?;
    rows.push(Row::below("genfun", "W(0, .) of rotation 0.3 vs 0.15", (gf.bottom_value() - 0.5 * beta).abs(), 1e-8));
    rows.push(Row::below("genfun", "closedness curl", gf.closedness.max_curl, 1e-5));
    rows.push(Row::below("genfun", "D1 W, D2 W vs central differences", gf.gradient_residual(16, 1e-4)?, 1e-6));
    let cal = calabi_from_w(&gf, &form);
    let exact = calabi_via_hamiltonian(&RadialHamiltonian::centered(RadialProfile::rotation(beta)), &form)?;
    rows.push(Row::below("genfun", "Calabi from W vs Hamiltonian (relative)", cal.relative_gap(&exact), 1e-4));
    Ok(())
}

fn construction_checks(rows: &mut Vec<Row>, cx: &MaximizerConstruction) {
    let label = cx.params.variant.name();
    for c in verify_construction(cx).checks {
        let info = c.status == CheckStatus::Info;
        rows.push(Row {
            suite: "construction",
            name: format!("{label}: {}", c.name),
            measured: c.measured,
            tolerance: c.bound,
            passed: c.status != CheckStatus::Fail,
            note: if info { format!("informational; {}", c.note) } else { c.note },
        });
    }
    let (vol, check) = contact_volume(cx);
    rows.push(Row::below("reebsys", format!("{label}: pi^2 + CAL vs int tau (relative)"), (vol - check).abs() / vol, 1e-4));
}

fn packing_determinism(rows: &mut Vec<Row>, seed: u64) -> Result<(), Failure> {
    let params = MaximizerParams::new(Variant::Calpic, 16, 0.1, 0.7, seed);
    let opts = PackingOptions { outer_radius: params.core_radius(), ..PackingOptions::default() };
    let a = pack_sector_with(16, 0.7, seed, &opts)?;
    let b = pack_sector_with(16, 0.7, seed, &opts)?;
    let csv_a = packing_csv(&build_counterexample(&params)?)?;
    let csv_b = packing_csv(&build_counterexample(&params)?)?;
    let same = a == b && csv_a == csv_b;
    rows.push(Row {
        suite: "maximizer",
        name: "seed-pinned packing is reproducible".into(),
        measured: if same { 0.0 } else { 1.0 },
        tolerance: 0.0,
        passed: same,
        note: format!("seed {seed}, {} bytes of CSV", csv_a.len()),
    });
    Ok(())
}

pub fn run_suite(opts: &SuiteOptions) -> Result<Vec<Row>, Failure> {
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let mut rows = Vec::new();
    radial_oracle(&mut rows, &mut rng)?;
    two_route_calabi(&mut rows)?;
    identities(&mut rows, &mut rng, opts.instances)?;
    generating_function_checks(&mut rows)?;
    packing_determinism(&mut rows, opts.seed)?;
    let calpic = build_counterexample(&MaximizerParams::new(Variant::Calpic, 16, 0.1, 0.7, opts.seed))?;
    construction_checks(&mut rows, &calpic);
    if let Some(cx) = &opts.construction {
        construction_checks(&mut rows, cx);
    }
    Ok(rows)
}
