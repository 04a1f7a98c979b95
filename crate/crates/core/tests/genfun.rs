use std::sync::Arc;

use diskreeb_core::calabi::calabi_via_hamiltonian;
use diskreeb_core::diskforms::DensityForm;
use diskreeb_core::hamflow::{RadialFlow, RadialHamiltonian, RadialProfile};
use diskreeb_core::striplift::{calabi_from_w, generating_function, lift_map, GenFunOptions, LiftOptions};
use proptest::prelude::*;

fn small() -> GenFunOptions {
    GenFunOptions { ntheta: 32, panels: 4, order: 8, closedness_cells: 16 }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(6))]

    // For a rigid rotation by beta, W(0, .) = beta / 2 and W has no dependence on theta.
    #[test]
    fn rotations_have_constant_bottom_value(beta in -0.5f64..0.5) {
        let form = DensityForm::standard();
        let strip = lift_map(Arc::new(RadialFlow::centered(RadialProfile::rotation(beta))), &LiftOptions::grid(16, 32)).unwrap();
        let gf = generating_function(&strip, &form, &small()).unwrap();
        prop_assert!((gf.bottom_value() - 0.5 * beta).abs() < 1e-9);
        prop_assert!(gf.bottom_spread() < 1e-9);
        prop_assert!(gf.closedness.max_curl < 1e-6);
    }

    #[test]
    fn calabi_from_w_matches_the_hamiltonian(c0 in -0.3f64..0.3, c1 in -0.2f64..0.2) {
        let form = DensityForm::standard();
        let profile = RadialProfile::Poly { coeffs: vec![c0, c1] };
        let strip = lift_map(Arc::new(RadialFlow::centered(profile.clone())), &LiftOptions::grid(16, 32)).unwrap();
        let gf = generating_function(&strip, &form, &small()).unwrap();
        let exact = calabi_via_hamiltonian(&RadialHamiltonian::centered(profile), &form).unwrap();
        let got = calabi_from_w(&gf, &form);
        prop_assert!((got.value - exact.value).abs() < 1e-6 * exact.value.abs().max(1.0), "{} vs {}", got.value, exact.value);
        prop_assert!(gf.gradient_residual(8, 1e-4).unwrap() < 1e-6);
    }
}
