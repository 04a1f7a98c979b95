use std::sync::Arc;

use diskreeb_core::diskforms::DensityForm;
use diskreeb_core::hamflow::{jacobian_fd, Conjugated, DiskIsotopy, EnvelopedPoly, HamiltonianIsotopy, SharedIsotopy};
use diskreeb_core::mobius::Mobius;
use diskreeb_core::poly::Poly2;
use diskreeb_core::reebsys::TOL_FIX;
use diskreeb_core::striplift::{lift_map, mobius_conjugate, LiftOptions};
use diskreeb_core::C;
use proptest::prelude::*;

/// `sup |phi - id| + sup |D phi - I|` over a polar sample.
fn c1_distance(phi: &dyn DiskIsotopy) -> f64 {
    let mut worst = 0.0f64;
    for i in 0..8 {
        for j in 0..12 {
            let z = C::from_polar(0.95 * (i as f64 + 0.5) / 8.0, j as f64 * std::f64::consts::TAU / 12.0);
            let jac = jacobian_fd(|w| phi.map(w), z, 1e-5);
            let d = (jac[0][0] - 1.0).abs().max(jac[0][1].abs()).max(jac[1][0].abs()).max((jac[1][1] - 1.0).abs());
            worst = worst.max((phi.map(z) - z).norm() + d);
        }
    }
    worst
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    // A C^1-small map with an interior fixed point z0 becomes radially monotone
    // once z0 is moved to the origin.
    #[test]
    fn small_maps_are_monotonized(
        coeffs in prop::collection::vec(-0.02f64..0.02, 5),
        r0 in 0.05f64..0.5,
        a0 in 0.0f64..std::f64::consts::TAU,
    ) {
        let q = Poly2::new(vec![(2, 0, coeffs[0]), (1, 1, coeffs[1]), (0, 2, coeffs[2]), (2, 1, coeffs[3]), (0, 3, coeffs[4])]);
        let psi = HamiltonianIsotopy::new(EnvelopedPoly::autonomous(2, q), DensityForm::standard(), 200);
        let z0 = C::from_polar(r0, a0);
        // h o psi o h^-1 with h(0) = z0, so z0 is fixed.
        let phi: SharedIsotopy = Arc::new(Conjugated { inner: psi, mobius: Mobius::new(-z0).unwrap() });
        let dist = c1_distance(phi.as_ref());
        prop_assume!(dist < 0.05);

        let conj = mobius_conjugate(phi, &DensityForm::standard(), z0, TOL_FIX).unwrap();
        prop_assert!(conj.isotopy.map(C::new(0.0, 0.0)).norm() < 1e-9);
        let strip = lift_map(conj.isotopy, &LiftOptions::grid(16, 32)).unwrap();
        prop_assert!(strip.monotone, "C1 distance {dist}");
    }
}
