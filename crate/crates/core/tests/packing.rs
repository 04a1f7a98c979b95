use diskreeb_core::maximizer::{pack_sector, pack_sector_with, PackingOptions};
use diskreeb_core::{C, PI};
use proptest::prelude::*;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(8))]

    #[test]
    fn packings_are_symmetric_disjoint_and_dense_enough(n in 4usize..=16, rho in 0.3f64..0.75, seed in any::<u64>()) {
        let p = pack_sector(n, rho, seed).unwrap();
        prop_assert!(p.validate().is_ok());
        let alpha = 2.0 * PI / n as f64;
        let back = C::from_polar(1.0, -alpha);
        let sector = p.sector_disks();
        for d in sector {
            // Inside the open wedge 0 < theta < alpha, clear of both rays and the rim.
            prop_assert!(d.center.im >= d.radius);
            prop_assert!((d.center * back).im <= -d.radius);
            prop_assert!(d.center.norm() + d.radius <= 1.0 + 1e-12);
        }
        for (i, a) in sector.iter().enumerate() {
            for b in &sector[i + 1..] {
                prop_assert!((a.center - b.center).norm() >= a.radius + b.radius);
            }
        }
        prop_assert_eq!(p.disks.len(), n * p.sector_len);
        for k in 1..n {
            let rot = C::from_polar(1.0, k as f64 * alpha);
            for (i, d) in sector.iter().enumerate() {
                prop_assert!((p.disks[k * p.sector_len + i].center - d.center * rot).norm() < 1e-12);
            }
        }
        let density: f64 = p.disks.iter().map(|d| d.radius * d.radius).sum();
        prop_assert!((density - p.density).abs() < 1e-12);
        prop_assert!(p.density >= rho);
    }

    #[test]
    fn the_seed_pins_the_packing(seed in any::<u64>()) {
        let opts = PackingOptions { outer_radius: 0.98, ..PackingOptions::default() };
        prop_assert_eq!(pack_sector_with(8, 0.6, seed, &opts).unwrap(), pack_sector_with(8, 0.6, seed, &opts).unwrap());
    }
}

#[test]
fn infeasible_targets_are_rejected() {
    assert!(pack_sector(16, 0.95, 1).is_err());
}
