//! Convex cutoff profiles `chi_delta`.
//!
//! `chi_delta` is the mollification of `s -> max(1 - delta - s, 0)` by the
//! triweight kernel `K(u) = 35/32 (1 - u^2)^3` scaled to half-width `delta/2`.
//! All evaluators are closed-form polynomials in `v = (s - (1-delta)) / (delta/2)`.

use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct CutoffProfile {
    delta: f64,
}

/// Builds `chi_delta`, `0 < delta < 1/2`.
pub fn make_cutoff(delta: f64) -> Result<CutoffProfile> {
    if !(delta > 0.0 && delta < 0.5) {
        return Err(Error::ParameterOutOfRange(alloc::format!("cutoff needs 0 < delta < 1/2, got {delta}")));
    }
    Ok(CutoffProfile { delta })
}

fn kernel(v: f64) -> f64 {
    let q = 1.0 - v * v;
    35.0 / 32.0 * q * q * q
}

/// `int_v^1 K`.
fn upper_mass(v: f64) -> f64 {
    let v2 = v * v;
    0.5 - 35.0 / 32.0 * v * (1.0 - v2 + 0.6 * v2 * v2 - v2 * v2 * v2 / 7.0)
}

/// `int_v^1 u K(u) du`.
fn upper_moment(v: f64) -> f64 {
    let q = 1.0 - v * v;
    35.0 / 256.0 * q * q * q * q
}

impl CutoffProfile {
    pub fn delta(&self) -> f64 {
        self.delta
    }

    fn a(&self) -> f64 {
        1.0 - self.delta
    }

    fn w(&self) -> f64 {
        0.5 * self.delta
    }

    /// Right end of the exactly affine region, `1 - 3 delta / 2`.
    pub fn affine_end(&self) -> f64 {
        self.a() - self.w()
    }

    /// Left end of the zero region, `1 - delta / 2`.
    pub fn support_end(&self) -> f64 {
        self.a() + self.w()
    }

    fn v(&self, s: f64) -> f64 {
        (s - self.a()) / self.w()
    }

    pub fn value(&self, s: f64) -> f64 {
        if s <= self.affine_end() {
            return self.a() - s;
        }
        if s >= self.support_end() {
            return 0.0;
        }
        let v = self.v(s);
        (self.a() - s) * upper_mass(v) + self.w() * upper_moment(v)
    }

    pub fn d1(&self, s: f64) -> f64 {
        if s <= self.affine_end() {
            return -1.0;
        }
        if s >= self.support_end() {
            return 0.0;
        }
        -upper_mass(self.v(s))
    }

    pub fn d2(&self, s: f64) -> f64 {
        if s <= self.affine_end() || s >= self.support_end() {
            return 0.0;
        }
        kernel(self.v(s)) / self.w()
    }

    pub fn d3(&self, s: f64) -> f64 {
        if s <= self.affine_end() || s >= self.support_end() {
            return 0.0;
        }
        let v = self.v(s);
        let q = 1.0 - v * v;
        -105.0 / 16.0 * v * q * q / (self.w() * self.w())
    }

    /// `chi(s) - s chi'(s)`, computed without cancellation.
    pub fn action_part(&self, s: f64) -> f64 {
        if s <= self.affine_end() {
            return self.a();
        }
        if s >= self.support_end() {
            return 0.0;
        }
        let v = self.v(s);
        self.a() * upper_mass(v) + self.w() * upper_moment(v)
    }

    /// `int_0^inf chi = (1-delta)^2 / 2 + (delta/2)^2 / 18`.
    pub fn integral(&self) -> f64 {
        0.5 * self.a() * self.a() + self.w() * self.w() / 18.0
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::quad::Adaptive;
    use proptest::prelude::*;

    #[test]
    fn endpoint_examples() {
        let c = make_cutoff(0.1).unwrap();
        assert_eq!(c.value(0.0), 0.9);
        assert_eq!(c.value(1.0), 0.0);
        assert!(make_cutoff(0.5).is_err() && make_cutoff(0.0).is_err());
    }

    #[test]
    fn affine_region_is_exact_on_required_interval() {
        for &d in &[0.01, 0.05, 0.2, 0.45] {
            let c = make_cutoff(d).unwrap();
            for k in 0..=1000 {
                let s = (1.0 - 2.0 * d) * k as f64 / 1000.0;
                assert!((c.value(s) - (1.0 - d - s)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn action_part_bounded_on_dense_samples() {
        for &d in &[0.02, 0.1, 0.3] {
            let c = make_cutoff(d).unwrap();
            let mut max = f64::MIN;
            for k in 0..10_000 {
                let s = k as f64 / 9_999.0;
                let v = c.value(s) - s * c.d1(s);
                max = max.max(v);
                assert!(v >= -1e-15);
                assert!((v - c.action_part(s)).abs() < 1e-14);
            }
            assert!(max <= 1.0 - d + 1e-10);
        }
    }

    #[test]
    fn integral_matches_quadrature_and_derivatives_match_differences() {
        for &d in &[0.02, 0.1, 0.3] {
            let c = make_cutoff(d).unwrap();
            let q = Adaptive::new(1e-14, 1_000_000);
            let num = q.integrate(0.0, 1.0, |s| c.value(s)).unwrap();
            assert!((num - c.integral()).abs() < 1e-13);
            let h = 1e-6;
            for k in 1..200 {
                let s = k as f64 / 200.0;
                let d1 = (c.value(s + h) - c.value(s - h)) / (2.0 * h);
                let d2 = (c.d1(s + h) - c.d1(s - h)) / (2.0 * h);
                let d3 = (c.d2(s + h) - c.d2(s - h)) / (2.0 * h);
                assert!((d1 - c.d1(s)).abs() < 1e-8);
                assert!((d2 - c.d2(s)).abs() < 1e-5 * (1.0 + c.d2(s).abs()));
                assert!((d3 - c.d3(s)).abs() < 1e-3 * (1.0 + c.d3(s).abs()), "s={s}");
            }
        }
    }

    proptest! {
        #[test]
        fn shape_invariants(d in 0.001..0.499f64, s in 0.0..1.2f64) {
            let c = make_cutoff(d).unwrap();
            let d1 = c.d1(s);
            prop_assert!((-1.0..=0.0).contains(&d1));
            prop_assert!(c.d2(s) >= -1e-10);
            prop_assert!(c.value(s) >= 0.0);
            if s >= 1.0 - d / 2.0 { prop_assert_eq!(c.value(s), 0.0); }
            let ap = c.action_part(s);
            prop_assert!(ap >= 0.0 && ap <= 1.0 - d + 1e-12);
        }
    }
}
