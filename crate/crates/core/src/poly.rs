//! Real polynomials in `(x, y)`.

use alloc::vec::Vec;
#[allow(unused_imports)] // inherent float methods shadow it when std is linked
use num_traits::Float;

use crate::C;

/// Sum of monomials `c x^i y^j`.
#[derive(Clone, Debug, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Poly2 {
    pub terms: Vec<(u32, u32, f64)>,
}

fn ipow(x: f64, k: u32) -> f64 {
    x.powi(k as i32)
}

impl Poly2 {
    pub fn new(terms: Vec<(u32, u32, f64)>) -> Self {
        Self { terms }
    }

    pub fn zero() -> Self {
        Self::default()
    }

    pub fn is_zero(&self) -> bool {
        self.terms.iter().all(|t| t.2 == 0.0)
    }

    pub fn value(&self, z: C) -> f64 {
        self.terms.iter().map(|&(i, j, c)| c * ipow(z.re, i) * ipow(z.im, j)).sum()
    }

    /// Gradient packed as `u_x + i u_y`.
    pub fn gradient(&self, z: C) -> C {
        let mut g = C::new(0.0, 0.0);
        for &(i, j, c) in &self.terms {
            if i > 0 {
                g.re += c * i as f64 * ipow(z.re, i - 1) * ipow(z.im, j);
            }
            if j > 0 {
                g.im += c * j as f64 * ipow(z.re, i) * ipow(z.im, j - 1);
            }
        }
        g
    }

    pub fn scaled(&self, s: f64) -> Self {
        Self { terms: self.terms.iter().map(|&(i, j, c)| (i, j, s * c)).collect() }
    }

    pub fn degree(&self) -> u32 {
        self.terms.iter().map(|&(i, j, _)| i + j).max().unwrap_or(0)
    }
}
