//! Disk automorphisms `h(z) = (z + z0) / (conj(z0) z + 1)`, sending 0 to `z0`.

use crate::{Error, Result, C};

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Mobius {
    pub z0: C,
}

impl Mobius {
    pub fn new(z0: C) -> Result<Self> {
        if z0.norm() >= 1.0 || !z0.norm().is_finite() {
            return Err(Error::ParameterOutOfRange(alloc::format!(
                "Mobius center must lie in the open disk, |z0| = {}",
                z0.norm()
            )));
        }
        Ok(Self { z0 })
    }

    pub fn identity() -> Self {
        Self { z0: C::new(0.0, 0.0) }
    }

    pub fn apply(&self, z: C) -> C {
        (z + self.z0) / (self.z0.conj() * z + 1.0)
    }

    pub fn inverse(&self, w: C) -> C {
        (w - self.z0) / (1.0 - self.z0.conj() * w)
    }

    /// Complex derivative `h'(z)`.
    pub fn derivative(&self, z: C) -> C {
        let d = self.z0.conj() * z + 1.0;
        (1.0 - self.z0.norm_sqr()) / (d * d)
    }

    /// Real Jacobian determinant `|h'(z)|^2`.
    pub fn jacobian(&self, z: C) -> f64 {
        self.derivative(z).norm_sqr()
    }
}
