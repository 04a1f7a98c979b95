//! Area forms on the disk and on the strip `S = [0,1] x R`.
//!
//! A form is stored through its polar density `F(r, theta) = r f(r e^{i theta})`,
//! where `f dx^dy` is the planar form. The privileged primitives are
//! `A(r,t) = int_0^r F(s,t) ds`, `B(r,t) = int_0^t F(r,s) ds` and
//! `G(r,t) = int_0^r int_0^t F`.

use alloc::format;
use alloc::string::String;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)] // inherent float methods shadow it when std is linked
use num_traits::Float;

use crate::mobius::Mobius;
use crate::poly::Poly2;
use crate::quad::{Adaptive, TOL_QUAD};
use crate::{Error, Result, C, TAU};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "kebab-case"))]
pub enum Mode {
    Analytic,
    SampledGrid,
}

/// The registered family of densities.
#[derive(Clone, Debug)]
pub enum FormKind {
    /// `f = 1`.
    Standard,
    /// `f = 1 + a x`, `|a| < 1`.
    Tilted { a: f64 },
    /// `f = 1 + a |z|^2`, `a > -1`.
    RadialBump { a: f64 },
    /// `f = 1 - |z|^2`, vanishing on the boundary.
    Vanishing,
    /// `F = r (1 + cos(theta) / 2)`.
    CosModulated,
    Grid(Arc<GridDensity>),
    /// `h^* omega` with density `|h'|^2 f o h`.
    Pullback { base: Arc<DensityForm>, mobius: Mobius },
}

#[derive(Clone, Debug)]
pub struct DensityForm {
    kind: FormKind,
}

/// Reduces an unwrapped angle to `theta0 + 2 pi k` with `theta0` in `[0, 2 pi)`.
pub fn split_angle(theta: f64) -> (f64, f64) {
    let k = (theta / TAU).floor();
    let mut t0 = theta - k * TAU;
    let mut k = k;
    if t0 >= TAU {
        t0 -= TAU;
        k += 1.0;
    }
    if t0 < 0.0 {
        t0 = 0.0;
    }
    (t0, k)
}

/// The standard area form `dx^dy`, i.e. `F(r, theta) = r`.
pub fn make_standard_form() -> DensityForm {
    DensityForm::standard()
}

impl DensityForm {
    pub fn standard() -> Self {
        Self { kind: FormKind::Standard }
    }

    pub fn tilted(a: f64) -> Result<Self> {
        if a.abs() >= 1.0 {
            return Err(Error::InvalidForm(format!("tilted form needs |a| < 1, got {a}")));
        }
        Ok(Self { kind: FormKind::Tilted { a } })
    }

    pub fn radial_bump(a: f64) -> Result<Self> {
        if a <= -1.0 {
            return Err(Error::InvalidForm(format!("radial bump needs a > -1, got {a}")));
        }
        Ok(Self { kind: FormKind::RadialBump { a } })
    }

    pub fn vanishing() -> Self {
        Self { kind: FormKind::Vanishing }
    }

    pub fn cos_modulated() -> Self {
        Self { kind: FormKind::CosModulated }
    }

    pub fn from_grid(grid: GridDensity) -> Result<Self> {
        let form = Self { kind: FormKind::Grid(Arc::new(grid)) };
        form.validate()?;
        Ok(form)
    }

    /// Samples the planar density `f` on an `nr x ntheta` polar grid.
    pub fn sampled(f: impl Fn(C) -> f64, nr: usize, ntheta: usize) -> Result<Self> {
        Self::from_grid(GridDensity::from_planar(f, nr, ntheta)?)
    }

    pub fn pullback(base: &DensityForm, mobius: Mobius) -> Self {
        Self { kind: FormKind::Pullback { base: Arc::new(base.clone()), mobius } }
    }

    pub fn kind(&self) -> &FormKind {
        &self.kind
    }

    pub fn mode(&self) -> Mode {
        match self.kind {
            FormKind::Grid(_) => Mode::SampledGrid,
            _ => Mode::Analytic,
        }
    }

    /// Whether `A`, `B`, `G` are available in closed form (or exactly for the
    /// grid interpolant).
    pub fn has_closed_primitives(&self) -> bool {
        !matches!(self.kind, FormKind::Pullback { .. })
    }

    /// `A(r, theta) = int_0^r F(x, theta) dx` where a closed form exists.
    pub fn closed_radial_primitive(&self, r: f64, theta: f64) -> Option<f64> {
        let c = theta.cos();
        let (r2, r3) = (r * r, r * r * r);
        Some(match &self.kind {
            FormKind::Standard => 0.5 * r2,
            FormKind::Tilted { a } => 0.5 * r2 + a * r3 * c / 3.0,
            FormKind::RadialBump { a } => 0.5 * r2 + 0.25 * a * r2 * r2,
            FormKind::Vanishing => 0.5 * r2 - 0.25 * r2 * r2,
            FormKind::CosModulated => 0.5 * r2 * (1.0 + 0.5 * c),
            FormKind::Grid(g) => g.prim_a(r, theta),
            FormKind::Pullback { .. } => return None,
        })
    }

    pub fn is_standard(&self) -> bool {
        matches!(self.kind, FormKind::Standard)
    }

    pub fn name(&self) -> String {
        match &self.kind {
            FormKind::Standard => "standard".into(),
            FormKind::Tilted { a } => format!("analytic:tilted({a})"),
            FormKind::RadialBump { a } => format!("analytic:radial-bump({a})"),
            FormKind::Vanishing => "analytic:vanishing".into(),
            FormKind::CosModulated => "analytic:cos-modulated".into(),
            FormKind::Grid(g) => format!("grid({}x{})", g.nr, g.ntheta),
            FormKind::Pullback { base, mobius } => {
                format!("pullback({}, z0 = {}{:+}i)", base.name(), mobius.z0.re, mobius.z0.im)
            }
        }
    }

    /// Polar density `F(r, theta)`.
    pub fn density(&self, r: f64, theta: f64) -> f64 {
        match &self.kind {
            FormKind::Standard => r,
            FormKind::Tilted { a } => r + a * r * r * theta.cos(),
            FormKind::RadialBump { a } => r + a * r * r * r,
            FormKind::Vanishing => r - r * r * r,
            FormKind::CosModulated => r * (1.0 + 0.5 * theta.cos()),
            FormKind::Grid(g) => g.value(r, theta),
            FormKind::Pullback { .. } => r * self.planar(C::from_polar(r, theta)),
        }
    }

    /// Planar density `f(x, y)`.
    pub fn planar(&self, z: C) -> f64 {
        match &self.kind {
            FormKind::Standard => 1.0,
            FormKind::Tilted { a } => 1.0 + a * z.re,
            FormKind::RadialBump { a } => 1.0 + a * z.norm_sqr(),
            FormKind::Vanishing => 1.0 - z.norm_sqr(),
            FormKind::CosModulated => {
                let r = z.norm();
                if r == 0.0 {
                    1.0
                } else {
                    1.0 + 0.5 * z.re / r
                }
            }
            FormKind::Grid(g) => {
                let (r, t) = (z.norm(), z.im.atan2(z.re));
                if r < 1e-9 {
                    g.partials(0.0, t).0
                } else {
                    g.value(r, t) / r
                }
            }
            FormKind::Pullback { base, mobius } => mobius.jacobian(z) * base.planar(mobius.apply(z)),
        }
    }

    /// Analytic partial derivatives `(dF/dr, dF/dtheta)` when available.
    pub fn partials(&self, r: f64, theta: f64) -> Option<(f64, f64)> {
        let (c, s) = (theta.cos(), theta.sin());
        match &self.kind {
            FormKind::Standard => Some((1.0, 0.0)),
            FormKind::Tilted { a } => Some((1.0 + 2.0 * a * r * c, -a * r * r * s)),
            FormKind::RadialBump { a } => Some((1.0 + 3.0 * a * r * r, 0.0)),
            FormKind::Vanishing => Some((1.0 - 3.0 * r * r, 0.0)),
            FormKind::CosModulated => Some((1.0 + 0.5 * c, -0.5 * r * s)),
            FormKind::Grid(g) => Some(g.partials(r, theta)),
            FormKind::Pullback { .. } => None,
        }
    }

    /// Checks positivity on the open disk and periodicity on a sample grid.
    pub fn validate(&self) -> Result<()> {
        for i in 1..32 {
            let r = i as f64 / 32.0;
            for j in 0..64 {
                let t = TAU * j as f64 / 64.0 + 0.013;
                let v = self.density(r, t);
                if !(v > 0.0) || !v.is_finite() {
                    return Err(Error::DegenerateForm { x: r * t.cos(), y: r * t.sin(), value: v });
                }
                let w = self.density(r, t + TAU);
                if (w - v).abs() > 1e-12 * v.abs().max(1.0) {
                    return Err(Error::InvalidForm(format!(
                        "density is not 2pi-periodic at r = {r}, theta = {t}"
                    )));
                }
            }
        }
        Ok(())
    }

    pub fn descriptor(&self) -> FormDescriptor {
        let mut d = FormDescriptor { kind: String::new(), params: Vec::new(), grid: None, center: None, base: None };
        match &self.kind {
            FormKind::Standard => d.kind = "standard".into(),
            FormKind::Tilted { a } => {
                d.kind = "analytic:tilted".into();
                d.params.push(*a);
            }
            FormKind::RadialBump { a } => {
                d.kind = "analytic:radial-bump".into();
                d.params.push(*a);
            }
            FormKind::Vanishing => d.kind = "analytic:vanishing".into(),
            FormKind::CosModulated => d.kind = "analytic:cos-modulated".into(),
            FormKind::Grid(g) => {
                d.kind = "grid".into();
                d.grid = Some(GridSpec { nr: g.nr, ntheta: g.ntheta, values: g.values.clone() });
            }
            FormKind::Pullback { base, mobius } => {
                d.kind = "analytic:pullback".into();
                d.center = Some([mobius.z0.re, mobius.z0.im]);
                d.base = Some(alloc::boxed::Box::new(base.descriptor()));
            }
        }
        d
    }

    pub fn from_descriptor(d: &FormDescriptor) -> Result<Self> {
        let param = |i: usize| {
            d.params
                .get(i)
                .copied()
                .ok_or_else(|| Error::InvalidForm(format!("form `{}` is missing parameter {i}", d.kind)))
        };
        match d.kind.as_str() {
            "standard" => Ok(Self::standard()),
            "analytic:tilted" => Self::tilted(param(0)?),
            "analytic:radial-bump" => Self::radial_bump(param(0)?),
            "analytic:vanishing" => Ok(Self::vanishing()),
            "analytic:cos-modulated" => Ok(Self::cos_modulated()),
            "grid" => {
                let g = d.grid.as_ref().ok_or_else(|| Error::InvalidForm("grid form without grid".into()))?;
                Self::from_grid(GridDensity::from_values(g.nr, g.ntheta, g.values.clone())?)
            }
            "analytic:pullback" => {
                let c = d.center.ok_or_else(|| Error::InvalidForm("pullback without center".into()))?;
                let base = d.base.as_ref().ok_or_else(|| Error::InvalidForm("pullback without base".into()))?;
                Ok(Self::pullback(&Self::from_descriptor(base)?, Mobius::new(C::new(c[0], c[1]))?))
            }
            other => Err(Error::InvalidForm(format!("unknown form kind `{other}`"))),
        }
    }
}

/// JSON-facing description of a form.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FormDescriptor {
    pub kind: String,
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Vec::is_empty"))]
    pub params: Vec<f64>,
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub grid: Option<GridSpec>,
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub center: Option<[f64; 2]>,
    #[cfg_attr(feature = "serde", serde(default, skip_serializing_if = "Option::is_none"))]
    pub base: Option<alloc::boxed::Box<FormDescriptor>>,
}

/// Raw samples of `F` at `r_i = i / (nr - 1)`, `theta_j = 2 pi j / ntheta`,
/// stored row-major in `i`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GridSpec {
    pub nr: usize,
    pub ntheta: usize,
    pub values: Vec<f64>,
}

type Cell = [f64; 16];

/// Bicubic (Catmull-Rom) interpolant of sampled `F`, with primitives obtained
/// by integrating the interpolant exactly.
#[derive(Clone, Debug)]
pub struct GridDensity {
    nr: usize,
    ntheta: usize,
    values: Vec<f64>,
    cells: Vec<Cell>,
    /// `col_a[i][j][b]`: sum over cells `i' < i` of `c_ab / (a+1)`.
    col_a: Vec<[f64; 4]>,
    /// `row_b[i][j][a]`: sum over cells `j' < j` of `c_ab / (b+1)`.
    row_b: Vec<[f64; 4]>,
    /// `sum_g[i][j]`: full-cell double integrals for `i' < i`, `j' < j`.
    sum_g: Vec<f64>,
}

const HERMITE: [[f64; 4]; 4] = [
    [1.0, 0.0, 0.0, 0.0],
    [0.0, 0.0, 1.0, 0.0],
    [-3.0, 3.0, -2.0, -1.0],
    [2.0, -2.0, 1.0, 1.0],
];

impl GridDensity {
    pub fn from_planar(f: impl Fn(C) -> f64, nr: usize, ntheta: usize) -> Result<Self> {
        let mut values = Vec::with_capacity(nr * ntheta);
        for i in 0..nr {
            let r = i as f64 / (nr.max(2) - 1) as f64;
            for j in 0..ntheta {
                let t = TAU * j as f64 / ntheta as f64;
                values.push(r * f(C::from_polar(r, t)));
            }
        }
        Self::from_values(nr, ntheta, values)
    }

    pub fn from_values(nr: usize, ntheta: usize, values: Vec<f64>) -> Result<Self> {
        if nr < 4 || ntheta < 4 || values.len() != nr * ntheta {
            return Err(Error::InvalidForm(format!(
                "grid needs nr, ntheta >= 4 and nr*ntheta values (got {nr} x {ntheta}, {} values)",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidForm("grid contains non-finite samples".into()));
        }
        let (ncr, nct) = (nr - 1, ntheta);
        let at = |i: usize, j: usize| values[i * ntheta + (j % ntheta)];
        let dt = |i: usize, j: usize| -> f64 {
            if i == 0 {
                0.5 * (-3.0 * at(0, j) + 4.0 * at(1, j) - at(2, j))
            } else if i == nr - 1 {
                0.5 * (3.0 * at(i, j) - 4.0 * at(i - 1, j) + at(i - 2, j))
            } else {
                0.5 * (at(i + 1, j) - at(i - 1, j))
            }
        };
        let du = |i: usize, j: usize| 0.5 * (at(i, j + 1) - at(i, j + ntheta - 1));
        let dtu = |i: usize, j: usize| 0.5 * (dt(i, j + 1) - dt(i, j + ntheta - 1));

        let mut cells = Vec::with_capacity(ncr * nct);
        for i in 0..ncr {
            for j in 0..nct {
                let v = [
                    [at(i, j), at(i, j + 1), du(i, j), du(i, j + 1)],
                    [at(i + 1, j), at(i + 1, j + 1), du(i + 1, j), du(i + 1, j + 1)],
                    [dt(i, j), dt(i, j + 1), dtu(i, j), dtu(i, j + 1)],
                    [dt(i + 1, j), dt(i + 1, j + 1), dtu(i + 1, j), dtu(i + 1, j + 1)],
                ];
                let mut c = [0.0; 16];
                for a in 0..4 {
                    for b in 0..4 {
                        let mut s = 0.0;
                        for p in 0..4 {
                            for q in 0..4 {
                                s += HERMITE[a][p] * v[p][q] * HERMITE[b][q];
                            }
                        }
                        c[a * 4 + b] = s;
                    }
                }
                cells.push(c);
            }
        }

        let mut col_a = vec![[0.0; 4]; (ncr + 1) * nct];
        for j in 0..nct {
            for i in 0..ncr {
                let c = &cells[i * nct + j];
                let mut next = col_a[i * nct + j];
                for (b, nb) in next.iter_mut().enumerate() {
                    *nb += (0..4).map(|a| c[a * 4 + b] / (a + 1) as f64).sum::<f64>();
                }
                col_a[(i + 1) * nct + j] = next;
            }
        }
        let mut row_b = vec![[0.0; 4]; ncr * (nct + 1)];
        for i in 0..ncr {
            for j in 0..nct {
                let c = &cells[i * nct + j];
                let mut next = row_b[i * (nct + 1) + j];
                for (a, na) in next.iter_mut().enumerate() {
                    *na += (0..4).map(|b| c[a * 4 + b] / (b + 1) as f64).sum::<f64>();
                }
                row_b[i * (nct + 1) + j + 1] = next;
            }
        }
        let mut sum_g = vec![0.0; (ncr + 1) * (nct + 1)];
        for i in 0..ncr {
            for j in 0..nct {
                let c = &cells[i * nct + j];
                let mut full = 0.0;
                for a in 0..4 {
                    for b in 0..4 {
                        full += c[a * 4 + b] / ((a + 1) * (b + 1)) as f64;
                    }
                }
                let w = nct + 1;
                sum_g[(i + 1) * w + j + 1] = full + sum_g[i * w + j + 1] + sum_g[(i + 1) * w + j] - sum_g[i * w + j];
            }
        }
        Ok(Self { nr, ntheta, values, cells, col_a, row_b, sum_g })
    }

    pub fn nr(&self) -> usize {
        self.nr
    }

    pub fn ntheta(&self) -> usize {
        self.ntheta
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    fn hr(&self) -> f64 {
        1.0 / (self.nr - 1) as f64
    }

    fn ht(&self) -> f64 {
        TAU / self.ntheta as f64
    }

    /// Cell indices and local coordinates for `r` in `[0,1]`, `theta0` in `[0, 2pi)`.
    fn locate(&self, r: f64, theta0: f64) -> (usize, usize, f64, f64) {
        let ncr = self.nr - 1;
        let x = r.clamp(0.0, 1.0) / self.hr();
        let i = (x.floor() as usize).min(ncr - 1);
        let y = theta0 / self.ht();
        let j = (y.floor() as usize).min(self.ntheta - 1);
        (i, j, x - i as f64, y - j as f64)
    }

    fn powers(x: f64) -> [f64; 5] {
        [1.0, x, x * x, x * x * x, x * x * x * x]
    }

    pub fn value(&self, r: f64, theta: f64) -> f64 {
        let (t0, _) = split_angle(theta);
        let (i, j, t, u) = self.locate(r, t0);
        let c = &self.cells[i * self.ntheta + j];
        let (pt, pu) = (Self::powers(t), Self::powers(u));
        let mut s = 0.0;
        for a in 0..4 {
            for b in 0..4 {
                s += c[a * 4 + b] * pt[a] * pu[b];
            }
        }
        s
    }

    pub fn partials(&self, r: f64, theta: f64) -> (f64, f64) {
        let (t0, _) = split_angle(theta);
        let (i, j, t, u) = self.locate(r, t0);
        let c = &self.cells[i * self.ntheta + j];
        let (pt, pu) = (Self::powers(t), Self::powers(u));
        let (mut fr, mut ft) = (0.0, 0.0);
        for a in 0..4 {
            for b in 0..4 {
                if a > 0 {
                    fr += a as f64 * c[a * 4 + b] * pt[a - 1] * pu[b];
                }
                if b > 0 {
                    ft += b as f64 * c[a * 4 + b] * pt[a] * pu[b - 1];
                }
            }
        }
        (fr / self.hr(), ft / self.ht())
    }

    fn prim_a(&self, r: f64, theta: f64) -> f64 {
        let (t0, _) = split_angle(theta);
        let (i, j, t, u) = self.locate(r, t0);
        let nct = self.ntheta;
        let c = &self.cells[i * nct + j];
        let col = &self.col_a[i * nct + j];
        let (pt, pu) = (Self::powers(t), Self::powers(u));
        let mut s = 0.0;
        for b in 0..4 {
            let mut coef = col[b];
            for a in 0..4 {
                coef += c[a * 4 + b] * pt[a + 1] / (a + 1) as f64;
            }
            s += coef * pu[b];
        }
        self.hr() * s
    }

    fn prim_b0(&self, i: usize, j: usize, t: f64, u: f64) -> f64 {
        let nct = self.ntheta;
        let row = &self.row_b[i * (nct + 1) + j];
        let (pt, pu) = (Self::powers(t), Self::powers(u));
        let mut s = 0.0;
        for a in 0..4 {
            let mut coef = row[a];
            if j < nct {
                let c = &self.cells[i * nct + j];
                for b in 0..4 {
                    coef += c[a * 4 + b] * pu[b + 1] / (b + 1) as f64;
                }
            }
            s += coef * pt[a];
        }
        self.ht() * s
    }

    fn prim_b(&self, r: f64, theta: f64) -> f64 {
        let (t0, k) = split_angle(theta);
        let (i, j, t, u) = self.locate(r, t0);
        let full = self.prim_b0(i, self.ntheta, t, 0.0);
        self.prim_b0(i, j, t, u) + k * full
    }

    fn prim_g0(&self, i: usize, j: usize, t: f64, u: f64) -> f64 {
        let nct = self.ntheta;
        let (pt, pu) = (Self::powers(t), Self::powers(u));
        let mut s = self.sum_g[i * (nct + 1) + j];
        let row = &self.row_b[i * (nct + 1) + j];
        for a in 0..4 {
            s += row[a] * pt[a + 1] / (a + 1) as f64;
        }
        if j < nct {
            let col = &self.col_a[i * nct + j];
            let c = &self.cells[i * nct + j];
            for b in 0..4 {
                s += col[b] * pu[b + 1] / (b + 1) as f64;
            }
            for a in 0..4 {
                for b in 0..4 {
                    s += c[a * 4 + b] * pt[a + 1] * pu[b + 1] / ((a + 1) * (b + 1)) as f64;
                }
            }
        }
        self.hr() * self.ht() * s
    }

    fn prim_g(&self, r: f64, theta: f64) -> f64 {
        let (t0, k) = split_angle(theta);
        let (i, j, t, u) = self.locate(r, t0);
        self.prim_g0(i, j, t, u) + k * self.prim_g0(i, self.ntheta, t, 0.0)
    }
}

/// Evaluators for `A`, `B`, `G` of a form: closed forms where available,
/// adaptive quadrature otherwise.
#[derive(Clone, Debug)]
pub struct PrimitivePack {
    form: DensityForm,
    quad: Adaptive,
}

/// Builds the primitive pack of a validated form.
pub fn primitives(form: &DensityForm) -> Result<PrimitivePack> {
    form.validate()?;
    Ok(PrimitivePack { form: form.clone(), quad: Adaptive::default() })
}

impl PrimitivePack {
    pub fn with_quadrature(mut self, quad: Adaptive) -> Self {
        self.quad = quad;
        self
    }

    pub fn form(&self) -> &DensityForm {
        &self.form
    }

    pub fn a(&self, r: f64, theta: f64) -> Result<f64> {
        match self.form.closed_radial_primitive(r, theta) {
            Some(v) => Ok(v),
            None => self.quad.integrate(0.0, r, |x| self.form.density(x, theta)),
        }
    }

    pub fn b(&self, r: f64, theta: f64) -> Result<f64> {
        let s = theta.sin();
        Ok(match &self.form.kind {
            FormKind::Standard => r * theta,
            FormKind::Tilted { a } => r * theta + a * r * r * s,
            FormKind::RadialBump { a } => (r + a * r * r * r) * theta,
            FormKind::Vanishing => (r - r * r * r) * theta,
            FormKind::CosModulated => r * (theta + 0.5 * s),
            FormKind::Grid(g) => g.prim_b(r, theta),
            FormKind::Pullback { .. } => {
                let (t0, k) = split_angle(theta);
                let part = self.quad.integrate(0.0, t0, |t| self.form.density(r, t))?;
                if k != 0.0 {
                    part + k * self.quad.integrate(0.0, TAU, |t| self.form.density(r, t))?
                } else {
                    part
                }
            }
        })
    }

    pub fn g(&self, r: f64, theta: f64) -> Result<f64> {
        let s = theta.sin();
        let (r2, r3) = (r * r, r * r * r);
        Ok(match &self.form.kind {
            FormKind::Standard => 0.5 * r2 * theta,
            FormKind::Tilted { a } => 0.5 * r2 * theta + a * r3 * s / 3.0,
            FormKind::RadialBump { a } => (0.5 * r2 + 0.25 * a * r2 * r2) * theta,
            FormKind::Vanishing => (0.5 * r2 - 0.25 * r2 * r2) * theta,
            FormKind::CosModulated => 0.5 * r2 * (theta + 0.5 * s),
            FormKind::Grid(g) => g.prim_g(r, theta),
            FormKind::Pullback { .. } => {
                let inner = Adaptive::new(self.quad.tol * 0.1, self.quad.budget);
                let mut err = None;
                let v = self.quad.integrate(0.0, r, |x| {
                    let (t0, k) = split_angle(theta);
                    let part = inner.integrate(0.0, t0, |t| self.form.density(x, t));
                    let full = if k != 0.0 { inner.integrate(0.0, TAU, |t| self.form.density(x, t)) } else { Ok(0.0) };
                    match (part, full) {
                        (Ok(p), Ok(f)) => p + k * f,
                        (Err(e), _) | (_, Err(e)) => {
                            err.get_or_insert(e);
                            0.0
                        }
                    }
                })?;
                if let Some(e) = err {
                    return Err(e);
                }
                v
            }
        })
    }

    /// `int_Q F` over the fundamental domain, i.e. the total area.
    pub fn total_mass(&self) -> Result<f64> {
        self.g(1.0, TAU)
    }
}

/// Coefficient `a(x, y) = int_0^1 t f(tx, ty) dt` of the primitive
/// `lambda_a = a (x dy - y dx)` of `f dx^dy`.
#[derive(Clone, Debug)]
pub struct LambdaA {
    form: DensityForm,
    quad: Adaptive,
}

impl LambdaA {
    pub fn coefficient(&self, z: C) -> f64 {
        if self.form.is_standard() {
            return 0.5;
        }
        // `int_0^1 t f(tz) dt = A(|z|, arg z) / |z|^2`.
        let r = z.norm();
        if r > 1e-6 {
            if let Some(a) = self.form.closed_radial_primitive(r, z.im.atan2(z.re)) {
                return a / (r * r);
            }
        }
        self.quad
            .integrate(0.0, 1.0, |t| t * self.form.planar(z * t))
            .unwrap_or_else(|_| crate::quad::GaussLegendre::new(24).integrate(0.0, 1.0, |t| t * self.form.planar(z * t)))
    }
}

/// Builds `lambda_a` for the planar density of `form`.
pub fn primitive_lambda_a(form: &DensityForm) -> LambdaA {
    LambdaA { form: form.clone(), quad: Adaptive::new(1e-13, 100_000) }
}

/// Same, for an arbitrary planar function `f`.
pub fn lambda_a_coefficient(f: impl Fn(C) -> f64, z: C) -> f64 {
    Adaptive::new(1e-13, 100_000)
        .integrate(0.0, 1.0, |t| t * f(z * t))
        .unwrap_or(f64::NAN)
}

/// A primitive 1-form of some area form on the disk.
#[derive(Clone, Debug)]
pub enum Primitive {
    /// `(x dy - y dx) / 2`.
    Lambda0,
    LambdaA(LambdaA),
    /// `lambda + du`.
    PlusExact(Arc<Primitive>, Poly2),
    /// `h^* lambda`.
    Pullback(Arc<Primitive>, Mobius),
}

impl Primitive {
    /// Canonical primitive of `form`: `lambda_0` for the standard form,
    /// `lambda_a` otherwise.
    pub fn for_form(form: &DensityForm) -> Self {
        if form.is_standard() {
            Primitive::Lambda0
        } else {
            Primitive::LambdaA(primitive_lambda_a(form))
        }
    }

    pub fn plus_exact(&self, u: Poly2) -> Self {
        Primitive::PlusExact(Arc::new(self.clone()), u)
    }

    pub fn pulled_back(&self, h: Mobius) -> Self {
        Primitive::Pullback(Arc::new(self.clone()), h)
    }

    /// Covector at `z`, packed as `lambda_x + i lambda_y`.
    pub fn covector(&self, z: C) -> C {
        match self {
            Primitive::Lambda0 => C::new(-0.5 * z.im, 0.5 * z.re),
            Primitive::LambdaA(l) => C::new(-z.im, z.re) * l.coefficient(z),
            Primitive::PlusExact(base, u) => base.covector(z) + u.gradient(z),
            Primitive::Pullback(base, h) => h.derivative(z).conj() * base.covector(h.apply(z)),
        }
    }

    /// `lambda_z(v)`.
    pub fn pair(&self, z: C, v: C) -> f64 {
        let c = self.covector(z);
        c.re * v.re + c.im * v.im
    }
}

/// The registered forms exercised by the invariant suites.
pub fn registered_forms() -> Vec<DensityForm> {
    let mut v = vec![
        DensityForm::standard(),
        DensityForm::tilted(0.4).expect("valid"),
        DensityForm::radial_bump(0.5).expect("valid"),
        DensityForm::vanishing(),
        DensityForm::cos_modulated(),
    ];
    v.push(
        DensityForm::sampled(|z| 1.0 + 0.3 * z.re * z.im + 0.2 * z.re, 65, 128).expect("positive samples"),
    );
    v.push(DensityForm::pullback(&DensityForm::standard(), Mobius { z0: C::new(0.3, -0.2) }));
    v
}

/// Default tolerance shared by sampled-form checks.
pub const TOL_FORM: f64 = TOL_QUAD;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::PI;
    use approx::assert_relative_eq;
    use proptest::prelude::*;

    #[test]
    fn standard_form_examples() {
        let p = primitives(&make_standard_form()).unwrap();
        assert_relative_eq!(p.a(1.0, 0.7).unwrap(), 0.5);
        assert_relative_eq!(p.total_mass().unwrap(), PI, epsilon = 1e-15);
        assert_relative_eq!(p.b(0.5, PI).unwrap(), PI / 2.0);
        assert_relative_eq!(p.g(1.0, TAU).unwrap(), PI, epsilon = 1e-15);
    }

    #[test]
    fn cos_modulated_a_matches_symbolic_and_quadrature() {
        let form = DensityForm::cos_modulated();
        let p = primitives(&form).unwrap();
        let q = Adaptive::new(1e-13, 100_000);
        for &(r, t) in &[(0.3, 0.2), (0.9, 2.5), (1.0, -1.0), (0.55, 7.0)] {
            let sym = 0.5 * r * r * (1.0 + 0.5 * f64::cos(t));
            assert_relative_eq!(p.a(r, t).unwrap(), sym, epsilon = 1e-15);
            let num = q.integrate(0.0, r, |x| form.density(x, t)).unwrap();
            assert!((num - sym).abs() < 1e-12);
        }
    }

    #[test]
    fn lambda_a_examples() {
        assert_eq!(primitive_lambda_a(&DensityForm::standard()).coefficient(C::new(0.3, 0.4)), 0.5);
        for &(x, y) in &[(0.2, 0.1), (-0.7, 0.3), (0.5, -0.5)] {
            let a = lambda_a_coefficient(|z| z.re, C::new(x, y));
            assert!((a - x / 3.0).abs() < 1e-13);
            // Cross-check with a fixed Gauss rule.
            let g = crate::quad::GaussLegendre::new(5).integrate(0.0, 1.0, |t| t * t * x);
            assert!((a - g).abs() < 1e-14);
        }
        // Pullback by polar coordinates: the dtheta coefficient r^2 a is A.
        for form in registered_forms() {
            let la = primitive_lambda_a(&form);
            let p = primitives(&form).unwrap();
            for &(r, t) in &[(0.25, 0.4), (0.8, 3.9), (0.97, 5.5)] {
                let lhs = r * r * la.coefficient(C::from_polar(r, t));
                assert!((lhs - p.a(r, t).unwrap()).abs() < 1e-8, "{}", form.name());
            }
        }
    }

    #[test]
    fn primitive_covectors_are_primitives() {
        // d(lambda) = f dx^dy, checked by circulation around small squares.
        let h = Mobius::new(C::new(-0.2, 0.35)).unwrap();
        let cases: Vec<(Primitive, DensityForm)> = vec![
            (Primitive::Lambda0, DensityForm::standard()),
            (Primitive::for_form(&DensityForm::tilted(0.3).unwrap()), DensityForm::tilted(0.3).unwrap()),
            (Primitive::Lambda0.plus_exact(Poly2::new(vec![(2, 1, 0.7)])), DensityForm::standard()),
            (Primitive::Lambda0.pulled_back(h), DensityForm::pullback(&DensityForm::standard(), h)),
        ];
        let g = crate::quad::GaussLegendre::new(8);
        for (lam, form) in cases {
            let z = C::new(0.21, -0.33);
            let e = 1e-3;
            let corners = [z, z + e, z + C::new(e, e), z + C::new(0.0, e), z];
            let mut circ = 0.0;
            for w in corners.windows(2) {
                let d = w[1] - w[0];
                circ += g.integrate(0.0, 1.0, |s| lam.pair(w[0] + d * s, d));
            }
            let flux = g.integrate(0.0, e, |x| g.integrate(0.0, e, |y| form.planar(z + C::new(x, y))));
            assert!((circ - flux).abs() < 1e-12, "circ {circ} flux {flux}");
        }
    }

    #[test]
    fn grid_interpolant_reproduces_samples_and_is_smooth_enough() {
        let f = |z: C| 1.0 + 0.3 * z.re * z.im + 0.2 * z.re;
        let form = DensityForm::sampled(f, 65, 128).unwrap();
        assert_eq!(form.mode(), Mode::SampledGrid);
        for i in 0..65 {
            let r = i as f64 / 64.0;
            let t = TAU * 17.0 / 128.0;
            assert!((form.density(r, t) - r * f(C::from_polar(r, t))).abs() < 1e-13);
        }
        let (r, t) = (0.437, 1.234);
        assert!((form.density(r, t) - r * f(C::from_polar(r, t))).abs() < 1e-6);
        assert!(DensityForm::sampled(|z| z.re, 9, 16).is_err());
    }

    fn fd_check(form: &DensityForm) {
        let p = primitives(form).unwrap();
        let h = 1e-5;
        for i in 1..64 {
            let r = i as f64 / 64.0 * 0.98 + 0.005;
            for j in 0..64 {
                let t = TAU * (j as f64 + 0.37) / 64.0;
                if !matches!(form.kind(), FormKind::Grid(_)) || j % 4 == 0 {
                    let f = form.density(r, t);
                    let da = (p.a(r + h, t).unwrap() - p.a(r - h, t).unwrap()) / (2.0 * h);
                    let db = (p.b(r, t + h).unwrap() - p.b(r, t - h).unwrap()) / (2.0 * h);
                    assert!((da - f).abs() <= 1e-6 * f.abs().max(1e-3), "{} dA at {r},{t}: {da} vs {f}", form.name());
                    assert!((db - f).abs() <= 1e-6 * f.abs().max(1e-3), "{} dB at {r},{t}", form.name());
                }
            }
        }
    }

    #[test]
    fn primitive_derivatives_match_density_on_64x64_grid() {
        for form in registered_forms() {
            if form.has_closed_primitives() {
                fd_check(&form);
            }
        }
    }

    #[test]
    fn pullback_primitives_on_coarse_grid() {
        let form = registered_forms().pop().unwrap();
        let p = primitives(&form).unwrap();
        let h = 1e-4;
        for &(r, t) in &[(0.3, 0.5), (0.7, 2.0), (0.95, 4.4)] {
            let f = form.density(r, t);
            let da = (p.a(r + h, t).unwrap() - p.a(r - h, t).unwrap()) / (2.0 * h);
            let db = (p.b(r, t + h).unwrap() - p.b(r, t - h).unwrap()) / (2.0 * h);
            let dg1 = (p.g(r + h, t).unwrap() - p.g(r - h, t).unwrap()) / (2.0 * h);
            assert!((da - f).abs() < 1e-6 && (db - f).abs() < 1e-6);
            assert!((dg1 - p.b(r, t).unwrap()).abs() < 1e-6);
        }
        // A Mobius pullback of dx^dy has total area pi.
        assert!((p.total_mass().unwrap() - PI).abs() < 1e-8);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]
        #[test]
        fn periodicity_and_g_derivatives(idx in 0usize..6, r in 0.01..0.99f64, t in -10.0..10.0f64) {
            let form = registered_forms().swap_remove(idx);
            let p = primitives(&form).unwrap();
            prop_assert!(p.a(0.0, t).unwrap().abs() < 1e-15);
            prop_assert!(p.b(r, 0.0).unwrap().abs() < 1e-15);
            prop_assert!(p.g(0.0, t).unwrap().abs() < 1e-15 && p.g(r, 0.0).unwrap().abs() < 1e-15);
            let tol = 1e-11;
            prop_assert!((p.a(r, t + TAU).unwrap() - p.a(r, t).unwrap()).abs() < tol);
            prop_assert!((p.b(r, t + TAU).unwrap() - p.b(r, t).unwrap() - p.b(r, TAU).unwrap()).abs() < 1e-10);
            prop_assert!((p.g(r, t + TAU).unwrap() - p.g(r, t).unwrap() - p.g(r, TAU).unwrap()).abs() < 1e-10);
            let h = 1e-5;
            let d1 = (p.g(r + h, t).unwrap() - p.g(r - h, t).unwrap()) / (2.0 * h);
            let d2 = (p.g(r, t + h).unwrap() - p.g(r, t - h).unwrap()) / (2.0 * h);
            prop_assert!((d1 - p.b(r, t).unwrap()).abs() < 1e-6 * (1.0 + t.abs()));
            prop_assert!((d2 - p.a(r, t).unwrap()).abs() < 1e-6);
        }
    }

    #[test]
    fn descriptors_round_trip() {
        for form in registered_forms() {
            let d = form.descriptor();
            let back = DensityForm::from_descriptor(&d).unwrap();
            assert_eq!(back.descriptor(), d);
            assert!((back.density(0.4, 1.0) - form.density(0.4, 1.0)).abs() < 1e-15);
        }
        assert!(DensityForm::from_descriptor(&FormDescriptor {
            kind: "analytic:nope".into(),
            params: vec![],
            grid: None,
            center: None,
            base: None
        })
        .is_err());
    }

    #[test]
    fn invalid_forms_are_rejected() {
        assert!(DensityForm::tilted(1.5).is_err());
        assert!(DensityForm::radial_bump(-2.0).is_err());
        assert!(matches!(
            DensityForm::sampled(|z| z.re - 0.5, 17, 16),
            Err(Error::DegenerateForm { .. })
        ));
    }
}
