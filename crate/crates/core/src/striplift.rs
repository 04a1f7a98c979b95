//! Strip lifts of disk maps fixing the origin, generalized generating
//! functions, and the negative-action fixed point search.
//!
//! The strip is `S = [0,1] x R` with covering `(r, theta) -> r e^{i theta}`.
//! A lift is `Phi = (R, Theta)`; angles are never reduced.

use alloc::string::ToString;
use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)] // inherent float methods shadow it when std is linked
use num_traits::Float;

use crate::diskforms::{primitives, split_angle, DensityForm, PrimitivePack};
use crate::hamflow::{Conjugated, DiskIsotopy, SharedIsotopy, TOL_GEOM};
use crate::mobius::Mobius;
use crate::quad::{CumulativeGauss, GaussLegendre};
use crate::{Error, Result, C, PI, TAU};

pub const TOL_MONO: f64 = 1e-6;
pub const TOL_FIX: f64 = 1e-9;
/// Closedness residual above which a map is rejected as not form-preserving.
pub const TOL_CLOSED: f64 = 1e-5;
/// Largest accepted angular jump between neighbouring grid nodes.
const MAX_JUMP: f64 = 0.9 * PI;

fn wrap(x: f64) -> f64 {
    x - TAU * (x / TAU).round()
}

fn nearest_branch(candidate: f64, reference: f64) -> f64 {
    candidate + TAU * ((reference - candidate) / TAU).round()
}

#[derive(Clone, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct LiftOptions {
    pub nr: usize,
    pub ntheta: usize,
    /// Time steps used to follow the boundary point `1` along the isotopy.
    pub boundary_steps: usize,
    pub tol_mono: f64,
    pub fd_step: f64,
}

impl Default for LiftOptions {
    fn default() -> Self {
        Self { nr: 256, ntheta: 512, boundary_steps: 64, tol_mono: TOL_MONO, fd_step: 1e-5 }
    }
}

impl LiftOptions {
    pub fn grid(nr: usize, ntheta: usize) -> Self {
        Self { nr, ntheta, ..Self::default() }
    }
}

/// The lift `Phi = (R, Theta)` of a disk map, determined by its isotopy.
#[derive(Clone)]
pub struct StripMap {
    iso: SharedIsotopy,
    nr: usize,
    ntheta: usize,
    /// `Theta - theta` on the grid, row-major in `r`.
    delta: Vec<f64>,
    d1r: Vec<f64>,
    fd_step: f64,
    pub min_d1r: f64,
    /// Grid node `(r, theta)` where `D1 R` is smallest.
    pub argmin_d1r: (f64, f64),
    pub monotone: bool,
    /// `max |phi(z) - z|` over the grid.
    pub max_displacement: f64,
}

impl core::fmt::Debug for StripMap {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.debug_struct("StripMap")
            .field("nr", &self.nr)
            .field("ntheta", &self.ntheta)
            .field("min_d1r", &self.min_d1r)
            .field("monotone", &self.monotone)
            .finish_non_exhaustive()
    }
}

fn image(iso: &SharedIsotopy, z: C) -> Result<C> {
    let w = iso.map(z);
    if !w.re.is_finite() || !w.im.is_finite() {
        return Err(Error::Escape { radius: f64::NAN });
    }
    Ok(w)
}

/// Lifts the time-one map of `iso` to the strip.
pub fn lift_map(iso: SharedIsotopy, opts: &LiftOptions) -> Result<StripMap> {
    if opts.nr < 2 || opts.ntheta < 3 {
        return Err(Error::ParameterOutOfRange("lift grid needs nr >= 2, ntheta >= 3".into()));
    }
    let origin = image(&iso, C::new(0.0, 0.0))?;
    if origin.norm() > TOL_GEOM {
        return Err(Error::NotFixingOrigin(origin.norm()));
    }
    let (nr, nt) = (opts.nr, opts.ntheta);
    let rs: Vec<f64> = (0..nr).map(|i| i as f64 / (nr - 1) as f64).collect();
    let ts: Vec<f64> = (0..nt).map(|j| TAU * j as f64 / nt as f64).collect();

    // Follow the boundary point 1 along the isotopy.
    let mut total = 0.0;
    let mut prev = C::new(1.0, 0.0);
    for k in 1..=opts.boundary_steps {
        let z = iso.at(k as f64 / opts.boundary_steps as f64, C::new(1.0, 0.0));
        if !z.re.is_finite() {
            return Err(Error::Escape { radius: f64::NAN });
        }
        let inc = wrap(z.arg() - prev.arg());
        if inc.abs() > MAX_JUMP {
            return Err(Error::UnwrapFailure { r: 1.0, theta: 0.0, step: inc });
        }
        total += inc;
        prev = z;
    }

    let mut delta = vec![0.0; nr * nt];
    let mut max_disp: f64 = 0.0;
    let idx = |i: usize, j: usize| i * nt + j;
    let top = nr - 1;
    delta[idx(top, 0)] = total;
    for j in 1..=nt {
        let th = if j == nt { TAU } else { ts[j] };
        let z = C::from_polar(1.0, th);
        let w = image(&iso, z)?;
        let d = nearest_branch(w.arg() - th, delta[idx(top, j - 1)]);
        if (d - delta[idx(top, j - 1)]).abs() > MAX_JUMP {
            return Err(Error::UnwrapFailure { r: 1.0, theta: th, step: d - delta[idx(top, j - 1)] });
        }
        if j == nt {
            if (d - delta[idx(top, 0)]).abs() > 1e-6 {
                return Err(Error::UnwrapFailure { r: 1.0, theta: TAU, step: d - delta[idx(top, 0)] });
            }
        } else {
            delta[idx(top, j)] = d;
            max_disp = max_disp.max((w - z).norm());
        }
    }
    let h0 = opts.fd_step.min(0.1 * rs[1]);
    for j in 0..nt {
        for i in (0..top).rev() {
            let reference = delta[idx(i + 1, j)];
            let (cand, disp) = if i == 0 {
                let z = C::from_polar(h0, ts[j]);
                (image(&iso, z)?.arg() - ts[j], 0.0)
            } else {
                let z = C::from_polar(rs[i], ts[j]);
                let w = image(&iso, z)?;
                (w.arg() - ts[j], (w - z).norm())
            };
            let d = nearest_branch(cand, reference);
            if (d - reference).abs() > MAX_JUMP {
                return Err(Error::UnwrapFailure { r: rs[i], theta: ts[j], step: d - reference });
            }
            delta[idx(i, j)] = d;
            max_disp = max_disp.max(disp);
        }
    }

    let mut strip = StripMap {
        iso,
        nr,
        ntheta: nt,
        delta,
        d1r: Vec::new(),
        fd_step: opts.fd_step,
        min_d1r: f64::INFINITY,
        argmin_d1r: (0.0, 0.0),
        monotone: false,
        max_displacement: max_disp,
    };
    let mut d1r = Vec::with_capacity(nr * nt);
    for &r in &rs {
        for &t in &ts {
            let v = strip.d1r(r, t);
            if v < strip.min_d1r || v.is_nan() {
                strip.min_d1r = v;
                strip.argmin_d1r = (r, t);
            }
            d1r.push(v);
        }
    }
    strip.d1r = d1r;
    strip.monotone = strip.min_d1r > opts.tol_mono;
    Ok(strip)
}

/// Whether the lift of `iso` has `D1 R > tol_mono` on the evaluation grid.
pub fn radially_monotone(iso: SharedIsotopy, opts: &LiftOptions) -> bool {
    lift_map(iso, opts).map(|s| s.monotone).unwrap_or(false)
}

impl StripMap {
    pub fn isotopy(&self) -> &SharedIsotopy {
        &self.iso
    }

    pub fn grid_shape(&self) -> (usize, usize) {
        (self.nr, self.ntheta)
    }

    /// Sampled `D1 R` at grid node `(i, j)`.
    pub fn d1r_node(&self, i: usize, j: usize) -> f64 {
        self.d1r[i * self.ntheta + j]
    }

    fn interp_delta(&self, r: f64, t0: f64) -> f64 {
        let x = r.clamp(0.0, 1.0) * (self.nr - 1) as f64;
        let i = (x.floor() as usize).min(self.nr - 2);
        let u = x - i as f64;
        let y = t0 / TAU * self.ntheta as f64;
        let j = (y.floor() as usize).min(self.ntheta - 1);
        let v = y - j as f64;
        let j1 = (j + 1) % self.ntheta;
        let at = |ii: usize, jj: usize| self.delta[ii * self.ntheta + jj];
        // Periodic in theta; continuity across the seam is by construction.
        (1.0 - u) * ((1.0 - v) * at(i, j) + v * at(i, j1)) + u * ((1.0 - v) * at(i + 1, j) + v * at(i + 1, j1))
    }

    pub fn big_r(&self, r: f64, theta: f64) -> f64 {
        if r <= 0.0 {
            return 0.0;
        }
        self.iso.map(C::from_polar(r.min(1.0), theta)).norm()
    }

    pub fn big_theta(&self, r: f64, theta: f64) -> f64 {
        let (t0, _) = split_angle(theta);
        let approx = self.interp_delta(r, t0);
        let probe = if r <= 0.0 { self.fd_step } else { r.min(1.0) };
        let cand = self.iso.map(C::from_polar(probe, t0)).arg() - t0;
        theta + nearest_branch(cand, approx)
    }

    /// `Phi(r, theta)`.
    pub fn eval(&self, r: f64, theta: f64) -> (f64, f64) {
        let (t0, _) = split_angle(theta);
        let approx = self.interp_delta(r, t0);
        if r <= 0.0 {
            return (0.0, self.big_theta(r, theta));
        }
        let w = self.iso.map(C::from_polar(r.min(1.0), t0));
        (w.norm(), theta + nearest_branch(w.arg() - t0, approx))
    }

    /// `D1 R` by second-order differences (Richardson at `r = 0`).
    pub fn d1r(&self, r: f64, theta: f64) -> f64 {
        let h = self.fd_step;
        let rr = |x: f64| self.big_r(x, theta);
        if r <= 0.0 {
            2.0 * rr(h) / h - rr(2.0 * h) / (2.0 * h)
        } else if r < h {
            (-3.0 * rr(r) + 4.0 * rr(r + h) - rr(r + 2.0 * h)) / (2.0 * h)
        } else if r > 1.0 - h {
            (3.0 * rr(r) - 4.0 * rr(r - h) + rr(r - 2.0 * h)) / (2.0 * h)
        } else {
            (rr(r + h) - rr(r - h)) / (2.0 * h)
        }
    }

    pub fn d2r(&self, r: f64, theta: f64) -> f64 {
        let h = self.fd_step;
        (self.big_r(r, theta + h) - self.big_r(r, theta - h)) / (2.0 * h)
    }

    /// The inverse `r(R, theta)` of the monotone map `r -> R(r, theta)`.
    pub fn inverse_radius(&self, big_r: f64, theta: f64) -> Result<f64> {
        if big_r <= 0.0 {
            return Ok(0.0);
        }
        if big_r >= 1.0 {
            return Ok(1.0);
        }
        let f = |r: f64| self.big_r(r, theta) - big_r;
        let (mut a, mut b) = (0.0, 1.0);
        let (mut fa, mut fb) = (-big_r, f(1.0));
        if fb < 0.0 {
            return Err(Error::NotMonotone { r: 1.0, theta, value: fb });
        }
        let mut side = 0i8;
        for _ in 0..200 {
            if b - a < 1e-13 {
                break;
            }
            // Illinois-modified regula falsi, falling back to bisection.
            let mut x = (a * fb - b * fa) / (fb - fa);
            if !(x > a && x < b) {
                x = 0.5 * (a + b);
            }
            let fx = f(x);
            if fx == 0.0 {
                return Ok(x);
            }
            if fx < 0.0 {
                a = x;
                fa = fx;
                if side == -1 {
                    fb *= 0.5;
                }
                side = -1;
            } else {
                b = x;
                fb = fx;
                if side == 1 {
                    fa *= 0.5;
                }
                side = 1;
            }
            if fx.abs() < 1e-15 {
                return Ok(x);
            }
        }
        Ok(0.5 * (a + b))
    }

    /// `max |Phi(r, theta + 2pi) - Phi(r, theta) - (0, 2pi)|` over sample points.
    pub fn equivariance_residual(&self, samples: usize) -> f64 {
        let mut worst: f64 = 0.0;
        for k in 0..samples {
            let r = (k as f64 + 0.5) / samples as f64;
            let t = 0.37 + 5.1 * k as f64 / samples as f64;
            let (a, b) = self.eval(r, t);
            let (c, d) = self.eval(r, t + TAU);
            worst = worst.max((c - a).abs()).max((d - b - TAU).abs());
        }
        worst
    }
}

/// Conjugation of a disk isotopy by a Mobius map sending 0 to `z0`.
#[derive(Clone)]
pub struct Conjugation {
    pub isotopy: SharedIsotopy,
    pub form: DensityForm,
    pub mobius: Mobius,
}

/// `h^-1 o phi o h` with `h(0) = z0`, together with `h^* omega`.
pub fn mobius_conjugate(iso: SharedIsotopy, form: &DensityForm, z0: C, tol_fix: f64) -> Result<Conjugation> {
    let gap = (iso.map(z0) - z0).norm();
    if !(gap <= tol_fix) {
        return Err(Error::FixedPointMismatch(gap));
    }
    if z0 == C::new(0.0, 0.0) {
        return Ok(Conjugation { isotopy: iso, form: form.clone(), mobius: Mobius::identity() });
    }
    let mobius = Mobius::new(z0)?;
    let conj: SharedIsotopy = Arc::new(Conjugated { inner: iso, mobius });
    Ok(Conjugation { isotopy: conj, form: DensityForm::pullback(form, mobius), mobius })
}

#[derive(Clone, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct GenFunOptions {
    /// Rays (uniform in theta over one period).
    pub ntheta: usize,
    /// Gauss panels along each ray.
    pub panels: usize,
    pub order: usize,
    /// Cells per side of the closedness certificate.
    pub closedness_cells: usize,
}

impl Default for GenFunOptions {
    fn default() -> Self {
        Self { ntheta: 128, panels: 8, order: 8, closedness_cells: 64 }
    }
}

/// Closedness diagnostics of `Xi`.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Closedness {
    /// `max |circulation / cell area|` over the certificate grid.
    pub max_curl: f64,
    /// `max` gap between ray and broken-path integration of `Xi`.
    pub path_gap: f64,
}

/// The generating function `W(R, theta)` of a monotone lift, normalized by
/// `W(1, theta) = 0`.
#[derive(Clone, Debug)]
pub struct GeneratingFunction {
    strip: StripMap,
    prims: PrimitivePack,
    opts: GenFunOptions,
    thetas: Vec<f64>,
    nodes: Vec<f64>,
    weights: Vec<f64>,
    ray_r: Vec<f64>,
    ray_theta: Vec<f64>,
    ray_d1r: Vec<f64>,
    ray_w: Vec<f64>,
    bottom: Vec<f64>,
    pub closedness: Closedness,
}

/// Builds `W` by integrating `Xi` along rays, in the source parametrization
/// `R = R(s, theta)`.
pub fn generating_function(strip: &StripMap, form: &DensityForm, opts: &GenFunOptions) -> Result<GeneratingFunction> {
    if !strip.monotone {
        let (r, theta) = strip.argmin_d1r;
        return Err(Error::NotMonotone { r, theta, value: strip.min_d1r });
    }
    let prims = primitives(form)?;
    let cg = CumulativeGauss::new(opts.order);
    let p = opts.panels;
    let m = opts.order;
    let mut nodes = Vec::with_capacity(p * m);
    let mut weights = Vec::with_capacity(p * m);
    for k in 0..p {
        let (a, b) = (k as f64 / p as f64, (k + 1) as f64 / p as f64);
        for (x, w) in cg.rule().mapped(a, b) {
            nodes.push(x);
            weights.push(w);
        }
    }
    let thetas: Vec<f64> = (0..opts.ntheta).map(|j| TAU * j as f64 / opts.ntheta as f64).collect();
    let n = nodes.len();
    let mut gf = GeneratingFunction {
        strip: strip.clone(),
        prims,
        opts: opts.clone(),
        thetas,
        nodes,
        weights,
        ray_r: vec![0.0; opts.ntheta * n],
        ray_theta: vec![0.0; opts.ntheta * n],
        ray_d1r: vec![0.0; opts.ntheta * n],
        ray_w: vec![0.0; opts.ntheta * n],
        bottom: vec![0.0; opts.ntheta],
        closedness: Closedness { max_curl: 0.0, path_gap: 0.0 },
    };
    let mut g = vec![0.0; n];
    for j in 0..opts.ntheta {
        let th = gf.thetas[j];
        for k in 0..n {
            let (big_r, big_t, d1, xi) = gf.xi_r_source(gf.nodes[k], th)?;
            gf.ray_r[j * n + k] = big_r;
            gf.ray_theta[j * n + k] = big_t;
            gf.ray_d1r[j * n + k] = d1;
            g[k] = xi * d1;
        }
        let mut later = 0.0;
        for panel in (0..p).rev() {
            let (a, b) = (panel as f64 / p as f64, (panel + 1) as f64 / p as f64);
            let (tails, whole) = cg.tails(a, b, &g[panel * m..(panel + 1) * m]);
            for (q, t) in tails.iter().enumerate() {
                gf.ray_w[j * n + panel * m + q] = -(t + later);
            }
            later += whole;
        }
        gf.bottom[j] = -later;
    }
    gf.closedness = gf.closedness_check(opts.closedness_cells)?;
    if gf.closedness.max_curl > TOL_CLOSED {
        return Err(Error::NonClosed(gf.closedness.max_curl));
    }
    Ok(gf)
}

/// Scan result for a fixed point of `Phi`.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FixedPointReport {
    pub z: C,
    pub r: f64,
    pub theta: f64,
    /// `W` at the fixed point, i.e. its action.
    pub action: f64,
    /// `|phi(z) - z|`.
    pub residual: f64,
    /// The lifted action from `W + G o Phi - G`, which equals `W` at fixed points.
    pub sigma_check: f64,
    /// `|grad W|` at the point.
    pub grad_norm: f64,
}

impl GeneratingFunction {
    pub fn strip(&self) -> &StripMap {
        &self.strip
    }

    pub fn primitives(&self) -> &PrimitivePack {
        &self.prims
    }

    /// `(R, Theta, D1 R, Xi_R)` at source point `(s, theta)`.
    fn xi_r_source(&self, s: f64, theta: f64) -> Result<(f64, f64, f64, f64)> {
        let (big_r, big_t) = self.strip.eval(s, theta);
        let d1 = self.strip.d1r(s, theta);
        let xi = self.prims.b(big_r, theta)? - self.prims.b(big_r, big_t)?;
        Ok((big_r, big_t, d1, xi))
    }

    /// `W(R(s, theta), theta)`, no inversion needed.
    pub fn w_along_ray(&self, s: f64, theta: f64) -> Result<f64> {
        if s >= 1.0 {
            return Ok(0.0);
        }
        let rule = GaussLegendre::new(self.opts.order);
        let p = self.opts.panels;
        let h = (1.0 - s) / p as f64;
        let mut acc = 0.0;
        for k in 0..p {
            let a = s + h * k as f64;
            for (x, w) in rule.mapped(a, a + h) {
                let (_, _, d1, xi) = self.xi_r_source(x, theta)?;
                acc += w * xi * d1;
            }
        }
        Ok(-acc)
    }

    /// `W(R, theta)`.
    pub fn w(&self, big_r: f64, theta: f64) -> Result<f64> {
        let s = self.strip.inverse_radius(big_r, theta)?;
        self.w_along_ray(s, theta)
    }

    /// `D1 W = B(R, theta) - B(R, Theta)`.
    pub fn d1w(&self, big_r: f64, theta: f64) -> Result<f64> {
        let s = self.strip.inverse_radius(big_r, theta)?;
        let t = self.strip.big_theta(s, theta);
        Ok(self.prims.b(big_r, theta)? - self.prims.b(big_r, t)?)
    }

    /// `D2 W = A(R, theta) - A(r, theta)`.
    pub fn d2w(&self, big_r: f64, theta: f64) -> Result<f64> {
        let s = self.strip.inverse_radius(big_r, theta)?;
        Ok(self.prims.a(big_r, theta)? - self.prims.a(s, theta)?)
    }

    /// `max |central difference of W - (D1 W, D2 W)|` over `samples` interior
    /// points with step `h`.
    pub fn gradient_residual(&self, samples: usize, h: f64) -> Result<f64> {
        let mut worst: f64 = 0.0;
        for k in 0..samples {
            let big_r = 0.1 + 0.8 * (k as f64 + 0.5) / samples as f64;
            let th = 0.41 + TAU * 0.618_033_988_75 * k as f64;
            let fd1 = (self.w(big_r + h, th)? - self.w(big_r - h, th)?) / (2.0 * h);
            let fd2 = (self.w(big_r, th + h)? - self.w(big_r, th - h)?) / (2.0 * h);
            worst = worst.max((fd1 - self.d1w(big_r, th)?).abs()).max((fd2 - self.d2w(big_r, th)?).abs());
        }
        Ok(worst)
    }

    /// `W(0, theta)` on every ray.
    pub fn bottom_values(&self) -> &[f64] {
        &self.bottom
    }

    /// Mean of `W(0, .)`.
    pub fn bottom_value(&self) -> f64 {
        self.bottom.iter().sum::<f64>() / self.bottom.len() as f64
    }

    /// Spread of `W(0, .)` across rays.
    pub fn bottom_spread(&self) -> f64 {
        let lo = self.bottom.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = self.bottom.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        hi - lo
    }

    /// Ray node data `(s, theta, W(R(s, theta), theta))`.
    pub fn ray_samples(&self) -> impl Iterator<Item = (f64, f64, f64)> + '_ {
        let n = self.nodes.len();
        (0..self.thetas.len()).flat_map(move |j| (0..n).map(move |k| (self.nodes[k], self.thetas[j], self.ray_w[j * n + k])))
    }

    /// `(r, theta, R, W)` at the ray nodes, with the boundary row `r = 1`
    /// appended; cheap because every value is already stored.
    pub fn node_grid(&self) -> Vec<(f64, f64, f64, f64)> {
        let n = self.nodes.len();
        let mut out = Vec::with_capacity((n + 1) * self.thetas.len());
        for (j, &th) in self.thetas.iter().enumerate() {
            out.extend((0..n).map(|k| (self.nodes[k], th, self.ray_r[j * n + k], self.ray_w[j * n + k])));
            out.push((1.0, th, 1.0, 0.0));
        }
        out
    }

    /// `(R, theta, W)` on a uniform grid in `(R, theta)` for export.
    pub fn sample_grid(&self, nr: usize, ntheta: usize) -> Result<Vec<(f64, f64, f64)>> {
        let mut out = Vec::with_capacity((nr + 1) * ntheta);
        for i in 0..=nr {
            let big_r = i as f64 / nr as f64;
            for j in 0..ntheta {
                let th = TAU * j as f64 / ntheta as f64;
                let w = if i == 0 { self.bottom_value() } else { self.w(big_r, th)? };
                out.push((big_r, th, w));
            }
        }
        Ok(out)
    }

    fn closedness_check(&self, cells: usize) -> Result<Closedness> {
        if cells == 0 {
            return Ok(Closedness { max_curl: 0.0, path_gap: 0.0 });
        }
        let (lo, hi) = (0.02, 0.98);
        let hr = (hi - lo) / cells as f64;
        let ht = TAU / cells as f64;
        let rule = GaussLegendre::new(4);
        let ra = |i: usize| lo + hr * i as f64;
        let ta = |j: usize| ht * j as f64;
        // Integral of the pulled-back Xi along the r-edge at theta from r0 to r0 + hr.
        let r_edge = |r0: f64, th: f64| -> Result<f64> {
            let mut acc = 0.0;
            for (x, w) in rule.mapped(r0, r0 + hr) {
                let (_, _, d1, xi) = self.xi_r_source(x, th)?;
                acc += w * xi * d1;
            }
            Ok(acc)
        };
        let t_edge = |r: f64, t0: f64| -> Result<f64> {
            let mut acc = 0.0;
            for (t, w) in rule.mapped(t0, t0 + ht) {
                let (big_r, big_t) = self.strip.eval(r, t);
                let xi_t = self.prims.a(big_r, t)? - self.prims.a(r, t)?;
                let xi_r = self.prims.b(big_r, t)? - self.prims.b(big_r, big_t)?;
                acc += w * (xi_t + xi_r * self.strip.d2r(r, t));
            }
            Ok(acc)
        };
        let mut redges = vec![0.0; cells * (cells + 1)];
        for j in 0..=cells {
            for i in 0..cells {
                redges[j * cells + i] = r_edge(ra(i), ta(j))?;
            }
        }
        let mut tedges = vec![0.0; (cells + 1) * cells];
        for i in 0..=cells {
            for j in 0..cells {
                tedges[i * cells + j] = t_edge(ra(i), ta(j))?;
            }
        }
        let mut max_curl: f64 = 0.0;
        for i in 0..cells {
            for j in 0..cells {
                let circ = redges[j * cells + i] + tedges[(i + 1) * cells + j]
                    - redges[(j + 1) * cells + i]
                    - tedges[i * cells + j];
                max_curl = max_curl.max((circ / (hr * ht)).abs());
            }
        }
        // Ray integration from (1, theta) against the broken path through (R, 0).
        let mut path_gap: f64 = 0.0;
        for &(big_r, th) in &[(0.3, 1.1), (0.55, 2.9), (0.8, 4.4), (0.15, 5.8)] {
            let ray = self.w(big_r, th)?;
            let base = self.w(big_r, 0.0)?;
            let mut leg = 0.0;
            let rule = GaussLegendre::new(12);
            for k in 0..4 {
                let a = th * k as f64 / 4.0;
                for (t, w) in rule.mapped(a, a + th / 4.0) {
                    leg += w * self.d2w(big_r, t)?;
                }
            }
            path_gap = path_gap.max((ray - base - leg).abs());
        }
        Ok(Closedness { max_curl, path_gap })
    }

    /// `Sigma(r, theta) = W(R, theta) + G(Phi(r, theta)) - G(R, theta)`.
    pub fn action_from_w(&self, r: f64, theta: f64) -> Result<f64> {
        action_from_w(self, r, theta)
    }

    /// Newton iteration on `(R - r, Theta - theta)` with step halving.
    pub fn refine_fixed_point(&self, r0: f64, theta0: f64) -> Option<(f64, f64)> {
        let s = &self.strip;
        let resid = |r: f64, t: f64| {
            let (a, b) = s.eval(r, t);
            (a - r, b - t)
        };
        let norm = |v: (f64, f64)| v.0.hypot(v.1);
        let (mut r, mut t) = (r0, theta0);
        let mut f = resid(r, t);
        let h = 1e-7;
        for _ in 0..60 {
            if norm(f) < 1e-14 {
                break;
            }
            let fr = resid((r + h).min(1.0), t);
            let fl = resid((r - h).max(0.0), t);
            let dr = (r + h).min(1.0) - (r - h).max(0.0);
            let j11 = (fr.0 - fl.0) / dr;
            let j21 = (fr.1 - fl.1) / dr;
            let fu = resid(r, t + h);
            let fd = resid(r, t - h);
            let j12 = (fu.0 - fd.0) / (2.0 * h);
            let j22 = (fu.1 - fd.1) / (2.0 * h);
            let det = j11 * j22 - j12 * j21;
            if det.abs() < 1e-300 || !det.is_finite() {
                return None;
            }
            let dx = (j22 * f.0 - j12 * f.1) / det;
            let dy = (-j21 * f.0 + j11 * f.1) / det;
            let mut lambda = 1.0;
            let mut accepted = false;
            for _ in 0..40 {
                let nr = (r - lambda * dx).clamp(1e-12, 1.0 - 1e-12);
                let nt = t - lambda * dy;
                let nf = resid(nr, nt);
                if norm(nf) < norm(f) {
                    r = nr;
                    t = nt;
                    f = nf;
                    accepted = true;
                    break;
                }
                lambda *= 0.5;
            }
            if !accepted {
                break;
            }
        }
        if r <= 1e-9 || r >= 1.0 - 1e-9 {
            return None;
        }
        let z = C::from_polar(r, t);
        if (s.iso.map(z) - z).norm() < 1e-8 {
            Some((r, t))
        } else {
            None
        }
    }

    fn report(&self, r: f64, t: f64) -> Result<FixedPointReport> {
        let z = C::from_polar(r, t);
        let residual = (self.strip.iso.map(z) - z).norm();
        let action = self.w_along_ray(r, t)?;
        let sigma_check = self.action_from_w(r, t)?;
        let grad_norm = self.d1w(r, t)?.hypot(self.d2w(r, t)?);
        Ok(FixedPointReport { z, r, theta: t, action, residual, sigma_check, grad_norm })
    }

    /// Refines discrete critical points of `W` on the ray grid into fixed
    /// points of `Phi`, merging duplicates.
    pub fn fixed_points(&self, max_candidates: usize) -> Result<Vec<FixedPointReport>> {
        let n = self.nodes.len();
        let nt = self.thetas.len();
        let at = |j: usize, k: usize| self.ray_w[(j % nt) * n + k];
        let mut cands = Vec::new();
        for j in 0..nt {
            for k in 1..n - 1 {
                let c = at(j, k);
                let nb = [at(j, k - 1), at(j, k + 1), at(j + 1, k), at(j + nt - 1, k)];
                if nb.iter().all(|&v| v > c) || nb.iter().all(|&v| v < c) {
                    cands.push((c, j, k));
                }
            }
        }
        cands.sort_by(|a, b| a.0.total_cmp(&b.0));
        let mut out: Vec<FixedPointReport> = Vec::new();
        for &(_, j, k) in cands.iter().take(max_candidates) {
            if let Some((r, t)) = self.refine_fixed_point(self.nodes[k], self.thetas[j]) {
                let z = C::from_polar(r, t);
                if out.iter().any(|p| (p.z - z).norm() < 1e-6) {
                    continue;
                }
                out.push(self.report(r, t)?);
            }
        }
        Ok(out)
    }
}

/// `Sigma(r, theta) = W(R, theta) + G(Phi(r, theta)) - G(R, theta)`, the
/// lifted action w.r.t. `lambda_a`.
pub fn action_from_w(gf: &GeneratingFunction, r: f64, theta: f64) -> Result<f64> {
    let (big_r, big_t) = gf.strip.eval(r, theta);
    let w = gf.w_along_ray(r, theta)?;
    Ok(w + gf.prims.g(big_r, big_t)? - gf.prims.g(big_r, theta)?)
}

/// `CAL = int_Q W(R(r, theta), theta) Omega + int_Q W(r, theta) Omega`.
pub fn calabi_from_w(gf: &GeneratingFunction, form: &DensityForm) -> crate::calabi::CalabiValue {
    let n = gf.nodes.len();
    let nt = gf.thetas.len();
    let ray_sum = |j: usize| -> f64 {
        let th = gf.thetas[j];
        (0..n)
            .map(|k| {
                let idx = j * n + k;
                let w = gf.ray_w[idx];
                let first = form.density(gf.nodes[k], th);
                let second = form.density(gf.ray_r[idx], th) * gf.ray_d1r[idx];
                gf.weights[k] * w * (first + second)
            })
            .sum()
    };
    let sums: Vec<f64> = (0..nt).map(ray_sum).collect();
    let value = TAU / nt as f64 * sums.iter().sum::<f64>();
    let coarse = TAU / (nt / 2).max(1) as f64 * sums.iter().step_by(2).sum::<f64>();
    crate::calabi::CalabiValue {
        value,
        route: crate::calabi::CalabiRoute::GeneratingFunction,
        error_estimate: (value - coarse).abs(),
    }
}

#[derive(Clone, Debug)]
pub struct FixedPointOptions {
    pub lift: LiftOptions,
    pub genfun: GenFunOptions,
    /// `CAL` above this is treated as positive.
    pub tol_cal: f64,
    pub candidates: usize,
}

impl Default for FixedPointOptions {
    fn default() -> Self {
        Self { lift: LiftOptions::grid(64, 128), genfun: GenFunOptions::default(), tol_cal: 1e-9, candidates: 24 }
    }
}

/// Finds an interior fixed point of negative action for a monotone map with
/// `CAL <= 0` that is not the identity.
pub fn find_negative_fixed_point(
    iso: SharedIsotopy,
    form: &DensityForm,
    opts: &FixedPointOptions,
) -> Result<Option<FixedPointReport>> {
    let strip = lift_map(iso, &opts.lift)?;
    if !strip.monotone {
        return Err(Error::HypothesisViolation("map is not radially monotone".to_string()));
    }
    if strip.max_displacement < 1e-12 {
        return Err(Error::HypothesisViolation("map is the identity at tolerance".to_string()));
    }
    let gf = generating_function(&strip, form, &opts.genfun)?;
    let cal = calabi_from_w(&gf, form);
    if cal.value > opts.tol_cal {
        return Err(Error::HypothesisViolation(alloc::format!("Calabi invariant {} is positive", cal.value)));
    }
    let w0 = gf.bottom_value();
    if w0 < 0.0 {
        return Ok(Some(FixedPointReport {
            z: C::new(0.0, 0.0),
            r: 0.0,
            theta: 0.0,
            action: w0,
            residual: strip.isotopy().map(C::new(0.0, 0.0)).norm(),
            sigma_check: w0,
            grad_norm: 0.0,
        }));
    }
    let n = gf.nodes.len();
    let mut order: Vec<usize> = (0..gf.ray_w.len()).filter(|&i| gf.ray_w[i] < 0.0).collect();
    order.sort_by(|&a, &b| gf.ray_w[a].total_cmp(&gf.ray_w[b]).then(gf.nodes[a % n].total_cmp(&gf.nodes[b % n])));
    let mut tried: Vec<C> = Vec::new();
    for idx in order {
        if tried.len() >= opts.candidates {
            break;
        }
        let (s, th) = (gf.nodes[idx % n], gf.thetas[idx / n]);
        let start = C::from_polar(s, th);
        if tried.iter().any(|&p| (p - start).norm() < 0.05) {
            continue;
        }
        tried.push(start);
        if let Some((r, t)) = gf.refine_fixed_point(s, th) {
            let rep = gf.report(r, t)?;
            if rep.action < 0.0 {
                return Ok(Some(rep));
            }
        }
    }
    Ok(None)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::calabi::calabi_via_hamiltonian;
    use crate::hamflow::*;
    use crate::poly::Poly2;

    fn shared<I: DiskIsotopy + Send + Sync + 'static>(i: I) -> SharedIsotopy {
        Arc::new(i)
    }

    fn rotation(beta: f64) -> SharedIsotopy {
        shared(RadialFlow::centered(RadialProfile::rotation(beta)))
    }

    fn small() -> LiftOptions {
        LiftOptions::grid(32, 64)
    }

    fn gopts() -> GenFunOptions {
        GenFunOptions { ntheta: 64, panels: 4, order: 8, closedness_cells: 16 }
    }

    #[test]
    fn rotation_lift_is_exact() {
        let beta = 0.8;
        let s = lift_map(rotation(beta), &small()).unwrap();
        assert!(s.monotone);
        for &(r, t) in &[(0.3, 0.2), (0.9, 5.0), (0.5, -7.0), (1.0, 13.0)] {
            let (a, b) = s.eval(r, t);
            assert!((a - r).abs() < 1e-14 && (b - t - beta).abs() < 1e-12);
        }
        assert!(s.equivariance_residual(20) < 1e-9);
        let id = lift_map(shared(Identity), &small()).unwrap();
        assert!((id.d1r(0.4, 1.0) - 1.0).abs() < 1e-9 && id.max_displacement == 0.0);
        // A full-turn boundary rotation is tracked through time.
        let big = lift_map(rotation(7.0), &small()).unwrap();
        assert!((big.big_theta(1.0, 0.0) - 7.0).abs() < 1e-12);
    }

    #[test]
    fn origin_must_be_fixed() {
        let shifted = shared(RadialFlow { profile: RadialProfile::Poly { coeffs: vec![0.0, 0.3] }, center: C::new(0.2, 0.0) });
        assert!(matches!(lift_map(shifted, &small()), Err(Error::NotFixingOrigin(_))));
    }

    #[test]
    fn derivative_at_origin() {
        let q = Poly2::new(vec![(2, 0, 0.6), (1, 1, 0.4), (0, 2, -0.2)]);
        let iso = shared(HamiltonianIsotopy::new(EnvelopedPoly::autonomous(2, q), DensityForm::standard(), 400));
        let s = lift_map(iso.clone(), &small()).unwrap();
        let h = 1e-6;
        for k in 0..8 {
            let th = 0.7 * k as f64;
            let e = C::from_polar(1.0, th);
            let dphi = (iso.map(e * h) - iso.map(-e * h)) / (2.0 * h);
            assert!((s.d1r(0.0, th) - dphi.norm()).abs() < 1e-5);
        }
    }

    #[test]
    fn rotation_generating_function() {
        let beta = 0.3;
        let s = lift_map(rotation(beta), &small()).unwrap();
        let form = DensityForm::standard();
        let gf = generating_function(&s, &form, &gopts()).unwrap();
        for &(r, t) in &[(0.0, 0.0), (0.4, 1.0), (0.77, 4.0)] {
            assert!((gf.w(r, t).unwrap() - beta * (1.0 - r * r) / 2.0).abs() < 1e-12);
        }
        assert!((gf.bottom_value() - beta / 2.0).abs() < 1e-12 && gf.bottom_spread() < 1e-12);
        assert!((gf.action_from_w(0.0, 1.0).unwrap() - beta / 2.0).abs() < 1e-12);
        let cal = calabi_from_w(&gf, &form);
        assert!((cal.value - beta * PI / 2.0).abs() < 1e-10);
        assert!(gf.closedness.max_curl < 1e-8 && gf.closedness.path_gap < 1e-10);
        assert!(gf.w(1.0, 0.3).unwrap() == 0.0);
        assert!((gf.w(0.5, 0.3).unwrap() - gf.w(0.5, 0.3 + TAU).unwrap()).abs() < 1e-12);
    }

    #[test]
    fn identity_generating_function_vanishes() {
        let s = lift_map(shared(Identity), &small()).unwrap();
        let gf = generating_function(&s, &DensityForm::tilted(0.3).unwrap(), &gopts()).unwrap();
        assert!(gf.ray_samples().all(|(_, _, w)| w.abs() < 1e-14));
        assert!(calabi_from_w(&gf, &DensityForm::standard()).value.abs() < 1e-14);
        assert!(gf.action_from_w(0.5, 0.5).unwrap().abs() < 1e-14);
    }

    #[test]
    fn identity_is_rejected_by_fixed_point_search() {
        let r = find_negative_fixed_point(shared(Identity), &DensityForm::standard(), &FixedPointOptions::default());
        assert!(matches!(r, Err(Error::HypothesisViolation(_))));
    }

    #[test]
    fn radial_negative_calabi_example() {
        // h(s) = -k (1 - s)^2: CAL = -2 pi k / 3, sigma(0) = -k.
        let k = 0.05;
        let profile = RadialProfile::Poly { coeffs: vec![0.0, -k] };
        let iso = shared(RadialFlow::centered(profile.clone()));
        let form = DensityForm::standard();
        let opts = FixedPointOptions { lift: small(), genfun: gopts(), ..Default::default() };
        let rep = find_negative_fixed_point(iso, &form, &opts).unwrap().unwrap();
        assert!(rep.action < 0.0 && rep.residual < 1e-9);
        assert!((rep.action + k).abs() < 1e-10);
        let cal = calabi_via_hamiltonian(&RadialHamiltonian::centered(profile), &form).unwrap();
        assert!((cal.value + TAU * k / 3.0).abs() < 1e-10);
    }

    #[test]
    fn fixed_point_with_positive_origin_action() {
        // sigma(0) = a > 0 but CAL < 0 forces an interior minimum of W.
        let ham = EnvelopedPoly::autonomous(2, Poly2::new(vec![(0, 0, 0.02), (2, 0, -0.3), (0, 2, -0.2), (3, 0, 0.1)]));
        let form = DensityForm::standard();
        let cal = calabi_via_hamiltonian(&ham, &form).unwrap();
        assert!(cal.value < 0.0);
        let iso = shared(HamiltonianIsotopy::new(ham, form.clone(), 300));
        let opts = FixedPointOptions { lift: small(), genfun: gopts(), ..Default::default() };
        let rep = find_negative_fixed_point(iso.clone(), &form, &opts).unwrap().unwrap();
        assert!(rep.action < 0.0 && rep.residual < 1e-8 && rep.r > 0.0);
        assert!((rep.sigma_check - rep.action).abs() < 1e-7);
        assert!(rep.grad_norm < 1e-5);
    }

    #[test]
    fn mobius_conjugation_preserves_origin_case() {
        let iso = rotation(0.4);
        let c = mobius_conjugate(iso.clone(), &DensityForm::standard(), C::new(0.0, 0.0), TOL_FIX).unwrap();
        assert_eq!(c.isotopy.map(C::new(0.3, 0.1)), iso.map(C::new(0.3, 0.1)));
        assert!(matches!(
            mobius_conjugate(iso, &DensityForm::standard(), C::new(0.3, 0.0), TOL_FIX),
            Err(Error::FixedPointMismatch(_))
        ));
    }

    #[test]
    fn nonmonotone_map_is_reported() {
        // A strong off-center swirl folds rays.
        let chi = crate::maximizer::make_cutoff(0.1).unwrap();
        let rotor = shared(RadialFlow { profile: RadialProfile::rotor(0.2, 0.2, chi), center: C::new(0.5, 0.0) });
        let s = lift_map(rotor, &LiftOptions::grid(128, 256)).unwrap();
        assert!(!s.monotone);
        assert!(matches!(generating_function(&s, &DensityForm::standard(), &gopts()), Err(Error::NotMonotone { .. })));
    }
}
