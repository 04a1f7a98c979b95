//! Reeb-flow data of the suspension of a disk map with return time
//! `tau = sigma + pi`: contact volume, periodic orbits, systolic ratio.

use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;
use alloc::format;

use crate::calabi::{CalabiRoute, CalabiValue};
use crate::hamflow::jacobian_fd;
use crate::maximizer::{MaximizerConstruction, Variant};
use crate::{Error, Result, C, PI, TAU};

/// Default census tolerance on `|phi^k(z) - z|`.
pub const TOL_FIX: f64 = 1e-9;

/// What the suspension machinery needs from a disk map.
pub trait ReturnMap {
    fn map(&self, z: C) -> C;
    /// Action w.r.t. `lambda_0`.
    fn sigma(&self, z: C) -> f64;
    fn calabi(&self) -> CalabiValue;
    /// `int sigma dx dy`, computed independently of [`ReturnMap::calabi`].
    fn action_integral(&self) -> f64;
    /// Points at which to bound `sigma`, dense where the map varies.
    fn sample_points(&self, density: usize) -> Vec<C>;
    /// Known continua and isolated points of fixed points, stated analytically.
    fn fixed_families(&self) -> Vec<FixedFamily>;
    /// Index into [`ReturnMap::fixed_families`] of the family containing `z`, if any.
    fn family_of(&self, z: C, tol: f64) -> Option<usize>;
    /// Largest period worth probing; beyond it the analytic argument takes over.
    fn probe_limit(&self) -> usize {
        usize::MAX
    }
    /// Which analytic statement bounds the periods not probed.
    fn guarantee(&self) -> String {
        String::new()
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum FamilyKind {
    /// An isolated fixed point.
    Point,
    /// The annulus `s_min <= |z|^2 <= 1` of fixed points.
    Band,
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FixedFamily {
    pub kind: FamilyKind,
    pub label: String,
    /// Representative point.
    pub x: f64,
    pub y: f64,
    /// Inner squared radius for bands.
    pub s_min: f64,
    pub action: f64,
    /// Reeb period `tau = action + pi` of the corresponding closed orbits.
    pub period: f64,
}

/// `phi = id`: every point is fixed with zero action.
#[derive(Clone, Copy, Debug, Default)]
pub struct IdentityMap;

impl ReturnMap for IdentityMap {
    fn map(&self, z: C) -> C {
        z
    }
    fn sigma(&self, _z: C) -> f64 {
        0.0
    }
    fn calabi(&self) -> CalabiValue {
        CalabiValue { value: 0.0, route: CalabiRoute::ClosedForm, error_estimate: 0.0 }
    }
    fn action_integral(&self) -> f64 {
        0.0
    }
    fn sample_points(&self, density: usize) -> Vec<C> {
        polar_cells(density, 2 * density)
    }
    fn fixed_families(&self) -> Vec<FixedFamily> {
        vec![FixedFamily { kind: FamilyKind::Band, label: "disk".into(), x: 0.0, y: 0.0, s_min: 0.0, action: 0.0, period: PI }]
    }
    fn family_of(&self, _z: C, _tol: f64) -> Option<usize> {
        Some(0)
    }
    fn probe_limit(&self) -> usize {
        1
    }
    fn guarantee(&self) -> String {
        "all orbits closed with period pi".into()
    }
}

impl ReturnMap for MaximizerConstruction {
    fn map(&self, z: C) -> C {
        self.phi(z)
    }
    fn sigma(&self, z: C) -> f64 {
        MaximizerConstruction::sigma(self, z)
    }
    fn calabi(&self) -> CalabiValue {
        self.cal
    }
    fn action_integral(&self) -> f64 {
        self.action_integral
    }
    fn sample_points(&self, density: usize) -> Vec<C> {
        MaximizerConstruction::sample_points(self, density, 2 * density, (density / 8).max(6))
    }
    fn fixed_families(&self) -> Vec<FixedFamily> {
        let origin = self.origin_action();
        vec![
            FixedFamily { kind: FamilyKind::Point, label: "origin".into(), x: 0.0, y: 0.0, s_min: 0.0, action: origin, period: PI + origin },
            FixedFamily {
                kind: FamilyKind::Band,
                label: "outer band".into(),
                x: 1.0,
                y: 0.0,
                s_min: self.band_start(),
                action: 0.0,
                period: PI,
            },
        ]
    }
    /// The transition annulus of `phi_plus` rotates by an angle that vanishes
    /// to high order at the band, so near-band points within `tol` are
    /// counted with the band.
    fn family_of(&self, z: C, tol: f64) -> Option<usize> {
        if z.norm() <= tol.max(1e-12) {
            return Some(0);
        }
        let s = z.norm_sqr();
        let chi = crate::maximizer::make_cutoff(self.params.delta).ok()?;
        if s >= self.band_start() || (s > chi.affine_end() && (self.phi(z) - z).norm() < tol) {
            return Some(1);
        }
        None
    }
    fn probe_limit(&self) -> usize {
        self.params.n - 1
    }
    fn guarantee(&self) -> String {
        let n = self.params.n;
        match self.params.variant {
            Variant::Sysgra => format!(
                "orbits off the fixed set have period at least n = {n}; with tau >= pi/n their Reeb period is at least pi"
            ),
            Variant::Calpic => {
                "orbits of period k >= 2 have Reeb period at least 2 min tau, which exceeds pi once tau >= pi/2".into()
            }
        }
    }
}

fn polar_cells(nr: usize, nt: usize) -> Vec<C> {
    let mut pts = Vec::with_capacity(nr * nt);
    for i in 0..nr {
        let r = (i as f64 + 0.5) / nr as f64;
        for j in 0..nt {
            pts.push(C::from_polar(r, TAU * j as f64 / nt as f64));
        }
    }
    pts
}

/// The return-time field `tau = sigma + pi` with its sampled range.
#[derive(Clone, Debug)]
pub struct ReturnTime<'a, M: ReturnMap + ?Sized> {
    pub map: &'a M,
    pub min: f64,
    pub max: f64,
    pub argmin: C,
}

impl<M: ReturnMap + ?Sized> ReturnTime<'_, M> {
    pub fn eval(&self, z: C) -> f64 {
        self.map.sigma(z) + PI
    }
}

/// `tau = sigma + pi`, checked positive on the map's sample points.
pub fn return_time<M: ReturnMap + ?Sized>(map: &M) -> Result<ReturnTime<'_, M>> {
    return_time_with(map, 200)
}

pub fn return_time_with<M: ReturnMap + ?Sized>(map: &M, density: usize) -> Result<ReturnTime<'_, M>> {
    let mut rt = ReturnTime { map, min: f64::INFINITY, max: f64::NEG_INFINITY, argmin: C::new(0.0, 0.0) };
    for z in map.sample_points(density) {
        let tau = map.sigma(z) + PI;
        if !tau.is_finite() {
            return Err(Error::NonpositiveReturnTime(tau));
        }
        if tau < rt.min {
            rt.min = tau;
            rt.argmin = z;
        }
        rt.max = rt.max.max(tau);
    }
    if rt.min <= 0.0 {
        return Err(Error::NonpositiveReturnTime(rt.min));
    }
    Ok(rt)
}

/// `(pi^2 + CAL, pi^2 + int sigma dx dy)`: the contact volume two ways.
pub fn contact_volume<M: ReturnMap + ?Sized>(map: &M) -> (f64, f64) {
    (PI * PI + map.calabi().value, PI * PI + map.action_integral())
}

#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct OrbitEntry {
    pub x: f64,
    pub y: f64,
    /// Minimal period under the disk map.
    pub k: usize,
    /// Reeb period `T = sum_{j<k} tau(phi^j z)`.
    pub period: f64,
    pub residual: f64,
    /// Set when the point belongs to a fixed family rather than being isolated.
    pub family: Option<String>,
}

impl OrbitEntry {
    pub fn z(&self) -> C {
        C::new(self.x, self.y)
    }
}

#[derive(Clone, Debug)]
pub struct CensusOptions {
    pub k_max: usize,
    pub nr: usize,
    pub ntheta: usize,
    pub tol_fix: f64,
    /// Grid minima of `|phi^k z - z|` above this are not refined.
    pub candidate_tol: f64,
    pub newton_iters: usize,
}

impl Default for CensusOptions {
    fn default() -> Self {
        Self { k_max: 8, nr: 400, ntheta: 400, tol_fix: TOL_FIX, candidate_tol: 0.05, newton_iters: 40 }
    }
}

#[derive(Clone, Debug, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Census {
    /// One representative per orbit, families first.
    pub entries: Vec<OrbitEntry>,
    pub families: Vec<FixedFamily>,
    /// Periods actually probed: `1..=probed_up_to`.
    pub probed_up_to: usize,
    pub candidates: usize,
    pub rejected: usize,
}

/// `T(z) = sum_{j<k} tau(phi^j z)`.
pub fn orbit_period<M: ReturnMap + ?Sized>(map: &M, z: C, k: usize) -> f64 {
    let mut w = z;
    let mut t = 0.0;
    for _ in 0..k {
        t += map.sigma(w) + PI;
        w = map.map(w);
    }
    t
}

fn iterate<M: ReturnMap + ?Sized>(map: &M, z: C, k: usize) -> C {
    (0..k).fold(z, |w, _| map.map(w))
}

/// Damped Newton on `phi^k(z) - z` with finite-difference Jacobians.
fn refine<M: ReturnMap + ?Sized>(map: &M, mut z: C, k: usize, opts: &CensusOptions) -> Option<(C, f64)> {
    let f = |w: C| iterate(map, w, k) - w;
    let mut res = f(z);
    for _ in 0..opts.newton_iters {
        if res.norm() < opts.tol_fix {
            return Some((z, res.norm()));
        }
        let j = jacobian_fd(|w| iterate(map, w, k), z, 1e-7);
        let (a, b, c, d) = (j[0][0] - 1.0, j[0][1], j[1][0], j[1][1] - 1.0);
        let det = a * d - b * c;
        if det.abs() < 1e-14 {
            return None;
        }
        let step = C::new((d * res.re - b * res.im) / det, (-c * res.re + a * res.im) / det);
        let mut lambda = 1.0;
        loop {
            let cand = z - step * lambda;
            if cand.norm() <= 1.0 {
                let r = f(cand);
                if r.norm() < res.norm() {
                    z = cand;
                    res = r;
                    break;
                }
            }
            lambda *= 0.5;
            if lambda < 1e-6 {
                return None;
            }
        }
    }
    (res.norm() < opts.tol_fix).then(|| (z, res.norm()))
}

/// Periodic orbits of period `k <= k_max`: grid scan of `|phi^k z - z|`,
/// Newton refinement of local minima, orbit deduplication. Points of known
/// fixed families are folded into one entry per family.
pub fn periodic_orbit_census<M: ReturnMap + ?Sized>(map: &M, opts: &CensusOptions) -> Census {
    let k_top = opts.k_max.min(map.probe_limit()).max(1);
    let families = map.fixed_families();
    let mut census = Census { entries: Vec::new(), families: families.clone(), probed_up_to: k_top, candidates: 0, rejected: 0 };
    for fam in &families {
        let z = C::new(fam.x, fam.y);
        census.entries.push(OrbitEntry {
            x: fam.x,
            y: fam.y,
            k: 1,
            period: fam.period,
            residual: (map.map(z) - z).norm(),
            family: Some(fam.label.clone()),
        });
    }

    let (nr, nt) = (opts.nr, opts.ntheta);
    let grid = polar_cells(nr, nt);
    let mut current = grid.clone();
    let mut dist = vec![0.0f64; grid.len()];
    // Every orbit point found so far, tagged with its entry.
    let mut known: Vec<C> = Vec::new();
    for k in 1..=k_top {
        for (i, z) in current.iter_mut().enumerate() {
            *z = map.map(*z);
            dist[i] = (*z - grid[i]).norm();
        }
        for i in 0..nr {
            for j in 0..nt {
                let idx = i * nt + j;
                let d = dist[idx];
                if !(d < opts.candidate_tol) {
                    continue;
                }
                let is_min = (-1i64..=1).all(|di| {
                    (-1i64..=1).all(|dj| {
                        let ii = i as i64 + di;
                        if ii < 0 || ii >= nr as i64 {
                            return true;
                        }
                        let jj = (j as i64 + dj).rem_euclid(nt as i64) as usize;
                        dist[ii as usize * nt + jj] >= d
                    })
                });
                if !is_min || map.family_of(grid[idx], opts.tol_fix).is_some() {
                    continue;
                }
                census.candidates += 1;
                let Some((z, residual)) = refine(map, grid[idx], k, opts) else {
                    census.rejected += 1;
                    continue;
                };
                if map.family_of(z, opts.tol_fix).is_some() {
                    continue;
                }
                let minimal = (1..k).all(|j| k % j != 0 || (iterate(map, z, j) - z).norm() >= opts.tol_fix);
                if !minimal || known.iter().any(|w| (*w - z).norm() < 1e-6) {
                    continue;
                }
                let mut w = z;
                for _ in 0..k {
                    known.push(w);
                    w = map.map(w);
                }
                census.entries.push(OrbitEntry {
                    x: z.re,
                    y: z.im,
                    k,
                    period: orbit_period(map, z, k),
                    residual,
                    family: None,
                });
            }
        }
    }
    census
}

#[derive(Clone, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SuspensionReport {
    pub tau_min: f64,
    pub tau_max: f64,
    pub cal: CalabiValue,
    pub volume: f64,
    pub volume_check: f64,
    pub t_min: f64,
    pub t_min_certified_up_to: usize,
    /// `T_min = pi`, realized by the boundary orbit.
    pub t_min_from_boundary: bool,
    pub rho_sys: f64,
    pub census: Census,
    pub guarantee: String,
}

impl SuspensionReport {
    /// `T_min^2 > vol`: the contact form beats the Zoll bound.
    pub fn exceeds_zoll(&self) -> bool {
        self.rho_sys > 1.0
    }
}

/// `T_min = min(pi, census periods)` and `rho_sys = T_min^2 / vol`.
pub fn systolic_ratio<M: ReturnMap + ?Sized>(map: &M, k_max: usize) -> Result<SuspensionReport> {
    systolic_ratio_with(map, &CensusOptions { k_max, ..CensusOptions::default() })
}

pub fn systolic_ratio_with<M: ReturnMap + ?Sized>(map: &M, opts: &CensusOptions) -> Result<SuspensionReport> {
    let rt = return_time(map)?;
    let (volume, volume_check) = contact_volume(map);
    let census = periodic_orbit_census(map, opts);
    let census_min = census.entries.iter().map(|e| e.period).fold(f64::INFINITY, f64::min);
    // The boundary circle is always a closed orbit of period pi.
    let t_min = census_min.min(PI);
    if !(t_min > 0.0) {
        return Err(Error::NonpositiveReturnTime(t_min));
    }
    Ok(SuspensionReport {
        tau_min: rt.min,
        tau_max: rt.max,
        cal: map.calabi(),
        volume,
        volume_check,
        t_min,
        t_min_certified_up_to: census.probed_up_to,
        t_min_from_boundary: t_min == PI,
        rho_sys: t_min * t_min / volume,
        census,
        guarantee: map.guarantee(),
    })
}

/// One leg of a suspension orbit: `s` runs from 0 to `tau(z)` at unit speed.
#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Leg {
    pub t_start: f64,
    pub z: C,
    pub tau: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SuspensionTrace {
    pub legs: Vec<Leg>,
    pub t_total: f64,
    /// Position at `t_total`.
    pub end: (C, f64),
}

impl SuspensionTrace {
    /// Crossing times of the section `s = 0` (excluding the start).
    pub fn crossings(&self) -> impl Iterator<Item = f64> + '_ {
        self.legs.iter().skip(1).map(|l| l.t_start)
    }

    /// `(t, x, y, s)` rows: each leg's endpoints, the jump, and `per_leg`
    /// interior samples.
    pub fn rows(&self, per_leg: usize) -> Vec<[f64; 4]> {
        let mut out = Vec::new();
        for (i, leg) in self.legs.iter().enumerate() {
            let last = i + 1 == self.legs.len();
            let span = if last { self.t_total - leg.t_start } else { leg.tau };
            for m in 0..=per_leg + 1 {
                let s = span * m as f64 / (per_leg + 1) as f64;
                out.push([leg.t_start + s, leg.z.re, leg.z.im, s]);
            }
        }
        out
    }
}

/// The suspension flow from `(z0, 0)` for time `t_total`: `s` grows at unit
/// rate until it reaches `tau(z)`, then the point jumps to `(phi(z), 0)`.
pub fn suspension_orbit<M: ReturnMap + ?Sized>(map: &M, z0: C, t_total: f64) -> Result<SuspensionTrace> {
    if !(t_total >= 0.0) {
        return Err(Error::ParameterOutOfRange(format!("t_total = {t_total} must be non-negative")));
    }
    let mut legs = Vec::new();
    let mut z = z0;
    let mut t = 0.0;
    loop {
        let tau = map.sigma(z) + PI;
        if !(tau > 0.0) {
            return Err(Error::NonpositiveReturnTime(tau));
        }
        legs.push(Leg { t_start: t, z, tau });
        if t + tau > t_total {
            return Ok(SuspensionTrace { legs, t_total, end: (z, t_total - t) });
        }
        t += tau;
        z = map.map(z);
        if t == t_total {
            legs.push(Leg { t_start: t, z, tau: map.sigma(z) + PI });
            return Ok(SuspensionTrace { legs, t_total, end: (z, 0.0) });
        }
    }
}
