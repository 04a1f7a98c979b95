//! Greedy randomized disk packings of a sector, replicated by rotation.

use alloc::collections::BinaryHeap;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::cmp::Ordering;
#[allow(unused_imports)] // inherent float methods shadow it when std is linked
use num_traits::Float;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::{Error, Result, C, PI, TAU};

/// Feasibility cap on the requested density.
pub const RHO_MAX: f64 = 0.88;
pub const R_MIN: f64 = 1e-3;
pub const DISK_BUDGET: usize = 5000;

#[derive(Clone, Copy, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct Disk {
    pub center: C,
    pub radius: f64,
}

impl Disk {
    pub fn contains(&self, z: C) -> bool {
        (z - self.center).norm_sqr() < self.radius * self.radius
    }
}

#[derive(Clone, Debug)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct PackingOptions {
    /// Disks are kept inside this radius.
    pub outer_radius: f64,
    pub r_min: f64,
    /// Disks per sector.
    pub budget: usize,
    pub rho_max: f64,
}

impl Default for PackingOptions {
    fn default() -> Self {
        Self { outer_radius: 1.0, r_min: R_MIN, budget: DISK_BUDGET, rho_max: RHO_MAX }
    }
}

/// An `n`-fold symmetric packing. The first `sector_len` disks lie in the
/// fundamental sector `0 < theta < 2 pi / n`; disk `k * sector_len + i` is
/// disk `i` rotated by `2 pi k / n`.
#[derive(Clone, Debug, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DiskPacking {
    pub n: usize,
    pub disks: Vec<Disk>,
    pub sector_len: usize,
    /// `sum area(D_j) / pi`.
    pub density: f64,
    pub rho_target: f64,
    pub seed: u64,
    pub outer_radius: f64,
}

impl DiskPacking {
    pub fn sector_disks(&self) -> &[Disk] {
        &self.disks[..self.sector_len]
    }

    pub fn sector_angle(&self) -> f64 {
        TAU / self.n as f64
    }

    /// `sum_j r_j^2`.
    pub fn sum_r2(&self) -> f64 {
        self.disks.iter().map(|d| d.radius * d.radius).sum()
    }

    pub fn max_radius(&self) -> f64 {
        self.disks.iter().map(|d| d.radius).fold(0.0, f64::max)
    }

    /// Smallest gap between a disk and its image under the `2 pi / n` rotation:
    /// `min_j 2 |z_j| sin(pi / n) - 2 r_j`.
    pub fn rotation_gap(&self) -> f64 {
        let s = (PI / self.n as f64).sin();
        self.sector_disks()
            .iter()
            .map(|d| 2.0 * d.center.norm() * s - 2.0 * d.radius)
            .fold(f64::INFINITY, f64::min)
    }

    /// Checks every geometric invariant; returns the first violation.
    pub fn validate(&self) -> Result<()> {
        let alpha = self.sector_angle();
        let cap = PI / self.n as f64;
        for (i, d) in self.sector_disks().iter().enumerate() {
            if d.radius > cap {
                return Err(Error::GeometryViolation(format!("disk {i} has radius {} > pi/n", d.radius)));
            }
            if sector_clearance(d.center, alpha, self.outer_radius) < d.radius {
                return Err(Error::GeometryViolation(format!("disk {i} leaves the open sector")));
            }
        }
        let index = SectorIndex::new(self);
        for (i, a) in self.sector_disks().iter().enumerate() {
            for &j in index.near(a.center, a.radius) {
                if j as usize != i {
                    let b = &self.disks[j as usize];
                    if (a.center - b.center).norm() < a.radius + b.radius - 1e-12 {
                        return Err(Error::GeometryViolation(format!("disks {i} and {j} overlap")));
                    }
                }
            }
        }
        let rot = C::from_polar(1.0, alpha);
        for k in 0..self.n {
            for i in 0..self.sector_len {
                let d = self.disks[k * self.sector_len + i];
                let next = self.disks[((k + 1) % self.n) * self.sector_len + i];
                if (d.center * rot - next.center).norm() > 1e-12 || d.radius != next.radius {
                    return Err(Error::GeometryViolation("rotational symmetry broken".into()));
                }
            }
        }
        Ok(())
    }
}

/// Distance from `p` to the complement of the truncated sector
/// `{0 < theta < alpha, |z| < outer}`, or a negative number outside it.
pub fn sector_clearance(p: C, alpha: f64, outer: f64) -> f64 {
    let to_ray = |dir: C, inward: C| -> f64 {
        // Signed distance to the line through 0 along `dir`, positive on the `inward` side.
        let along = p.re * dir.re + p.im * dir.im;
        let side = p.re * inward.re + p.im * inward.im;
        if along >= 0.0 {
            side
        } else {
            side.signum() * p.norm()
        }
    };
    let d0 = to_ray(C::new(1.0, 0.0), C::new(0.0, 1.0));
    let e = C::from_polar(1.0, alpha);
    let d1 = to_ray(e, e * C::new(0.0, -1.0));
    let arg = p.im.atan2(p.re);
    let inside = arg > 0.0 && arg < alpha;
    let walls = d0.min(d1);
    let c = walls.min(outer - p.norm());
    if inside {
        c
    } else {
        -c.abs().max(1e-300)
    }
}

/// Uniform bucket grid over the fundamental sector.
#[derive(Clone, Debug)]
pub struct SectorIndex {
    lo: C,
    cell: f64,
    nx: usize,
    ny: usize,
    buckets: Vec<Vec<u32>>,
}

impl SectorIndex {
    fn empty(alpha: f64, outer: f64, cell: f64) -> Self {
        let mut pts = vec![C::new(0.0, 0.0), C::new(outer, 0.0), C::from_polar(outer, alpha)];
        if alpha > PI / 2.0 {
            pts.push(C::new(0.0, outer));
        }
        let (mut lo, mut hi) = (pts[0], pts[0]);
        for p in &pts {
            lo = C::new(lo.re.min(p.re), lo.im.min(p.im));
            hi = C::new(hi.re.max(p.re), hi.im.max(p.im));
        }
        let nx = (((hi.re - lo.re) / cell).ceil() as usize).max(1);
        let ny = (((hi.im - lo.im) / cell).ceil() as usize).max(1);
        Self { lo, cell, nx, ny, buckets: vec![Vec::new(); nx * ny] }
    }

    /// Index of the fundamental-sector disks of `p`.
    pub fn new(p: &DiskPacking) -> Self {
        let mut idx = Self::empty(p.sector_angle(), p.outer_radius, default_cell(p.n));
        for (i, d) in p.sector_disks().iter().enumerate() {
            idx.insert(i as u32, d);
        }
        idx
    }

    fn range(&self, p: C, radius: f64) -> (usize, usize, usize, usize) {
        let clampx = |v: f64| (v.floor().max(0.0) as usize).min(self.nx - 1);
        let clampy = |v: f64| (v.floor().max(0.0) as usize).min(self.ny - 1);
        let x0 = clampx((p.re - radius - self.lo.re) / self.cell);
        let x1 = clampx((p.re + radius - self.lo.re) / self.cell);
        let y0 = clampy((p.im - radius - self.lo.im) / self.cell);
        let y1 = clampy((p.im + radius - self.lo.im) / self.cell);
        (x0, x1, y0, y1)
    }

    fn insert(&mut self, id: u32, d: &Disk) {
        let (x0, x1, y0, y1) = self.range(d.center, d.radius);
        for y in y0..=y1 {
            for x in x0..=x1 {
                self.buckets[y * self.nx + x].push(id);
            }
        }
    }

    /// Disks registered in the cell containing `p`.
    pub fn at(&self, p: C) -> &[u32] {
        let (x, _, y, _) = self.range(p, 0.0);
        &self.buckets[y * self.nx + x]
    }

    /// Disk ids that may intersect the disk of radius `radius` about `p`
    /// (with repetitions).
    pub fn near(&self, p: C, radius: f64) -> impl Iterator<Item = &u32> + '_ {
        let (x0, x1, y0, y1) = self.range(p, radius);
        (y0..=y1).flat_map(move |y| (x0..=x1).flat_map(move |x| self.buckets[y * self.nx + x].iter()))
    }
}

fn default_cell(n: usize) -> f64 {
    (0.02 * 8.0 / n as f64).clamp(0.002, 0.02)
}

#[derive(Clone, Copy, Debug)]
struct Cand {
    clearance: f64,
    p: C,
}

impl PartialEq for Cand {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}
impl Eq for Cand {}
impl PartialOrd for Cand {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for Cand {
    fn cmp(&self, other: &Self) -> Ordering {
        self.clearance
            .total_cmp(&other.clearance)
            .then(other.p.re.total_cmp(&self.p.re))
            .then(other.p.im.total_cmp(&self.p.im))
    }
}

struct Packer<'a> {
    alpha: f64,
    opts: &'a PackingOptions,
    disks: Vec<Disk>,
    index: SectorIndex,
}

impl Packer<'_> {
    fn clearance(&self, p: C) -> f64 {
        let mut c = sector_clearance(p, self.alpha, self.opts.outer_radius);
        if c <= 0.0 {
            return c;
        }
        for &id in self.index.near(p, c) {
            let d = &self.disks[id as usize];
            c = c.min((p - d.center).norm() - d.radius);
        }
        c
    }

    /// Pattern search for a locally larger inscribed disk.
    fn improve(&self, mut p: C, mut c: f64) -> (C, f64) {
        let mut step = 0.5 * c;
        let dirs: Vec<C> = (0..8).map(|k| C::from_polar(1.0, TAU * k as f64 / 8.0)).collect();
        let floor = 1e-3 * c;
        for _ in 0..64 {
            if step < floor {
                break;
            }
            let mut best = (p, c);
            for d in &dirs {
                let q = p + d * step;
                let cq = self.clearance(q);
                if cq > best.1 {
                    best = (q, cq);
                }
            }
            if best.1 > c {
                (p, c) = best;
            } else {
                step *= 0.5;
            }
        }
        (p, c)
    }
}

/// Greedy randomized packing of the sector `0 < theta < 2 pi / n`, `|z| <
/// outer_radius`, stopped as soon as `n sum r_j^2 >= rho_target`, then
/// replicated by the rotations `2 pi k / n`.
pub fn pack_sector(n: usize, rho_target: f64, seed: u64) -> Result<DiskPacking> {
    pack_sector_with(n, rho_target, seed, &PackingOptions::default())
}

pub fn pack_sector_with(n: usize, rho_target: f64, seed: u64, opts: &PackingOptions) -> Result<DiskPacking> {
    if n < 2 {
        return Err(Error::ParameterOutOfRange(format!("sector count n = {n} must be at least 2")));
    }
    if !(0.0..opts.rho_max).contains(&rho_target) {
        return Err(Error::ParameterOutOfRange(format!(
            "packing density {rho_target} outside the feasible range [0, {})",
            opts.rho_max
        )));
    }
    let alpha = TAU / n as f64;
    let cap = PI / n as f64;
    let mut packer = Packer { alpha, opts, disks: Vec::new(), index: SectorIndex::empty(alpha, opts.outer_radius, default_cell(n)) };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut heap = BinaryHeap::new();
    let outer = opts.outer_radius;
    let (lo, hi) = (packer.index.lo, packer.index.lo + C::new(packer.index.nx as f64, packer.index.ny as f64) * packer.index.cell);
    let mut h = (hi.re - lo.re).max(hi.im - lo.im) / 8.0;
    while h >= 1.5 * opts.r_min {
        let nx = ((hi.re - lo.re) / h).ceil() as usize;
        let ny = ((hi.im - lo.im) / h).ceil() as usize;
        for iy in 0..ny {
            for ix in 0..nx {
                let p = lo + C::new((ix as f64 + rng.random::<f64>()) * h, (iy as f64 + rng.random::<f64>()) * h);
                let c = sector_clearance(p, alpha, outer);
                if c >= opts.r_min {
                    heap.push(Cand { clearance: c, p });
                }
            }
        }
        h *= 0.5;
    }

    let mut sum_r2 = 0.0;
    let density = |s: f64| n as f64 * s;
    while density(sum_r2) < rho_target {
        let Some(top) = heap.pop() else {
            return Err(Error::PackingTimeout { reached: density(sum_r2), target: rho_target });
        };
        let c = packer.clearance(top.p);
        if c < opts.r_min {
            continue;
        }
        if c < top.clearance * (1.0 - 1e-12) {
            heap.push(Cand { clearance: c, p: top.p });
            continue;
        }
        let (p, c) = packer.improve(top.p, c);
        let r = (c * (1.0 - 1e-9)).min(cap);
        let disk = Disk { center: p, radius: r };
        packer.index.insert(packer.disks.len() as u32, &disk);
        packer.disks.push(disk);
        sum_r2 += r * r;
        if packer.disks.len() >= opts.budget && density(sum_r2) < rho_target {
            return Err(Error::PackingTimeout { reached: density(sum_r2), target: rho_target });
        }
    }

    let sector_len = packer.disks.len();
    let mut disks = Vec::with_capacity(sector_len * n);
    for k in 0..n {
        let rot = C::from_polar(1.0, alpha * k as f64);
        disks.extend(packer.disks.iter().map(|d| Disk { center: d.center * rot, radius: d.radius }));
    }
    Ok(DiskPacking { n, disks, sector_len, density: density(sum_r2), rho_target, seed, outer_radius: outer })
}
