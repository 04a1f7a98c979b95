//! Gauss-Legendre rules: fixed, composite, adaptive, cumulative and polar.

use alloc::vec;
use alloc::vec::Vec;
#[allow(unused_imports)] // inherent float methods shadow it when std is linked
use num_traits::Float;

use crate::{Error, Result, PI, TAU};

/// Default absolute tolerance of adaptive quadrature.
pub const TOL_QUAD: f64 = 1e-9;
/// Default node budget of adaptive quadrature.
pub const NODE_BUDGET: usize = 1_000_000;

/// `m`-point Gauss-Legendre rule on `[-1, 1]`, nodes ascending.
#[derive(Clone, Debug)]
pub struct GaussLegendre {
    nodes: Vec<f64>,
    weights: Vec<f64>,
}

fn legendre(m: usize, x: f64) -> (f64, f64) {
    let (mut p0, mut p1) = (1.0, x);
    for k in 1..m {
        let k = k as f64;
        let p2 = ((2.0 * k + 1.0) * x * p1 - k * p0) / (k + 1.0);
        p0 = p1;
        p1 = p2;
    }
    let p = if m == 0 { 1.0 } else { p1 };
    let dp = m as f64 * (x * p - p0) / (x * x - 1.0);
    (p, dp)
}

impl GaussLegendre {
    pub fn new(m: usize) -> Self {
        assert!(m >= 1, "rule needs at least one node");
        let mut nodes = vec![0.0; m];
        let mut weights = vec![0.0; m];
        for i in 0..m.div_ceil(2) {
            let mut x = (PI * (i as f64 + 0.75) / (m as f64 + 0.5)).cos();
            for _ in 0..100 {
                let (p, dp) = legendre(m, x);
                let dx = p / dp;
                x -= dx;
                if dx.abs() < 1e-16 {
                    break;
                }
            }
            let (_, dp) = legendre(m, x);
            let w = 2.0 / ((1.0 - x * x) * dp * dp);
            nodes[i] = -x;
            nodes[m - 1 - i] = x;
            weights[i] = w;
            weights[m - 1 - i] = w;
        }
        if m % 2 == 1 {
            nodes[m / 2] = 0.0;
        }
        Self { nodes, weights }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    /// Nodes and weights mapped affinely onto `[a, b]`.
    pub fn mapped(&self, a: f64, b: f64) -> impl Iterator<Item = (f64, f64)> + '_ {
        let (c, h) = (0.5 * (a + b), 0.5 * (b - a));
        self.nodes
            .iter()
            .zip(&self.weights)
            .map(move |(&x, &w)| (c + h * x, h * w))
    }

    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> f64 {
        self.mapped(a, b).map(|(x, w)| w * f(x)).sum()
    }

    /// Composite rule with `panels` equal panels.
    pub fn composite(&self, a: f64, b: f64, panels: usize, mut f: impl FnMut(f64) -> f64) -> f64 {
        let h = (b - a) / panels as f64;
        (0..panels)
            .map(|p| {
                let lo = a + h * p as f64;
                self.integrate(lo, lo + h, &mut f)
            })
            .sum()
    }
}

/// Adaptive bisection driven by the difference between a panel estimate and
/// the sum of its two halves.
#[derive(Clone, Debug)]
pub struct Adaptive {
    rule: GaussLegendre,
    pub tol: f64,
    pub budget: usize,
}

impl Default for Adaptive {
    fn default() -> Self {
        Self::new(TOL_QUAD, NODE_BUDGET)
    }
}

impl Adaptive {
    pub fn new(tol: f64, budget: usize) -> Self {
        Self { rule: GaussLegendre::new(10), tol, budget }
    }

    pub fn integrate(&self, a: f64, b: f64, mut f: impl FnMut(f64) -> f64) -> Result<f64> {
        if a == b {
            return Ok(0.0);
        }
        let (lo, hi, sign) = if a < b { (a, b, 1.0) } else { (b, a, -1.0) };
        let span = hi - lo;
        let mut used = self.rule.len();
        let mut stack = vec![(lo, hi, self.rule.integrate(lo, hi, &mut f))];
        let mut total = 0.0;
        while let Some((x0, x1, whole)) = stack.pop() {
            let mid = 0.5 * (x0 + x1);
            let left = self.rule.integrate(x0, mid, &mut f);
            let right = self.rule.integrate(mid, x1, &mut f);
            used += 2 * self.rule.len();
            let halves = left + right;
            let share = self.tol * (x1 - x0) / span;
            if (halves - whole).abs() <= share.max(1e-15 * halves.abs()) || (x1 - x0) < 1e-13 * span {
                total += halves;
                continue;
            }
            if used > self.budget {
                return Err(Error::QuadratureNonconvergence { budget: self.budget });
            }
            stack.push((x0, mid, left));
            stack.push((mid, x1, right));
        }
        Ok(sign * total)
    }
}

/// Gauss-Legendre rule augmented with the tail integrals of its Lagrange
/// basis, so cumulative integrals are available at every node.
#[derive(Clone, Debug)]
pub struct CumulativeGauss {
    rule: GaussLegendre,
    /// `tail[k * m + j]` is the integral of the `j`-th basis polynomial over `[x_k, 1]`.
    tail: Vec<f64>,
}

impl CumulativeGauss {
    pub fn new(m: usize) -> Self {
        let rule = GaussLegendre::new(m);
        let x = rule.nodes().to_vec();
        let lagrange = |j: usize, t: f64| -> f64 {
            x.iter()
                .enumerate()
                .filter(|&(i, _)| i != j)
                .map(|(_, &xi)| (t - xi) / (x[j] - xi))
                .product()
        };
        let mut tail = vec![0.0; m * m];
        for k in 0..m {
            for j in 0..m {
                tail[k * m + j] = rule.integrate(x[k], 1.0, |t| lagrange(j, t));
            }
        }
        Self { rule, tail }
    }

    pub fn rule(&self) -> &GaussLegendre {
        &self.rule
    }

    /// Given samples of `g` at the nodes mapped onto `[a, b]`, returns the
    /// integrals of `g` over `[x_k, b]` for every mapped node `x_k`, and the
    /// integral over the whole panel.
    pub fn tails(&self, a: f64, b: f64, values: &[f64]) -> (Vec<f64>, f64) {
        let m = self.rule.len();
        debug_assert_eq!(values.len(), m);
        let h = 0.5 * (b - a);
        let tails = (0..m)
            .map(|k| h * (0..m).map(|j| self.tail[k * m + j] * values[j]).sum::<f64>())
            .collect();
        let whole = h * self.rule.weights().iter().zip(values).map(|(w, v)| w * v).sum::<f64>();
        (tails, whole)
    }
}

/// Tensor rule on `[0,1] x [0,2pi]` in polar coordinates: Gauss-Legendre
/// panels in `r`, Gauss-Legendre panels in `theta`. The caller supplies the
/// full integrand including any density `F(r, theta)`.
#[derive(Clone, Debug)]
pub struct PolarRule {
    rule: GaussLegendre,
    pub r_panels: usize,
    pub theta_panels: usize,
}

impl Default for PolarRule {
    /// 128 x 256 nodes.
    fn default() -> Self {
        Self::new(16, 32, 8)
    }
}

impl PolarRule {
    pub fn new(r_panels: usize, theta_panels: usize, order: usize) -> Self {
        Self { rule: GaussLegendre::new(order), r_panels, theta_panels }
    }

    /// Same order, half the panels in each direction.
    pub fn coarser(&self) -> Self {
        Self {
            rule: self.rule.clone(),
            r_panels: (self.r_panels / 2).max(1),
            theta_panels: (self.theta_panels / 2).max(1),
        }
    }

    /// All `(r, theta, weight)` nodes.
    pub fn nodes(&self) -> Vec<(f64, f64, f64)> {
        let mut out = Vec::with_capacity(self.rule.len().pow(2) * self.r_panels * self.theta_panels);
        let hr = 1.0 / self.r_panels as f64;
        let ht = TAU / self.theta_panels as f64;
        for pr in 0..self.r_panels {
            let r0 = hr * pr as f64;
            for (r, wr) in self.rule.mapped(r0, r0 + hr) {
                for pt in 0..self.theta_panels {
                    let t0 = ht * pt as f64;
                    for (t, wt) in self.rule.mapped(t0, t0 + ht) {
                        out.push((r, t, wr * wt));
                    }
                }
            }
        }
        out
    }

    pub fn integrate(&self, mut f: impl FnMut(f64, f64) -> f64) -> f64 {
        let hr = 1.0 / self.r_panels as f64;
        let ht = TAU / self.theta_panels as f64;
        let mut total = 0.0;
        for pr in 0..self.r_panels {
            let r0 = hr * pr as f64;
            for (r, wr) in self.rule.mapped(r0, r0 + hr) {
                let mut inner = 0.0;
                for pt in 0..self.theta_panels {
                    let t0 = ht * pt as f64;
                    inner += self.rule.integrate(t0, t0 + ht, |t| f(r, t));
                }
                total += wr * inner;
            }
        }
        total
    }

    /// Value at this resolution and the gap to the coarser resolution.
    pub fn integrate_with_estimate(&self, mut f: impl FnMut(f64, f64) -> f64) -> (f64, f64) {
        let fine = self.integrate(&mut f);
        let coarse = self.coarser().integrate(&mut f);
        (fine, (fine - coarse).abs())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn gauss_weights_sum_to_two_and_nodes_are_symmetric() {
        for m in 1..30 {
            let g = GaussLegendre::new(m);
            let s: f64 = g.weights().iter().sum();
            assert!((s - 2.0).abs() < 1e-13, "m={m} sum={s}");
            for i in 0..m {
                assert!((g.nodes()[i] + g.nodes()[m - 1 - i]).abs() < 1e-14);
            }
            assert!(g.nodes().windows(2).all(|w| w[0] < w[1]));
        }
    }

    #[test]
    fn gauss_is_exact_to_degree_2m_minus_1() {
        let g = GaussLegendre::new(6);
        for d in 0..12 {
            let exact = (2.0f64.powi(d + 1) - 0.0) / (d + 1) as f64;
            let got = g.integrate(0.0, 2.0, |x| x.powi(d));
            assert!((got - exact).abs() < 1e-12 * exact.max(1.0), "degree {d}");
        }
    }

    #[test]
    fn adaptive_handles_endpoint_vanishing_and_reversal() {
        let q = Adaptive::default();
        let v = q.integrate(0.0, 1.0, |x| (1.0 - x).powi(3) * x.sqrt()).unwrap();
        // Beta(3/2, 4) = Gamma(3/2) Gamma(4) / Gamma(11/2)
        let exact = 32.0 / 315.0;
        assert!((v - exact).abs() < 1e-9);
        let w = q.integrate(1.0, 0.0, |x| x * x).unwrap();
        assert!((w + 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn adaptive_reports_budget_exhaustion() {
        let q = Adaptive::new(1e-14, 200);
        let r = q.integrate(0.0, 1.0, |x| (50.0 * x).sin().abs());
        assert!(matches!(r, Err(Error::QuadratureNonconvergence { .. })));
    }

    #[test]
    fn cumulative_tails_match_antiderivative() {
        let cg = CumulativeGauss::new(8);
        let (a, b) = (0.3, 1.1);
        let vals: Vec<f64> = cg.rule().mapped(a, b).map(|(x, _)| x.cos()).collect();
        let (tails, whole) = cg.tails(a, b, &vals);
        assert!((whole - (b.sin() - a.sin())).abs() < 1e-12);
        for ((x, _), t) in cg.rule().mapped(a, b).zip(&tails) {
            assert!((t - (b.sin() - x.sin())).abs() < 1e-11);
        }
    }

    #[test]
    fn polar_rule_integrates_disk_area_and_moments() {
        let p = PolarRule::default();
        let area = p.integrate(|r, _| r);
        assert!((area - PI).abs() < 1e-13);
        let second = p.integrate(|r, t| r * (r * t.cos()).powi(2));
        assert!((second - PI / 4.0).abs() < 1e-13);
        let (v, e) = p.integrate_with_estimate(|r, _| r * r * r);
        assert!((v - PI / 2.0).abs() < 1e-13 && e < 1e-12);
        assert_eq!(p.nodes().len(), 128 * 256);
    }
}
