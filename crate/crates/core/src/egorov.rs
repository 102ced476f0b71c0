//! Semiclassical pseudo-differential operators in explicit charts of S^n and
//! their covariant symbols on the coherent family.
//!
//! Chart c ∈ {1, …, 2n-1} has coordinates b = (θ, v₃, …, v_{2n}) on
//! 𝔄 = {-π < θ < π, |v|² < 1 - 1/(8(n-1))} and inverse
//! κ_c⁻¹(b) = R_c (r cos θ, r sin θ, v), r = (1 - |v|²)^{1/2}, with R₁ = I.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::berezin::{resolution_floor, validate_grid, ExpansionReport, SymbolFunction};
use crate::coherent_family::{kernel_t, CoherentFamily, Params};
use crate::error::{Error, Result};
use crate::fd;
use crate::fit::AsymptoticFit;
use crate::quad::gauss_legendre;
use crate::specfun::{ln_gamma, SeriesControl};
use crate::sphere_geom::{angles_to_omega, norm, AngleVector, sample_uniform, sphere_normalization, upsilon, upsilon_inv, SpecialUnitary};

/// A coefficient function of the base point b.
pub type BaseFn = Arc<dyn Fn(&[f64]) -> Complex64 + Send + Sync>;

/// ρ² = 1 - 1/(8(n-1)).
pub fn v_radius_sq(n: usize) -> f64 {
    1.0 - 1.0 / (8.0 * (n as f64 - 1.0))
}

/// First and second derivatives of κ_c⁻¹ at a chart point.
#[derive(Debug, Clone, PartialEq)]
pub struct ChartDerivatives {
    pub y: Vec<f64>,
    /// first[i] = ∂y/∂b_i.
    pub first: Vec<Vec<f64>>,
    /// second[i][j] = ∂²y/∂b_i∂b_j.
    pub second: Vec<Vec<Vec<f64>>>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Chart {
    n: usize,
    index: usize,
}

impl Chart {
    pub fn new(n: usize, index: usize) -> Result<Self> {
        if n < 2 {
            return Err(Error::Domain(format!("charts need n >= 2, got {n}")));
        }
        if index == 0 || index > 2 * n - 1 {
            return Err(Error::Domain(format!("chart index {index} outside 1..={}", 2 * n - 1)));
        }
        Ok(Self { n, index })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn index(&self) -> usize {
        self.index
    }

    pub fn dim(&self) -> usize {
        2 * self.n - 1
    }

    /// y ↦ R_c y. R_c is an involution.
    pub fn rotate(&self, y: &mut [f64]) {
        if self.index >= 2 {
            y[0] = -y[0];
            y.swap(1, self.index);
        }
    }

    /// R_c as a dense matrix, rows first.
    pub fn rotation_matrix(&self) -> Vec<Vec<f64>> {
        let d = 2 * self.n;
        (0..d)
            .map(|i| {
                (0..d)
                    .map(|j| {
                        let mut e = vec![0.0; d];
                        e[j] = 1.0;
                        self.rotate(&mut e);
                        e[i]
                    })
                    .collect()
            })
            .collect()
    }

    pub fn in_domain(&self, b: &[f64]) -> bool {
        b.len() == self.dim() && b[0].abs() < PI && b[1..].iter().map(|v| v * v).sum::<f64>() < v_radius_sq(self.n)
    }

    /// Bounding box of 𝔄.
    pub fn domain_box(&self) -> Vec<(f64, f64)> {
        let rho = v_radius_sq(self.n).sqrt();
        let mut out = vec![(-PI, PI)];
        out.extend(std::iter::repeat((-rho, rho)).take(self.dim() - 1));
        out
    }

    /// κ_c⁻¹(b) ∈ S^{2n-1}, defined on the closed ball |v| ≤ 1.
    pub fn inverse(&self, b: &[f64]) -> Vec<f64> {
        let v2: f64 = b[1..].iter().map(|v| v * v).sum();
        let r = (1.0 - v2).max(0.0).sqrt();
        let mut y = Vec::with_capacity(2 * self.n);
        y.push(r * b[0].cos());
        y.push(r * b[0].sin());
        y.extend_from_slice(&b[1..]);
        self.rotate(&mut y);
        y
    }

    /// Chart coordinates of y when y ∈ U_c.
    pub fn forward(&self, y: &[f64]) -> Option<Vec<f64>> {
        let mut w = y.to_vec();
        self.rotate(&mut w);
        if w[0] == 0.0 && w[1] == 0.0 {
            return None;
        }
        let mut b = vec![w[1].atan2(w[0])];
        b.extend_from_slice(&w[2..]);
        self.in_domain(&b).then_some(b)
    }

    pub fn inverse_derivatives(&self, b: &[f64]) -> ChartDerivatives {
        let d = self.dim();
        let amb = 2 * self.n;
        let v = &b[1..];
        let r = (1.0 - v.iter().map(|t| t * t).sum::<f64>()).sqrt();
        let (s, c) = b[0].sin_cos();
        let mut first = vec![vec![0.0; amb]; d];
        let mut second = vec![vec![vec![0.0; amb]; d]; d];
        first[0][0] = -r * s;
        first[0][1] = r * c;
        second[0][0][0] = -r * c;
        second[0][0][1] = -r * s;
        for q in 0..d - 1 {
            let rq = -v[q] / r;
            first[q + 1][0] = rq * c;
            first[q + 1][1] = rq * s;
            first[q + 1][q + 2] = 1.0;
            second[0][q + 1][0] = -rq * s;
            second[0][q + 1][1] = rq * c;
            second[q + 1][0] = second[0][q + 1].clone();
            for p in 0..d - 1 {
                let delta = if p == q { 1.0 } else { 0.0 };
                let rqp = -delta / r - v[q] * v[p] / (r * r * r);
                second[q + 1][p + 1][0] = rqp * c;
                second[q + 1][p + 1][1] = rqp * s;
            }
        }
        for row in first.iter_mut() {
            self.rotate(row);
        }
        for row in second.iter_mut() {
            for col in row.iter_mut() {
                self.rotate(col);
            }
        }
        ChartDerivatives { y: self.inverse(b), first, second }
    }
}

/// The 2n-1 charts covering S^n.
pub fn charts_build(n: usize) -> Result<Vec<Chart>> {
    (1..2 * n).map(|c| Chart::new(n, c)).collect()
}

/// (θ, v) ∈ (-π, π] × R^{2n-2} with y = (r cos θ, r sin θ, v).
fn full_coordinates(y: &[f64]) -> (f64, Vec<f64>, f64) {
    let r = y[0].hypot(y[1]);
    let mut theta = y[1].atan2(y[0]);
    if theta == -PI {
        theta = PI;
    }
    (theta, y[2..].to_vec(), r)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CoverCase {
    Chart1,
    /// 1 - 1/(8(n-1)) ≤ |v|² ≤ 1.
    LargeV,
    /// θ = π with |v|² below the bound.
    Cut,
}

/// The constructive reassignment of a point outside U₁: the chart index and
/// its coordinates there.
pub fn reassign(n: usize, y: &[f64]) -> Result<(usize, Vec<f64>, CoverCase)> {
    let chart1 = Chart::new(n, 1)?;
    if let Some(b) = chart1.forward(y) {
        return Ok((1, b, CoverCase::Chart1));
    }
    let (theta, v, r) = full_coordinates(y);
    let v2: f64 = v.iter().map(|t| t * t).sum();
    let case = if v2 >= v_radius_sq(n) { CoverCase::LargeV } else { CoverCase::Cut };
    let (j, _) = v
        .iter()
        .enumerate()
        .fold((0, -1.0), |(bj, bv), (i, t)| if t.abs() > bv { (i, t.abs()) } else { (bj, bv) });
    let mut vt = v.clone();
    vt[j] = r * theta.sin();
    let rt = (1.0 - vt.iter().map(|t| t * t).sum::<f64>()).max(0.0).sqrt();
    let cos_t = match case {
        CoverCase::LargeV => -r * theta.cos() / rt,
        _ => r / rt,
    };
    let theta_t = (v[j] / rt).atan2(cos_t);
    let mut b = vec![theta_t];
    b.extend(vt);
    // v_j sits at ambient position j + 2 (0-based), the slot chart j + 2 swaps in.
    Ok((j + 2, b, case))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoverReport {
    pub n: usize,
    pub samples: usize,
    pub in_chart1: usize,
    pub large_v: usize,
    pub cut: usize,
    pub uncovered: Vec<Vec<f64>>,
    /// max over samples of min over charts of max(|θ|/π, |v|²/ρ²).
    pub worst_depth: f64,
}

impl CoverReport {
    pub fn passed(&self) -> bool {
        self.uncovered.is_empty()
    }
}

/// max(|θ|/π, |v|²/ρ²), below 1 exactly on the chart domain.
pub fn chart_depth(chart: &Chart, b: &[f64]) -> f64 {
    let v2: f64 = b[1..].iter().map(|v| v * v).sum();
    (b[0].abs() / PI).max(v2 / v_radius_sq(chart.n()))
}

/// Samples S^n uniformly and confirms that the reassignment lands every point
/// outside U₁ in another chart.
pub fn chart_cover_check(n: usize, samples: usize, seed: u64) -> Result<CoverReport> {
    let charts = charts_build(n)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut report = CoverReport { n, samples, in_chart1: 0, large_v: 0, cut: 0, uncovered: Vec::new(), worst_depth: 0.0 };
    for _ in 0..samples {
        let y = sample_uniform(n, &mut rng).y;
        let (c, b, case) = reassign(n, &y)?;
        let chart = charts[c - 1];
        let back = chart.inverse(&b);
        let err = back.iter().zip(&y).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        if !chart.in_domain(&b) || err > 1e-12 {
            report.uncovered.push(y.clone());
            continue;
        }
        match case {
            CoverCase::Chart1 => report.in_chart1 += 1,
            CoverCase::LargeV => report.large_v += 1,
            CoverCase::Cut => report.cut += 1,
        }
        let depth = charts
            .iter()
            .filter_map(|ch| ch.forward(&y).map(|bb| chart_depth(ch, &bb)))
            .fold(f64::INFINITY, f64::min);
        report.worst_depth = report.worst_depth.max(depth);
    }
    Ok(report)
}

/// A C^∞ function of s equal to 1 on [0, plateau] and 0 on [support, ∞).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BumpProfile {
    pub plateau: f64,
    pub support: f64,
}

impl BumpProfile {
    pub fn eval(&self, s: f64) -> f64 {
        if s <= self.plateau {
            return 1.0;
        }
        if s >= self.support {
            return 0.0;
        }
        let u = (s - self.plateau) / (self.support - self.plateau);
        let a = (-1.0 / (1.0 - u)).exp();
        let b = (-1.0 / u).exp();
        a / (a + b)
    }
}

/// The partition of unity {𝔱_c} and the cutoffs {ϱ_c}, both built from
/// h(|θ|/π)·h(|v|²/ρ²) in each chart.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub n: usize,
    pub bump: BumpProfile,
    pub cutoff: BumpProfile,
}

impl Partition {
    pub fn for_dim(n: usize) -> Self {
        if n <= 2 {
            Self { n, bump: BumpProfile { plateau: 0.6, support: 0.8 }, cutoff: BumpProfile { plateau: 0.8, support: 0.95 } }
        } else {
            Self { n, bump: BumpProfile { plateau: 0.6, support: 0.88 }, cutoff: BumpProfile { plateau: 0.88, support: 0.97 } }
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = |p: &BumpProfile| 0.0 < p.plateau && p.plateau < p.support && p.support < 1.0;
        if !ok(&self.bump) || !ok(&self.cutoff) {
            return Err(Error::Domain("bump profiles need 0 < plateau < support < 1".into()));
        }
        if self.cutoff.plateau < self.bump.support {
            return Err(Error::Domain("cutoff plateau must contain the partition support".into()));
        }
        Ok(())
    }

    fn weight(profile: &BumpProfile, chart: &Chart, b: &[f64]) -> f64 {
        let v2: f64 = b[1..].iter().map(|v| v * v).sum();
        profile.eval(b[0].abs() / PI) * profile.eval(v2 / v_radius_sq(chart.n()))
    }

    /// Unnormalized weight β_c at chart coordinates b.
    pub fn beta(&self, chart: &Chart, b: &[f64]) -> f64 {
        Self::weight(&self.bump, chart, b)
    }

    /// ϱ_c at chart coordinates b.
    pub fn rho(&self, chart: &Chart, b: &[f64]) -> f64 {
        Self::weight(&self.cutoff, chart, b)
    }

    /// 𝔱_c(y) = β_c/Σβ at a point y of S^{2n-1}.
    pub fn t_at(&self, charts: &[Chart], c: usize, y: &[f64]) -> f64 {
        let mut total = 0.0;
        let mut own = 0.0;
        for (i, ch) in charts.iter().enumerate() {
            if let Some(b) = ch.forward(y) {
                let w = self.beta(ch, &b);
                total += w;
                if i == c {
                    own = w;
                }
            }
        }
        if total > 0.0 {
            own / total
        } else {
            0.0
        }
    }
}

/// ξ^α · a_α(b).
#[derive(Clone)]
pub struct MomentumTerm {
    pub alpha: Vec<usize>,
    pub coeff: BaseFn,
}

impl fmt::Debug for MomentumTerm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "MomentumTerm({:?})", self.alpha)
    }
}

impl MomentumTerm {
    pub fn new<F>(alpha: Vec<usize>, coeff: F) -> Self
    where
        F: Fn(&[f64]) -> Complex64 + Send + Sync + 'static,
    {
        Self { alpha, coeff: Arc::new(coeff) }
    }

    fn degree(&self) -> usize {
        self.alpha.iter().sum()
    }

    fn eval(&self, b: &[f64], xi: &[f64]) -> Complex64 {
        let mono: f64 = self.alpha.iter().zip(xi).map(|(&a, x)| x.powi(a as i32)).product();
        (self.coeff)(b) * mono
    }
}

/// A classical symbol a = a⁽⁰⁾ + ħa⁽¹⁾, polynomial in the momentum.
#[derive(Debug, Clone)]
pub struct SymbolA {
    dim: usize,
    order: f64,
    principal: Vec<MomentumTerm>,
    correction: Vec<MomentumTerm>,
}

fn unit(dim: usize, j: usize, k: usize) -> Vec<usize> {
    let mut a = vec![0; dim];
    a[j] = k;
    a
}

impl SymbolA {
    pub fn new(dim: usize, principal: Vec<MomentumTerm>, correction: Vec<MomentumTerm>) -> Result<Self> {
        if principal.is_empty() {
            return Err(Error::Domain("principal part must be nonzero".into()));
        }
        if principal.iter().chain(&correction).any(|t| t.alpha.len() != dim) {
            return Err(Error::Domain(format!("momentum multi-indices must have length {dim}")));
        }
        let order = principal.iter().chain(&correction).map(|t| t.degree()).max().unwrap_or(0) as f64;
        let out = Self { dim, order, principal, correction };
        if out.principal_vanishes() {
            return Err(Error::Domain("principal symbol vanishes on the test lattice".into()));
        }
        Ok(out)
    }

    pub fn constant(dim: usize, c: f64) -> Self {
        Self::new(dim, vec![MomentumTerm::new(vec![0; dim], move |_| Complex64::new(c, 0.0))], vec![]).expect("nonzero constant")
    }

    /// a(b, ξ) = f(b).
    pub fn base<F>(dim: usize, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> Complex64 + Send + Sync + 'static,
    {
        Self::new(dim, vec![MomentumTerm::new(vec![0; dim], f)], vec![])
    }

    /// a(b, ξ) = f(b) ξ_j^k.
    pub fn base_times_momentum<F>(dim: usize, f: F, j: usize, k: usize) -> Result<Self>
    where
        F: Fn(&[f64]) -> Complex64 + Send + Sync + 'static,
    {
        Self::new(dim, vec![MomentumTerm::new(unit(dim, j, k), f)], vec![])
    }

    /// a(b, ξ) = ξ_j^k.
    pub fn momentum(dim: usize, j: usize, k: usize) -> Self {
        Self::base_times_momentum(dim, |_| Complex64::new(1.0, 0.0), j, k).expect("nonzero monomial")
    }

    pub fn with_correction(mut self, correction: Vec<MomentumTerm>) -> Result<Self> {
        if correction.iter().any(|t| t.alpha.len() != self.dim) {
            return Err(Error::Domain(format!("momentum multi-indices must have length {}", self.dim)));
        }
        self.order = self.order.max(correction.iter().map(|t| t.degree()).max().unwrap_or(0) as f64);
        self.correction = correction;
        Ok(self)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// The order m in ⟨ξ⟩^m.
    pub fn order(&self) -> f64 {
        self.order
    }

    pub fn max_degree(&self) -> usize {
        self.principal.iter().chain(&self.correction).map(|t| t.degree()).max().unwrap_or(0)
    }

    pub fn principal_eval(&self, b: &[f64], xi: &[f64]) -> Complex64 {
        self.principal.iter().map(|t| t.eval(b, xi)).sum()
    }

    pub fn eval(&self, b: &[f64], xi: &[f64], hbar: f64) -> Complex64 {
        self.principal_eval(b, xi) + self.correction.iter().map(|t| t.eval(b, xi)).sum::<Complex64>() * hbar
    }

    /// Terms with their ħ power.
    fn terms(&self) -> impl Iterator<Item = (&MomentumTerm, i32)> {
        self.principal.iter().map(|t| (t, 0)).chain(self.correction.iter().map(|t| (t, 1)))
    }

    fn lattice(&self) -> Vec<Vec<f64>> {
        let pts = [-0.5, 0.0, 0.5];
        let mut out = vec![vec![]];
        for _ in 0..self.dim {
            out = out.into_iter().flat_map(|p| pts.iter().map(move |&x| [p.clone(), vec![x]].concat())).collect();
        }
        out
    }

    fn principal_vanishes(&self) -> bool {
        let xi: Vec<f64> = (0..self.dim).map(|j| 0.7 + 0.1 * j as f64).collect();
        self.lattice().iter().all(|b| self.principal_eval(b, &xi).norm() == 0.0)
    }

    /// sup |∂_b^β a|/⟨ξ⟩^m for |β| ≤ 1 on momentum shells of radius 1, 10,
    /// 100 and 1000 over a base lattice.
    pub fn bound_profile(&self, hbar: f64) -> Vec<f64> {
        let lattice = self.lattice();
        [1.0, 10.0, 100.0, 1000.0]
            .iter()
            .map(|&rad| {
                let mut sup: f64 = 0.0;
                for dir in 0..self.dim {
                    for sign in [-1.0, 1.0] {
                        let mut xi = vec![0.3 * rad / (self.dim as f64).sqrt(); self.dim];
                        xi[dir] = sign * rad;
                        let weight = (1.0 + xi.iter().map(|x| x * x).sum::<f64>()).powf(-0.5 * self.order);
                        for b in &lattice {
                            let f = |bb: &[f64]| self.eval(bb, &xi, hbar);
                            sup = sup.max(f(b).norm() * weight);
                            for g in fd::gradient(&f, b, fd::DEFAULT_STEP) {
                                sup = sup.max(g.norm() * weight);
                            }
                        }
                    }
                }
                sup
            })
            .collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ApplyMethod {
    /// ξ^α ↦ (-iħ∂)^α, exact for symbols polynomial in the momentum.
    Analytic,
    /// The regularized double integral by tensor quadrature.
    Oscillatory,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PDOApplySpec {
    pub hbar: f64,
    /// a_t(b, c, ξ) = a((1-t)b + tc, ξ).
    pub t: f64,
    /// Power of L(ξ, ħD) = (1 + ħξ·D)/(1 + |ξ|²).
    pub k: usize,
    pub momentum_cutoff: f64,
    pub method: ApplyMethod,
    /// Gauss nodes per axis for the position integral.
    pub c_nodes: usize,
    /// Bound on the momentum tail beyond the cutoff.
    pub tol: f64,
    /// Cap on the multiply-adds of the oscillatory path.
    pub budget: f64,
}

impl PDOApplySpec {
    pub fn new(hbar: f64, t: f64, k: usize) -> Self {
        Self {
            hbar,
            t,
            k,
            momentum_cutoff: 40.0 / hbar.sqrt(),
            method: ApplyMethod::Analytic,
            c_nodes: 48,
            tol: 1e-3,
            budget: 2e8,
        }
    }

    pub fn oscillatory(self) -> Self {
        Self { method: ApplyMethod::Oscillatory, ..self }
    }

    /// Admissibility k > m + dimension, t ∈ [0, 1], ħ > 0.
    pub fn validate(&self, a: &SymbolA) -> Result<()> {
        if !(self.hbar > 0.0) {
            return Err(Error::Domain("hbar must be positive".into()));
        }
        if !(0.0..=1.0).contains(&self.t) {
            return Err(Error::Domain(format!("t = {} outside [0, 1]", self.t)));
        }
        if !(self.k as f64 > a.order() + a.dim() as f64) {
            return Err(Error::Domain(format!("k = {} must exceed m + dim = {}", self.k, a.order() + a.dim() as f64)));
        }
        if !(self.momentum_cutoff > 0.0) || self.c_nodes < 2 {
            return Err(Error::Domain("momentum_cutoff and c_nodes must be positive".into()));
        }
        Ok(())
    }
}

/// Composite Gauss–Legendre rule on [lo, hi].
fn composite_gl(lo: f64, hi: f64, panels: usize, per_panel: usize) -> (Vec<f64>, Vec<f64>) {
    let (x, w) = gauss_legendre(per_panel);
    let h = (hi - lo) / panels as f64;
    let mut nodes = Vec::with_capacity(panels * per_panel);
    let mut weights = Vec::with_capacity(panels * per_panel);
    for p in 0..panels {
        let a = lo + p as f64 * h;
        for (xi, wi) in x.iter().zip(&w) {
            nodes.push(a + 0.5 * h * (xi + 1.0));
            weights.push(0.5 * h * wi);
        }
    }
    (nodes, weights)
}

fn axis_rule(lo: f64, hi: f64, nodes: usize) -> (Vec<f64>, Vec<f64>) {
    let panels = (nodes / 16).max(1);
    composite_gl(lo, hi, panels, nodes.div_ceil(panels))
}

/// Composite Gauss-Legendre on consecutive intervals, `counts[i]` nodes on
/// the i-th interval split into panels of at most 16.
fn breakpoint_rule(breaks: &[f64], counts: &[usize]) -> (Vec<f64>, Vec<f64>) {
    let mut x = Vec::new();
    let mut w = Vec::new();
    for (pair, &m) in breaks.windows(2).zip(counts) {
        let (a, b) = axis_rule(pair[0], pair[1], m.max(8));
        x.extend(a);
        w.extend(b);
    }
    (x, w)
}

/// Points and weights for ∫ over the ball |v| < outer in R^m, polar in v
/// with a radial breakpoint at `inner`.
fn ball_rule(m: usize, inner: f64, outer: f64, nodes: usize) -> (Vec<Vec<f64>>, Vec<f64>) {
    let (r, wr) = breakpoint_rule(&[0.0, inner, outer], &[nodes / 2, nodes / 2]);
    let mut dirs: Vec<(Vec<f64>, f64)> = Vec::new();
    if m == 1 {
        dirs.push((vec![1.0], 1.0));
        dirs.push((vec![-1.0], 1.0));
    } else {
        let na = nodes;
        let circle: Vec<(f64, f64)> = (0..na).map(|i| (-PI + 2.0 * PI * (i as f64 + 0.5) / na as f64, 2.0 * PI / na as f64)).collect();
        let polar = composite_gl(0.0, PI, (nodes / 32).max(1), (nodes / 2).max(8).div_ceil((nodes / 32).max(1)));
        let mut idx = vec![0usize; m - 1];
        loop {
            let mut ang = vec![circle[idx[0]].0];
            let mut wt = circle[idx[0]].1;
            for (j, &i) in idx.iter().enumerate().skip(1) {
                ang.push(polar.0[i]);
                wt *= polar.1[i] * polar.0[i].sin().powi(j as i32);
            }
            dirs.push((angles_to_omega(&AngleVector(ang)), wt));
            let mut j = 0;
            loop {
                if j == idx.len() {
                    let mut pts = Vec::with_capacity(r.len() * dirs.len());
                    let mut wts = Vec::with_capacity(r.len() * dirs.len());
                    for (ri, wri) in r.iter().zip(&wr) {
                        for (u, wu) in &dirs {
                            pts.push(u.iter().map(|c| c * ri).collect());
                            wts.push(wri * wu * ri.powi(m as i32 - 1));
                        }
                    }
                    return (pts, wts);
                }
                idx[j] += 1;
                let len = if j == 0 { circle.len() } else { polar.0.len() };
                if idx[j] < len {
                    break;
                }
                idx[j] = 0;
                j += 1;
            }
        }
    }
    let mut pts = Vec::new();
    let mut wts = Vec::new();
    for (ri, wri) in r.iter().zip(&wr) {
        for (u, wu) in &dirs {
            pts.push(u.iter().map(|c| c * ri).collect());
            wts.push(wri * wu);
        }
    }
    (pts, wts)
}

/// Op_ħ^t(a)f(b) with the chosen method; f is extended by zero outside 𝔄.
pub fn pdo_apply<F>(a: &SymbolA, spec: &PDOApplySpec, chart: &Chart, f: &F, b: &[f64]) -> Result<Complex64>
where
    F: Fn(&[f64]) -> Complex64 + Sync,
{
    if a.dim() != chart.dim() {
        return Err(Error::Domain(format!("symbol dimension {} differs from chart dimension {}", a.dim(), chart.dim())));
    }
    if !chart.in_domain(b) {
        return Err(Error::Domain("base point outside the chart domain".into()));
    }
    spec.validate(a)?;
    let ext = |c: &[f64]| if chart.in_domain(c) { f(c) } else { Complex64::new(0.0, 0.0) };
    match spec.method {
        ApplyMethod::Analytic => analytic_apply(a, spec, &ext, b),
        ApplyMethod::Oscillatory => {
            let out = oscillatory_apply(a, spec, &ext, b, &chart.domain_box())?;
            Ok(out.value)
        }
    }
}

/// Σ_α (-iħ)^{|α|} ∂_c^α[a_α((1-t)b + tc) f(c)] at c = b, by finite differences.
pub fn analytic_apply<F>(a: &SymbolA, spec: &PDOApplySpec, f: &F, b: &[f64]) -> Result<Complex64>
where
    F: Fn(&[f64]) -> Complex64 + ?Sized,
{
    let mut total = Complex64::new(0.0, 0.0);
    for (term, hp) in a.terms() {
        let g = |c: &[f64]| {
            let base: Vec<f64> = b.iter().zip(c).map(|(bi, ci)| (1.0 - spec.t) * bi + spec.t * ci).collect();
            (term.coeff)(&base) * f(c)
        };
        let s = term.degree() as i32;
        let pref = Complex64::new(0.0, -spec.hbar).powi(s) * spec.hbar.powi(hp);
        total += pref * fd::partial(&g, b, &term.alpha, fd::DEFAULT_STEP);
    }
    Ok(total)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OscillatoryValue {
    pub value: Complex64,
    /// Bound on the contribution of |ξ| > momentum_cutoff.
    pub tail_bound: f64,
    pub xi_nodes_per_axis: usize,
}

fn multi_indices(dim: usize, max_total: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let mut cur = vec![0usize; dim];
    loop {
        if cur.iter().sum::<usize>() <= max_total {
            out.push(cur.clone());
        }
        let mut k = 0;
        loop {
            if k == dim {
                return out;
            }
            cur[k] += 1;
            if cur[k] <= max_total {
                break;
            }
            cur[k] = 0;
            k += 1;
        }
    }
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|v| v as f64).product()
}

fn binomial(n: usize, k: usize) -> f64 {
    factorial(n) / (factorial(k) * factorial(n - k))
}

/// (2πħ)^{-d} ∬ e^{i(b-c)·ξ/ħ} L^k(a_t f)(c, ξ) dc dξ over the box `support`
/// in c and [-Ξ, Ξ]^d in ξ.
///
/// a_t f vanishes on the boundary of the box, so integrating L^k by parts
/// back onto the phase is exact and the c-integral is evaluated directly,
/// one axis at a time. L^k = (1+|ξ|²)^{-k} Σ_s C(k,s) ħ^s (ξ·D)^s enters
/// through the truncation bound, with sup |D^β(a_t f)| taken from finite
/// differences at the c-nodes.
pub fn oscillatory_apply<F>(a: &SymbolA, spec: &PDOApplySpec, f: &F, b: &[f64], support: &[(f64, f64)]) -> Result<OscillatoryValue>
where
    F: Fn(&[f64]) -> Complex64 + Sync + ?Sized,
{
    spec.validate(a)?;
    let d = a.dim();
    if support.len() != d || b.len() != d {
        return Err(Error::Domain("support box and base point must match the symbol dimension".into()));
    }
    let h = spec.hbar;
    let k = spec.k;
    let xi_max = spec.momentum_cutoff;
    // Panels of both rules keep the phase change per panel below 3π.
    let c_rules: Vec<(Vec<f64>, Vec<f64>)> = support
        .iter()
        .map(|&(lo, hi)| {
            let panels = ((hi - lo) * xi_max / (3.0 * PI * h)).ceil() as usize;
            composite_gl(lo, hi, panels.max(spec.c_nodes / 16).max(1), 16)
        })
        .collect();
    let bound_rules: Vec<Vec<f64>> = support.iter().map(|&(lo, hi)| axis_rule(lo, hi, spec.c_nodes).0).collect();
    let xi_rules: Vec<(Vec<f64>, Vec<f64>)> = support
        .iter()
        .zip(b)
        .map(|(&(lo, hi), &bj)| {
            let reach = (bj - lo).abs().max((hi - bj).abs()).max(1e-12);
            let width = 3.0 * PI * h / reach;
            let panels = ((2.0 * xi_max / width).ceil() as usize).max(1);
            composite_gl(-xi_max, xi_max, panels, 16)
        })
        .collect();
    let n_c = c_rules[0].0.len();
    let n_xi = xi_rules[0].0.len();
    let gammas = multi_indices(d, a.max_degree());
    let betas = multi_indices(d, k);
    let n_bound = bound_rules[0].len();
    let cost = gammas.len() as f64 * (0..d).map(|j| (n_xi as f64).powi(j as i32 + 1) * (n_c as f64).powi((d - j) as i32)).sum::<f64>()
        + (betas.len() * (2 * k + 1).pow(d as u32)) as f64 * (n_bound as f64).powi(d as i32);
    if cost > spec.budget {
        return Err(Error::Resolution(format!("oscillatory quadrature needs ~{cost:.2e} operations, budget {:.2e}", spec.budget)));
    }
    let gamma_pos = |g: &[usize]| gammas.iter().position(|x| x == g).expect("gamma in range");

    // Tensor c-grid, axis 0 fastest.
    let total_c = n_c.pow(d as u32);
    let c_point = |mut idx: usize| -> (Vec<f64>, f64) {
        let mut c = vec![0.0; d];
        let mut w = 1.0;
        for j in 0..d {
            let i = idx % n_c;
            idx /= n_c;
            c[j] = c_rules[j].0[i];
            w *= c_rules[j].1[i];
        }
        (c, w)
    };
    let terms: Vec<(&MomentumTerm, i32)> = a.terms().collect();
    let amplitude = |term: &MomentumTerm, cc: &[f64]| {
        let base: Vec<f64> = b.iter().zip(cc).map(|(bi, ci)| (1.0 - spec.t) * bi + spec.t * ci).collect();
        (term.coeff)(&base) * f(cc)
    };
    // G_α(c) = ħ^{hp} a_α(c_t) f(c).
    let rows: Vec<Vec<Complex64>> = (0..total_c)
        .into_par_iter()
        .map(|ic| {
            let (c, w) = c_point(ic);
            let mut g = vec![Complex64::new(0.0, 0.0); gammas.len()];
            for (term, hp) in &terms {
                g[gamma_pos(&term.alpha)] += amplitude(term, &c) * (h.powi(*hp) * w);
            }
            g
        })
        .collect();
    // Σ_β C(k,|β|) ħ^{|β|} (|β|!/β!) |∂^β(a_α f)| on the coarse grid.
    let bound_nodes: Vec<f64> = (0..n_bound.pow(d as u32))
        .into_par_iter()
        .map(|ic| {
            let mut idx = ic;
            let c: Vec<f64> = (0..d)
                .map(|j| {
                    let i = idx % n_bound;
                    idx /= n_bound;
                    bound_rules[j][i]
                })
                .collect();
            let mut bound = 0.0;
            for (term, hp) in &terms {
                let ha = |cc: &[f64]| amplitude(term, cc);
                for beta in &betas {
                    let s: usize = beta.iter().sum();
                    let multinom = factorial(s) / beta.iter().map(|&x| factorial(x)).product::<f64>();
                    let coef = h.powi(*hp) * binomial(k, s) * h.powi(s as i32) * multinom;
                    bound += coef * fd::partial(&ha, &c, beta, fd::DEFAULT_STEP).norm();
                }
            }
            bound
        })
        .collect();
    let sup_bound = bound_nodes.iter().copied().fold(0.0, f64::max);

    // Contract c one axis at a time: e^{i(b_j - c_j)ξ_j/ħ}.
    let phases: Vec<Vec<Complex64>> = (0..d)
        .map(|j| {
            let mut tab = Vec::with_capacity(n_xi * n_c);
            for &x in &xi_rules[j].0 {
                for &cj in &c_rules[j].0 {
                    tab.push(Complex64::from_polar(1.0, (b[j] - cj) * x / h));
                }
            }
            tab
        })
        .collect();
    // Each pass contracts the fastest c axis and appends its ξ axis as the
    // slowest, so the next c axis becomes the fastest.
    let transformed: Vec<Vec<Complex64>> = (0..gammas.len())
        .into_par_iter()
        .map(|gi| {
            let mut cur: Vec<Complex64> = rows.iter().map(|r| r[gi]).collect();
            for tab in &phases {
                let rest = cur.len() / n_c;
                let mut next = vec![Complex64::new(0.0, 0.0); rest * n_xi];
                for ix in 0..n_xi {
                    let row = &tab[ix * n_c..(ix + 1) * n_c];
                    for ir in 0..rest {
                        let col = &cur[n_c * ir..n_c * (ir + 1)];
                        next[ir + rest * ix] = row.iter().zip(col).map(|(p, v)| p * v).sum();
                    }
                }
                cur = next;
            }
            cur
        })
        .collect();
    let total_xi = n_xi.pow(d as u32);
    let sum = (0..total_xi)
        .into_par_iter()
        .map(|ix| {
            let mut idx = ix;
            let mut xi = vec![0.0; d];
            let mut w = 1.0;
            for j in 0..d {
                let i = idx % n_xi;
                idx /= n_xi;
                xi[j] = xi_rules[j].0[i];
                w *= xi_rules[j].1[i];
            }
            let poly: Complex64 = gammas
                .iter()
                .zip(&transformed)
                .map(|(g, tr)| tr[ix] * g.iter().zip(&xi).map(|(&e, x)| x.powi(e as i32)).product::<f64>())
                .sum();
            poly * w
        })
        .collect::<Vec<_>>();
    let pre = (2.0 * PI * h).powi(-(d as i32));
    let value = crate::quad::pairwise_sum(&sum) * pre;
    let vol: f64 = support.iter().map(|(lo, hi)| hi - lo).product();
    let excess = k as f64 - a.order() - d as f64;
    let sphere_area = 2.0 * PI.powf(0.5 * d as f64) / ln_gamma(0.5 * d as f64)?.exp();
    let tail_bound = pre * vol * sup_bound * sphere_area * xi_max.powf(-excess) / excess;
    if tail_bound > spec.tol {
        return Err(Error::Quadrature(format!("momentum tail bound {tail_bound:.3e} exceeds {:.1e}", spec.tol)));
    }
    Ok(OscillatoryValue { value, tail_bound, xi_nodes_per_axis: n_xi })
}

/// How the complex covector η = -iz pairs with tangent vectors of S^n ⊂ C^n.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CovectorConvention {
    /// ⟨η, v⟩ = Re Σ η_j v_j.
    Bilinear,
    /// ⟨η, v⟩ = Re Σ η_j v̄_j.
    Sesquilinear,
}

impl CovectorConvention {
    pub fn pair(&self, eta: &[Complex64], v: &[Complex64]) -> f64 {
        match self {
            Self::Bilinear => eta.iter().zip(v).map(|(e, x)| (e * x).re).sum(),
            Self::Sesquilinear => eta.iter().zip(v).map(|(e, x)| (e * x.conj()).re).sum(),
        }
    }

    /// The covector η' with ⟨η', v⟩ = ⟨η, Mv⟩.
    pub fn pullback(&self, m: &SpecialUnitary, eta: &[Complex64]) -> Vec<Complex64> {
        let rows = m.rows();
        (0..eta.len())
            .map(|k| {
                eta.iter()
                    .zip(rows)
                    .map(|(e, row)| match self {
                        Self::Bilinear => e * row[k],
                        Self::Sesquilinear => e * row[k].conj(),
                    })
                    .sum()
            })
            .collect()
    }
}

/// A = Σ_c 𝔱_c Op_ħ^t(a_c) ϱ_c, with a_c = 0 for charts that carry no symbol.
#[derive(Debug, Clone)]
pub struct AssembledOperator {
    n: usize,
    charts: Vec<Chart>,
    pub partition: Partition,
    symbols: Vec<Option<SymbolA>>,
    pub t: f64,
}

impl AssembledOperator {
    pub fn new(n: usize, symbols: Vec<Option<SymbolA>>) -> Result<Self> {
        let charts = charts_build(n)?;
        if symbols.len() != charts.len() {
            return Err(Error::Domain(format!("need {} chart symbols, got {}", charts.len(), symbols.len())));
        }
        if symbols.iter().flatten().any(|s| s.dim() != 2 * n - 1) {
            return Err(Error::Domain("chart symbols must have dimension 2n-1".into()));
        }
        let partition = Partition::for_dim(n);
        Ok(Self { n, charts, partition, symbols, t: 0.0 })
    }

    /// a_c ≡ 1 in every chart.
    pub fn identity(n: usize) -> Result<Self> {
        Self::new(n, (0..2 * n - 1).map(|_| Some(SymbolA::constant(2 * n - 1, 1.0))).collect())
    }

    /// a_c(b) = φ(κ_c⁻¹ b) in every chart, so A is multiplication by φ.
    pub fn multiplication(n: usize, phi: &SymbolFunction) -> Result<Self> {
        let charts = charts_build(n)?;
        let symbols = charts
            .iter()
            .map(|&ch| {
                let phi = phi.clone();
                SymbolA::base(2 * n - 1, move |b| phi.eval(&upsilon_inv(&ch.inverse(b)))).map(Some)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(n, symbols)
    }

    /// A single chart symbol, all other charts empty.
    pub fn in_chart(n: usize, index: usize, symbol: SymbolA) -> Result<Self> {
        let mut symbols: Vec<Option<SymbolA>> = vec![None; 2 * n - 1];
        let slot = symbols.get_mut(index.wrapping_sub(1)).ok_or_else(|| Error::Domain(format!("no chart {index}")))?;
        *slot = Some(symbol);
        Self::new(n, symbols)
    }

    pub fn with_t(self, t: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&t) {
            return Err(Error::Domain(format!("t = {t} outside [0, 1]")));
        }
        Ok(Self { t, ..self })
    }

    pub fn with_partition(self, partition: Partition) -> Result<Self> {
        partition.validate()?;
        Ok(Self { partition, ..self })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn charts(&self) -> &[Chart] {
        &self.charts
    }

    pub fn symbol(&self, index: usize) -> Option<&SymbolA> {
        self.symbols.get(index.wrapping_sub(1)).and_then(|s| s.as_ref())
    }

    /// ℘(A)(x, η) = Σ_c 𝔱_c(x) a_c⁽⁰⁾(κ_c(x), p), p_i = ⟨η, ∂_i κ_c⁻¹⟩.
    pub fn principal_symbol(&self, x: &[Complex64], eta: &[Complex64], conv: CovectorConvention) -> Result<Complex64> {
        let y = unit_image(x, self.n)?;
        let mut total = Complex64::new(0.0, 0.0);
        for (i, ch) in self.charts.iter().enumerate() {
            let (Some(sym), Some(b)) = (&self.symbols[i], ch.forward(&y)) else { continue };
            let t = self.partition.t_at(&self.charts, i, &y);
            if t == 0.0 {
                continue;
            }
            let der = ch.inverse_derivatives(&b);
            let p: Vec<f64> = der.first.iter().map(|v| conv.pair(eta, &upsilon_inv(v))).collect();
            total += sym.principal_eval(&b, &p) * t;
        }
        Ok(total)
    }
}

fn unit_image(x: &[Complex64], n: usize) -> Result<Vec<f64>> {
    if x.len() != n {
        return Err(Error::Domain(format!("point has {} components, expected {n}", x.len())));
    }
    let r = norm(x);
    if !(r > 0.0) {
        return Err(Error::Domain("point must be nonzero".into()));
    }
    Ok(upsilon(x).into_iter().map(|v| v / r).collect())
}

/// Residuals below this level count as vanishing in [`egorov_check`]; it sits
/// above the chart quadrature error of the default policy.
pub const EGOROV_QUADRATURE_FLOOR: f64 = 1e-4;

/// Nodes per chart axis for covariant-symbol quadrature.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ChartQuadPolicy {
    pub min_nodes: usize,
    pub per_root: f64,
}

impl Default for ChartQuadPolicy {
    fn default() -> Self {
        Self { min_nodes: 64, per_root: 20.0 }
    }
}

impl ChartQuadPolicy {
    pub fn nodes(&self, hbar: f64) -> usize {
        self.min_nodes.max((self.per_root / hbar.sqrt()).ceil() as usize).max(resolution_floor(hbar))
    }
}

/// Value and derivatives up to order two of a scalar function on a chart.
struct Jet2 {
    v: Complex64,
    d1: Vec<Complex64>,
    d2: Vec<Vec<Complex64>>,
}

fn real_jet<F: Fn(&[f64]) -> f64>(f: &F, b: &[f64]) -> Jet2 {
    let g = |x: &[f64]| Complex64::new(f(x), 0.0);
    Jet2 { v: g(b), d1: fd::gradient(&g, b, fd::DEFAULT_STEP), d2: fd::hessian(&g, b, fd::DEFAULT_STEP) }
}

fn term_jet(term: &MomentumTerm, b: &[f64], need: usize) -> Jet2 {
    let g = |x: &[f64]| (term.coeff)(x);
    let d = b.len();
    let zero = Complex64::new(0.0, 0.0);
    Jet2 {
        v: g(b),
        d1: if need >= 1 { fd::gradient(&g, b, fd::DEFAULT_STEP) } else { vec![zero; d] },
        d2: if need >= 2 { fd::hessian(&g, b, fd::DEFAULT_STEP) } else { vec![vec![zero; d]; d] },
    }
}

/// ⟨A K(·,z), K(·,z)⟩ / ⟨K(·,z), K(·,z)⟩ with the numerator assembled chart by
/// chart and the denominator T(z, z).
pub fn covariant_symbol_pdo(params: &Params, op: &AssembledOperator, z: &[Complex64], nodes: usize) -> Result<Complex64> {
    params.validate()?;
    if params.n != op.n {
        return Err(Error::Domain(format!("operator acts on n = {}, params have n = {}", op.n, params.n)));
    }
    let lambda = norm(z);
    if z.len() != params.n || !(lambda > 0.0) {
        return Err(Error::Domain("z must be a nonzero vector of length n".into()));
    }
    if nodes < resolution_floor(params.hbar) {
        return Err(Error::Resolution(format!("{nodes} nodes per axis < 8/sqrt(hbar) = {}", resolution_floor(params.hbar))));
    }
    if op.symbols.iter().flatten().any(|s| s.max_degree() > 2) {
        return Err(Error::Unsupported("the analytic path covers momentum degree <= 2".into()));
    }
    let h = params.hbar;
    let shift = lambda / h;
    let fam = CoherentFamily::new(*params, SeriesControl::default())?;
    let denom = kernel_t(params, z, z)? * (-2.0 * shift).exp() * sphere_normalization(params.n);
    let d = 2 * params.n - 1;
    let rho2 = v_radius_sq(params.n);
    let s = op.partition.bump.support;
    let pl = op.partition.bump.plateau;
    let theta_rule = breakpoint_rule(&[-s * PI, -pl * PI, pl * PI, s * PI], &[nodes / 3, nodes, nodes / 3]);
    let (v_points, v_weights) = ball_rule(d - 1, (pl * rho2).sqrt(), (s * rho2).sqrt(), nodes);
    let v_count = v_points.len();
    let zc: Vec<Complex64> = z.to_vec();
    let minus_ih = Complex64::new(0.0, -h);

    let chart_sums: Vec<Result<Complex64>> = (0..op.charts.len())
        .into_par_iter()
        .map(|ci| {
            let Some(sym) = &op.symbols[ci] else { return Ok(Complex64::new(0.0, 0.0)) };
            let ch = op.charts[ci];
            let parts: Vec<Result<Complex64>> = theta_rule
                .0
                .par_iter()
                .zip(&theta_rule.1)
                .map(|(&theta, &wt)| {
                    let mut acc = Vec::with_capacity(v_count);
                    let mut b = vec![0.0; d];
                    b[0] = theta;
                    for iv in 0..v_count {
                        b[1..].copy_from_slice(&v_points[iv]);
                        let w = wt * v_weights[iv];
                        let beta = op.partition.beta(&ch, &b);
                        if beta == 0.0 {
                            continue;
                        }
                        let der = ch.inverse_derivatives(&b);
                        let tc = op.partition.t_at(&op.charts, ci, &der.y);
                        // ζ = x·z̄/ħ is linear in y.
                        let lin = |y: &[f64]| upsilon_inv(y).iter().zip(&zc).map(|(a, c)| a * c.conj()).sum::<Complex64>() / h;
                        let zeta = lin(&der.y);
                        let z1: Vec<Complex64> = der.first.iter().map(|v| lin(v)).collect();
                        let z2: Vec<Vec<Complex64>> = der.second.iter().map(|row| row.iter().map(|v| lin(v)).collect()).collect();
                        let [k0, k1, k2] = fam.eval_with_derivatives(zeta, shift)?;
                        let kj = Jet2 {
                            v: k0,
                            d1: z1.iter().map(|zi| k1 * zi).collect(),
                            d2: (0..d).map(|i| (0..d).map(|j| k2 * z1[i] * z1[j] + k1 * z2[i][j]).collect()).collect(),
                        };
                        // f = ϱ_c K, with ϱ_c ≡ 1 on its plateau.
                        let f = if chart_depth(&ch, &b) < op.partition.cutoff.plateau {
                            kj
                        } else {
                            let r = real_jet(&|x: &[f64]| op.partition.rho(&ch, x), &b);
                            Jet2 {
                                v: r.v * kj.v,
                                d1: (0..d).map(|i| r.d1[i] * kj.v + r.v * kj.d1[i]).collect(),
                                d2: (0..d)
                                    .map(|i| {
                                        (0..d)
                                            .map(|j| r.d2[i][j] * kj.v + r.d1[i] * kj.d1[j] + r.d1[j] * kj.d1[i] + r.v * kj.d2[i][j])
                                            .collect()
                                    })
                                    .collect(),
                            }
                        };
                        let mut opval = Complex64::new(0.0, 0.0);
                        for (term, hp) in sym.terms() {
                            let deg = term.degree();
                            let need = if op.t == 0.0 { 0 } else { deg };
                            let a = term_jet(term, &b, need);
                            let t = op.t;
                            let idx: Vec<usize> = term.alpha.iter().enumerate().flat_map(|(i, &m)| std::iter::repeat(i).take(m)).collect();
                            let v = match idx.as_slice() {
                                [] => a.v * f.v,
                                [i] => a.d1[*i] * f.v * t + a.v * f.d1[*i],
                                [i, j] => {
                                    a.d2[*i][*j] * f.v * (t * t) + (a.d1[*i] * f.d1[*j] + a.d1[*j] * f.d1[*i]) * t + a.v * f.d2[*i][*j]
                                }
                                _ => unreachable!("degree checked above"),
                            };
                            opval += v * minus_ih.powi(deg as i32) * h.powi(hp);
                        }
                        acc.push(opval * k0.conj() * (w * tc));
                    }
                    Ok(crate::quad::pairwise_sum(&acc))
                })
                .collect();
            let parts = parts.into_iter().collect::<Result<Vec<_>>>()?;
            Ok(crate::quad::pairwise_sum(&parts))
        })
        .collect();
    let mut total = Complex64::new(0.0, 0.0);
    for c in chart_sums {
        total += c?;
    }
    Ok(total / denom)
}

/// |covariant_symbol_pdo - ℘(A)(z/|z|, -iz)| over an ħ grid.
pub fn egorov_check(
    params: &Params,
    op: &AssembledOperator,
    z: &[Complex64],
    hbar_grid: &[f64],
    policy: &ChartQuadPolicy,
    conv: CovectorConvention,
) -> Result<ExpansionReport> {
    validate_grid(hbar_grid)?;
    let lambda = norm(z);
    let x: Vec<Complex64> = z.iter().map(|c| c / lambda).collect();
    let eta: Vec<Complex64> = z.iter().map(|c| c * Complex64::new(0.0, -1.0)).collect();
    let leading = op.principal_symbol(&x, &eta, conv)?;
    let values = hbar_grid
        .iter()
        .map(|&h| covariant_symbol_pdo(&params.with_hbar(h), op, z, policy.nodes(h)))
        .collect::<Result<Vec<_>>>()?;
    let residuals: Vec<f64> = values.iter().map(|v| (v - leading).norm()).collect();
    let vanishing = residuals.iter().all(|r| *r <= EGOROV_QUADRATURE_FLOOR);
    let fitted_slope = AsymptoticFit::power_law(hbar_grid, &residuals)?.slope;
    Ok(ExpansionReport {
        grid: hbar_grid.to_vec(),
        values,
        leading,
        first_order_pred: Complex64::new(0.0, 0.0),
        residuals,
        fitted_slope,
        fitted_constant: None,
        vanishing,
    })
}

/// |℘(T_{U⁻¹} A T_U)(x, η) - ℘(A)(Ux, (U⁻¹)*η)| with T_U f = f∘U⁻¹.
///
/// The left side uses the transported charts κ_c∘U with tangent vectors from
/// finite differences; the right side uses the analytic chart derivatives.
pub fn principal_symbol_conjugation_check(
    op: &AssembledOperator,
    u: &SpecialUnitary,
    x: &[Complex64],
    eta: &[Complex64],
    conv: CovectorConvention,
) -> Result<f64> {
    if u.dim() != op.n {
        return Err(Error::Domain("U must act on C^n".into()));
    }
    let ux = u.apply(x);
    let y = unit_image(&ux, op.n)?;
    let uinv = u.inverse();
    let mut lhs = Complex64::new(0.0, 0.0);
    for (i, ch) in op.charts.iter().enumerate() {
        let (Some(sym), Some(b)) = (&op.symbols[i], ch.forward(&y)) else { continue };
        let t = op.partition.t_at(&op.charts, i, &y);
        if t == 0.0 {
            continue;
        }
        let p: Vec<f64> = (0..b.len())
            .map(|q| {
                let mut alpha = vec![0; b.len()];
                alpha[q] = 1;
                let tangent: Vec<Complex64> = (0..op.n)
                    .map(|j| {
                        let comp = |bb: &[f64]| {
                            let w = upsilon_inv(&ch.inverse(bb));
                            uinv.apply(&w)[j]
                        };
                        fd::partial(&comp, &b, &alpha, fd::DEFAULT_STEP)
                    })
                    .collect();
                conv.pair(eta, &tangent)
            })
            .collect();
        lhs += sym.principal_eval(&b, &p) * t;
    }
    let eta_t = conv.pullback(&uinv, eta);
    let rhs = op.principal_symbol(&ux, &eta_t, conv)?;
    Ok((lhs - rhs).norm())
}

/// The symbol test corpus, defined in chart 1 except for the global cases.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CorpusSymbol {
    One,
    Phi,
    Xi1,
    Xi1Sq,
    PhiXi1,
}

impl CorpusSymbol {
    pub fn all() -> [Self; 5] {
        [Self::One, Self::Phi, Self::Xi1, Self::Xi1Sq, Self::PhiXi1]
    }

    pub fn id(&self) -> &'static str {
        match self {
            Self::One => "1",
            Self::Phi => "phi",
            Self::Xi1 => "xi1",
            Self::Xi1Sq => "xi1^2",
            Self::PhiXi1 => "phi*xi1",
        }
    }

    pub fn operator(&self, n: usize, phi: &SymbolFunction) -> Result<AssembledOperator> {
        let d = 2 * n - 1;
        let chart1 = Chart::new(n, 1)?;
        let phi_b = {
            let phi = phi.clone();
            move |b: &[f64]| phi.eval(&upsilon_inv(&chart1.inverse(b)))
        };
        match self {
            Self::One => AssembledOperator::identity(n),
            Self::Phi => AssembledOperator::multiplication(n, phi),
            Self::Xi1 => AssembledOperator::in_chart(n, 1, SymbolA::momentum(d, 0, 1)),
            Self::Xi1Sq => AssembledOperator::in_chart(n, 1, SymbolA::momentum(d, 0, 2)),
            Self::PhiXi1 => AssembledOperator::in_chart(n, 1, SymbolA::base_times_momentum(d, phi_b, 0, 1)?),
        }
    }
}

/// φ(x) = |x₁|² + x₁x̄₂ + x₂x̄₁.
pub fn corpus_phi() -> SymbolFunction {
    SymbolFunction::general(|x| Complex64::new(x[0].norm_sqr(), 0.0) + x[0] * x[1].conj() + x[1] * x[0].conj())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::berezin::{berezin_numeric, QuadPolicy};
    use proptest::prelude::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    #[test]
    fn chart_family() {
        let charts = charts_build(2).unwrap();
        assert_eq!(charts.len(), 3);
        assert_eq!(charts_build(4).unwrap().len(), 7);
        assert!(charts_build(1).is_err());
        let e1 = [1.0, 0.0, 0.0, 0.0];
        let members: Vec<usize> = charts.iter().filter(|ch| ch.forward(&e1).is_some()).map(|ch| ch.index()).collect();
        assert_eq!(members, vec![1]);
        for n in [2usize, 3] {
            for ch in charts_build(n).unwrap() {
                let r = ch.rotation_matrix();
                for i in 0..2 * n {
                    for j in 0..2 * n {
                        let g: f64 = (0..2 * n).map(|k| r[k][i] * r[k][j]).sum();
                        assert!((g - if i == j { 1.0 } else { 0.0 }).abs() < 1e-14);
                    }
                }
            }
        }
        // R₂ for n = 2: (-y₁, y₃, y₂, y₄).
        let mut y = [1.0, 2.0, 3.0, 4.0];
        charts[1].rotate(&mut y);
        assert_eq!(y, [-1.0, 3.0, 2.0, 4.0]);
        let mut y = [1.0, 2.0, 3.0, 4.0];
        charts[2].rotate(&mut y);
        assert_eq!(y, [-1.0, 4.0, 3.0, 2.0]);
    }

    #[test]
    fn chart_derivatives_match_differences() {
        for ch in charts_build(3).unwrap() {
            let b = [0.4, 0.2, -0.3, 0.1, 0.25];
            let der = ch.inverse_derivatives(&b);
            for comp in 0..6 {
                let f = |x: &[f64]| c(ch.inverse(x)[comp], 0.0);
                let g = fd::gradient(&f, &b, 1e-3);
                let hs = fd::hessian(&f, &b, 1e-3);
                for i in 0..5 {
                    assert!((g[i].re - der.first[i][comp]).abs() < 1e-9);
                    for j in 0..5 {
                        assert!((hs[i][j].re - der.second[i][j][comp]).abs() < 1e-7);
                    }
                }
            }
        }
    }

    #[test]
    fn cover_examples() {
        for n in [2usize, 3] {
            let rep = chart_cover_check(n, 20_000, 42).unwrap();
            assert!(rep.passed(), "{:?}", rep.uncovered.first());
            assert!(rep.large_v > 0);
            let p = Partition::for_dim(n);
            assert!(rep.worst_depth < p.bump.support, "n={n}: {}", rep.worst_depth);
        }
        // θ = π with small |v|.
        let y = [-0.9, 0.0, 0.3, (1.0f64 - 0.81 - 0.09).sqrt()];
        let (c2, b, case) = reassign(2, &y).unwrap();
        assert_eq!(case, CoverCase::Cut);
        let ch = Chart::new(2, c2).unwrap();
        assert!(ch.in_domain(&b));
        assert!(ch.inverse(&b).iter().zip(&y).all(|(a, b)| (a - b).abs() < 1e-14));
        let (c1, _, case) = reassign(2, &[1.0, 0.0, 0.0, 0.0]).unwrap();
        assert_eq!((c1, case), (1, CoverCase::Chart1));
    }

    #[test]
    fn partition_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        for n in [2usize, 3] {
            let p = Partition::for_dim(n);
            p.validate().unwrap();
            let charts = charts_build(n).unwrap();
            for _ in 0..500 {
                let y = sample_uniform(n, &mut rng).y;
                let sum: f64 = (0..charts.len()).map(|i| p.t_at(&charts, i, &y)).sum();
                assert!((sum - 1.0).abs() < 1e-14);
                for (i, ch) in charts.iter().enumerate() {
                    if let Some(b) = ch.forward(&y) {
                        let t = p.t_at(&charts, i, &y);
                        assert!((t * p.rho(ch, &b) - t).abs() < 1e-15);
                    }
                }
            }
            let e1 = [vec![1.0], vec![0.0; 2 * n - 1]].concat();
            assert_eq!(p.t_at(&charts, 0, &e1), 1.0);
        }
        let bad = Partition { n: 2, bump: BumpProfile { plateau: 0.6, support: 0.9 }, cutoff: BumpProfile { plateau: 0.8, support: 0.95 } };
        assert!(bad.validate().is_err());
    }

    fn bump3(b: &[f64]) -> f64 {
        let prof = BumpProfile { plateau: 0.0, support: 1.0 };
        prof.eval((b.iter().map(|x| x * x).sum::<f64>() / 0.36).sqrt())
    }

    #[test]
    fn analytic_apply_examples() {
        let ch = Chart::new(2, 1).unwrap();
        let h = 0.05;
        let f = |b: &[f64]| c(bump3(b) * (1.0 + b[1]), 0.0);
        let b = [0.1, -0.05, 0.2];
        for t in [0.0, 0.5, 1.0] {
            let spec = PDOApplySpec::new(h, t, 5);
            let one = pdo_apply(&SymbolA::constant(3, 1.0), &spec, &ch, &f, &b).unwrap();
            assert!((one - f(&b)).norm() < 1e-12);
        }
        let phi = |b: &[f64]| c(b[0].cos(), b[2]);
        let spec = PDOApplySpec::new(h, 0.0, 5);
        let mult = pdo_apply(&SymbolA::base(3, phi).unwrap(), &spec, &ch, &f, &b).unwrap();
        assert!((mult - phi(&b) * f(&b)).norm() < 1e-14);
        // Plane wave e^{iβθ/ħ} times a bump: Op(ξ₁) f = β f - iħ e^{iβθ/ħ} ∂_θ bump.
        let beta = 0.7;
        let wave = |b: &[f64]| Complex64::from_polar(bump3(b), beta * b[0] / h);
        let got = pdo_apply(&SymbolA::momentum(3, 0, 1), &PDOApplySpec::new(h, 0.0, 5), &ch, &wave, &b).unwrap();
        let dbump = fd::partial(&|x: &[f64]| c(bump3(x), 0.0), &b, &[1, 0, 0], 1e-3);
        let want = wave(&b) * beta - Complex64::from_polar(1.0, beta * b[0] / h) * dbump * c(0.0, h);
        assert!((got - want).norm() < 1e-8, "{got} vs {want}");
        assert!((got - wave(&b) * beta).norm() < 3.0 * h);
        assert!(matches!(
            pdo_apply(&SymbolA::momentum(3, 0, 1), &PDOApplySpec::new(h, 0.0, 4), &ch, &wave, &b),
            Err(Error::Domain(_))
        ));
    }

    fn bump1(x: f64) -> f64 {
        BumpProfile { plateau: 0.0, support: 1.0 }.eval(x.abs() / 0.6)
    }

    #[test]
    fn oscillatory_matches_analytic_in_one_dimension() {
        let h = 0.5;
        let b = [0.15];
        let support = [(-0.6, 0.6)];
        let f = |x: &[f64]| Complex64::from_polar(bump1(x[0]), 0.8 * x[0] / h);
        let base = SymbolA::constant(1, 1.0);
        let spec = PDOApplySpec { c_nodes: 96, tol: 1e-2, ..PDOApplySpec::new(h, 0.0, 6) }.oscillatory();
        let v = oscillatory_apply(&base, &spec, &f, &b, &support).unwrap();
        assert!((v.value - f(&b)).norm() < 1e-5, "{} vs {}", v.value, f(&b));
        assert!(v.tail_bound < 1e-2);
        let xi = SymbolA::base_times_momentum(1, |x: &[f64]| c(1.0 + 0.3 * x[0], 0.0), 0, 1).unwrap();
        for t in [0.0, 0.5, 1.0] {
            let sp = PDOApplySpec { t, k: 7, ..spec };
            let osc = oscillatory_apply(&xi, &sp, &f, &b, &support).unwrap().value;
            let ana = analytic_apply(&xi, &sp, &f, &b).unwrap();
            assert!((osc - ana).norm() < 1e-3, "t={t}: {osc} vs {ana}");
        }
        let sp = PDOApplySpec { k: 7, ..spec };
        let narrow = oscillatory_apply(&xi, &sp, &f, &b, &support).unwrap();
        let wide = oscillatory_apply(&xi, &PDOApplySpec { momentum_cutoff: 1.5 * sp.momentum_cutoff, ..sp }, &f, &b, &support).unwrap();
        assert!((narrow.value - wide.value).norm() < 1e-3, "{} vs {}", narrow.value, wide.value);
        assert!(wide.tail_bound < narrow.tail_bound);
        assert!(matches!(
            oscillatory_apply(&xi, &PDOApplySpec { k: 3, ..spec }, &f, &b, &support),
            Err(Error::Quadrature(_))
        ));
    }

    #[test]
    fn oscillatory_two_dimensions() {
        let h = 0.5;
        let b = [0.1, -0.2];
        let support = [(-0.6, 0.6), (-0.6, 0.6)];
        let f = |x: &[f64]| Complex64::from_polar(bump1(x[0]) * bump1(x[1]), 0.5 * x[1] / h);
        let a = SymbolA::momentum(2, 1, 1);
        let spec = PDOApplySpec { c_nodes: 48, tol: 0.1, budget: 1e9, ..PDOApplySpec::new(h, 0.0, 8) }.oscillatory();
        let osc = oscillatory_apply(&a, &spec, &f, &b, &support).unwrap();
        let ana = analytic_apply(&a, &spec, &f, &b).unwrap();
        assert!((osc.value - ana).norm() < 1e-3, "{} vs {ana}", osc.value);
        let tight = PDOApplySpec { budget: 1e3, ..spec };
        assert!(matches!(oscillatory_apply(&a, &tight, &f, &b, &support), Err(Error::Resolution(_))));
    }

    #[test]
    fn symbol_bounds() {
        let a = SymbolA::base_times_momentum(3, |b: &[f64]| c(b[0].sin() + 2.0, 0.0), 0, 1).unwrap();
        let prof = a.bound_profile(0.1);
        assert!(prof.iter().all(|v| v.is_finite()));
        assert!(prof[3] < 2.0 * prof[1]);
        assert!(SymbolA::base(3, |_| c(0.0, 0.0)).is_err());
        assert!(SymbolA::new(3, vec![MomentumTerm::new(vec![1, 0], |_| c(1.0, 0.0))], vec![]).is_err());
    }

    fn z_axis(lambda: f64) -> Vec<Complex64> {
        vec![c(lambda, 0.0), c(0.0, 0.0)]
    }

    #[test]
    fn identity_has_unit_covariant_symbol() {
        let op = AssembledOperator::identity(2).unwrap();
        let policy = ChartQuadPolicy::default();
        let params = Params::new(2, 0.0, 0.4).unwrap();
        let v = covariant_symbol_pdo(&params, &op, &z_axis(1.0), policy.nodes(0.4)).unwrap();
        assert!((v - 1.0).norm() < EGOROV_QUADRATURE_FLOOR, "{v}");
        let params = Params::new(2, 0.0, 0.2).unwrap();
        let v = covariant_symbol_pdo(&params, &op, &[c(0.3, 0.4), c(-0.5, 0.2)], 96).unwrap();
        assert!((v - 1.0).norm() < EGOROV_QUADRATURE_FLOOR, "{v}");
        let v = covariant_symbol_pdo(&params, &op, &z_axis(1.0), 96).unwrap();
        assert!((v - 1.0).norm() < 1e-6, "{v}");
        let params = Params::new(2, -1.0, 0.3).unwrap();
        let v = covariant_symbol_pdo(&params, &op, &z_axis(1.0), 64).unwrap();
        assert!((v - 1.0).norm() < EGOROV_QUADRATURE_FLOOR, "{v}");
        assert!(matches!(covariant_symbol_pdo(&params.with_hbar(0.01), &op, &z_axis(1.0), 64), Err(Error::Resolution(_))));
    }

    #[test]
    fn multiplication_matches_berezin() {
        let phi = corpus_phi();
        let op = AssembledOperator::multiplication(2, &phi).unwrap();
        let z = vec![c(0.6, 0.2), c(0.3, -0.5)];
        let h = 0.25;
        let params = Params::new(2, 0.0, h).unwrap();
        let v = covariant_symbol_pdo(&params, &op, &z, 64).unwrap();
        let b = berezin_numeric(&params, &phi, &z, &QuadPolicy::for_dim(2).spec(h), &SeriesControl::default()).unwrap();
        assert!((v - b).norm() < EGOROV_QUADRATURE_FLOOR * b.norm(), "{v} vs {b}");
    }

    #[test]
    fn momentum_limits_and_conventions() {
        let lambda = 1.3;
        let z = z_axis(lambda);
        let x = vec![c(1.0, 0.0), c(0.0, 0.0)];
        let eta: Vec<Complex64> = z.iter().map(|v| v * c(0.0, -1.0)).collect();
        let op = CorpusSymbol::Xi1.operator(2, &corpus_phi()).unwrap();
        let bil = op.principal_symbol(&x, &eta, CovectorConvention::Bilinear).unwrap();
        let ses = op.principal_symbol(&x, &eta, CovectorConvention::Sesquilinear).unwrap();
        assert!((bil - lambda).norm() < 1e-14);
        assert!((ses + lambda).norm() < 1e-14);
        let params = Params::new(2, 0.0, 0.1).unwrap();
        let v = covariant_symbol_pdo(&params, &op, &z, 48).unwrap();
        assert!((v - lambda).norm() < 0.2 * lambda, "{v}");
        // t = 0 and t = 1 agree to O(ħ).
        let op = CorpusSymbol::PhiXi1.operator(2, &corpus_phi()).unwrap();
        let v0 = covariant_symbol_pdo(&params, &op, &z, 48).unwrap();
        let v1 = covariant_symbol_pdo(&params, &op.clone().with_t(1.0).unwrap(), &z, 48).unwrap();
        assert!((v0 - v1).norm() < 0.5 * 0.1 * lambda, "{v0} vs {v1}");
    }

    #[test]
    fn conjugation_check() {
        let x = vec![c(0.8, 0.1), c(0.2, -0.55)];
        let eta = vec![c(0.3, -1.1), c(0.4, 0.2)];
        for which in CorpusSymbol::all() {
            let op = which.operator(2, &corpus_phi()).unwrap();
            for conv in [CovectorConvention::Bilinear, CovectorConvention::Sesquilinear] {
                let id = principal_symbol_conjugation_check(&op, &SpecialUnitary::identity(2), &x, &eta, conv).unwrap();
                assert!(id < 1e-9, "{} {id}", which.id());
                let u = SpecialUnitary::diagonal_phase(2, 0.4);
                let dev = principal_symbol_conjugation_check(&op, &u, &x, &eta, conv).unwrap();
                assert!(dev <= 1e-6, "{} {dev}", which.id());
            }
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn forward_inverts_inverse(theta in -3.0f64..3.0, v0 in -0.6f64..0.6, v1 in -0.6f64..0.6, idx in 1usize..4) {
            let ch = Chart::new(2, idx).unwrap();
            let b = [theta, v0, v1];
            prop_assume!(ch.in_domain(&b));
            let back = ch.forward(&ch.inverse(&b)).unwrap();
            for (a, bb) in back.iter().zip(&b) {
                prop_assert!((a - bb).abs() < 1e-12);
            }
        }

        #[test]
        fn reassignment_covers(seed in 0u64..1000) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let y = sample_uniform(3, &mut rng).y;
            let (ci, b, _) = reassign(3, &y).unwrap();
            let ch = Chart::new(3, ci).unwrap();
            prop_assert!(ch.in_domain(&b));
        }
    }
}
