//! The complex unit sphere S^n ⊂ C^n as a computational domain.
//!
//! Points are stored both as complex vectors and through the real
//! identification y = (Re x₁, Im x₁, Re x₂, Im x₂, …) ∈ S^{2n-1}. The angular
//! parametrization is the usual hyperspherical one,
//! ω₁ = sin θ_{2n-1} ⋯ sin θ₂ cos θ₁, …, ω_{2n} = cos θ_{2n-1}, with y = ω.

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::quad::{gauss_jacobi_sym, gauss_legendre, pairwise_sum, Cascade};
use crate::specfun::{ln_factorial, ln_gamma};

/// A vector in C^n.
pub type ComplexVec = Vec<Complex64>;

/// Hermitian product x·z = Σ x_j conj(z_j).
pub fn dot(x: &[Complex64], z: &[Complex64]) -> Complex64 {
    x.iter().zip(z).map(|(a, b)| a * b.conj()).sum()
}

pub fn norm(z: &[Complex64]) -> f64 {
    z.iter().map(|c| c.norm_sqr()).sum::<f64>().sqrt()
}

/// A point of S^n with its real image in S^{2n-1}.
#[derive(Debug, Clone, PartialEq)]
pub struct SpherePoint {
    pub x: ComplexVec,
    pub y: Vec<f64>,
}

impl SpherePoint {
    /// Builds a point from complex coordinates, normalizing them.
    pub fn from_complex(x: &[Complex64]) -> Result<Self> {
        let r = norm(x);
        if !(r > 0.0) || !r.is_finite() {
            return Err(Error::Domain("cannot project the zero vector onto the sphere".into()));
        }
        let x: ComplexVec = x.iter().map(|c| c / r).collect();
        let y = upsilon(&x);
        Ok(Self { x, y })
    }

    /// Builds a point from its real image, normalizing it.
    pub fn from_real(y: &[f64]) -> Result<Self> {
        if y.len() % 2 != 0 || y.is_empty() {
            return Err(Error::Domain("real image must have even positive length".into()));
        }
        let x: ComplexVec = y.chunks(2).map(|c| Complex64::new(c[0], c[1])).collect();
        Self::from_complex(&x)
    }

    pub fn dim(&self) -> usize {
        self.x.len()
    }

    fn zeros(n: usize) -> Self {
        Self { x: vec![Complex64::new(0.0, 0.0); n], y: vec![0.0; 2 * n] }
    }

    fn set_from_omega(&mut self, omega: &[f64]) {
        self.y.copy_from_slice(omega);
        for (j, xj) in self.x.iter_mut().enumerate() {
            *xj = Complex64::new(omega[2 * j], omega[2 * j + 1]);
        }
    }
}

/// The identification Υ: C^n → R^{2n}, interleaving real and imaginary parts.
pub fn upsilon(x: &[Complex64]) -> Vec<f64> {
    x.iter().flat_map(|c| [c.re, c.im]).collect()
}

/// Inverse of [`upsilon`].
pub fn upsilon_inv(y: &[f64]) -> ComplexVec {
    y.chunks(2).map(|c| Complex64::new(c[0], c[1])).collect()
}

/// Angles (θ₁, …, θ_{2n-1}) with θ₁ ∈ (-π, π] and the rest in [0, π].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AngleVector(pub Vec<f64>);

impl AngleVector {
    /// The critical point θ₁ = 0, θ_j = π/2, mapped to ê₁.
    pub fn critical(n: usize) -> Self {
        let mut t = vec![std::f64::consts::FRAC_PI_2; 2 * n - 1];
        t[0] = 0.0;
        Self(t)
    }

    pub fn validate(&self) -> Result<()> {
        use std::f64::consts::PI;
        let t = &self.0;
        if t.is_empty() || t.len() % 2 == 0 {
            return Err(Error::Domain("need an odd number 2n-1 of angles".into()));
        }
        if !(t[0] > -PI && t[0] <= PI) {
            return Err(Error::Domain(format!("theta_1 = {} outside (-pi, pi]", t[0])));
        }
        if let Some(bad) = t[1..].iter().find(|&&a| !(0.0..=PI).contains(&a)) {
            return Err(Error::Domain(format!("polar angle {bad} outside [0, pi]")));
        }
        Ok(())
    }
}

fn omega_from_sincos(sin: &[f64], cos: &[f64], out: &mut [f64]) {
    let m = sin.len();
    let mut prod = 1.0;
    out[m] = cos[m - 1];
    for k in (2..m).rev() {
        prod *= sin[k];
        out[k] = prod * cos[k - 1];
    }
    if m > 1 {
        prod *= sin[1];
    }
    out[0] = prod * cos[0];
    out[1] = prod * sin[0];
}

/// The hyperspherical coordinates ω(θ) ∈ S^{2n-1}.
pub fn angles_to_omega(theta: &AngleVector) -> Vec<f64> {
    let sin: Vec<f64> = theta.0.iter().map(|t| t.sin()).collect();
    let cos: Vec<f64> = theta.0.iter().map(|t| t.cos()).collect();
    let mut out = vec![0.0; theta.0.len() + 1];
    omega_from_sincos(&sin, &cos, &mut out);
    out
}

pub fn angles_to_point(theta: &AngleVector) -> Result<SpherePoint> {
    theta.validate()?;
    let omega = angles_to_omega(theta);
    let mut p = SpherePoint::zeros(omega.len() / 2);
    p.set_from_omega(&omega);
    Ok(p)
}

/// Unnormalized surface Jacobian Π_{j≥2} sin^{j-1} θ_j.
pub fn angle_jacobian(theta: &[f64]) -> f64 {
    theta.iter().enumerate().skip(1).map(|(j, t)| t.sin().powi(j as i32)).product()
}

/// 2π^n/Γ(n), the Jacobian integral that normalizes the measure.
pub fn sphere_normalization(n: usize) -> f64 {
    2.0 * std::f64::consts::PI.powi(n as i32) / ln_gamma(n as f64).unwrap().exp()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Periodic trapezoid in θ₁ and Gauss rules in cos θ_j for the polar angles.
    GaussLegendre,
    /// Periodic trapezoid in θ₁ and the midpoint rule in every polar angle.
    TrapezoidPeriodic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadSpec {
    pub nodes_per_angle: usize,
    pub scheme: Scheme,
    /// Clusters nodes around the critical point ê₁ with a density set by
    /// this ħ value.
    pub stretch: Option<f64>,
}

impl QuadSpec {
    pub fn gauss(nodes_per_angle: usize) -> Self {
        Self { nodes_per_angle, scheme: Scheme::GaussLegendre, stretch: None }
    }

    pub fn stretched(nodes_per_angle: usize, hbar: f64) -> Self {
        Self { nodes_per_angle, scheme: Scheme::GaussLegendre, stretch: Some(hbar) }
    }

    pub fn validate(&self) -> Result<()> {
        if self.nodes_per_angle < 4 {
            return Err(Error::Domain(format!("nodes_per_angle = {} < 4", self.nodes_per_angle)));
        }
        if let Some(h) = self.stretch {
            if !(h > 0.0) {
                return Err(Error::Domain("stretch parameter must be positive".into()));
            }
        }
        Ok(())
    }

    /// Total number of integrand evaluations on S^n.
    pub fn point_count(&self, n: usize) -> usize {
        self.nodes_per_angle.pow(2 * n as u32 - 1)
    }
}

impl Default for QuadSpec {
    fn default() -> Self {
        Self::gauss(24)
    }
}

/// One-dimensional rule for a single angle, weights summing to 1.
#[derive(Debug, Clone)]
struct AngleRule {
    sin: Vec<f64>,
    cos: Vec<f64>,
    weights: Vec<f64>,
}

impl AngleRule {
    fn from_angles(theta: Vec<f64>, mut weights: Vec<f64>) -> Self {
        let s: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= s);
        Self { sin: theta.iter().map(|t| t.sin()).collect(), cos: theta.iter().map(|t| t.cos()).collect(), weights }
    }

    fn len(&self) -> usize {
        self.weights.len()
    }
}

fn stretch_beta(hbar: f64) -> f64 {
    1.0 + 0.5 * (1.0 / hbar).ln().max(0.0)
}

fn build_rule(index: usize, spec: &QuadSpec) -> AngleRule {
    use std::f64::consts::{FRAC_PI_2, PI};
    let m = spec.nodes_per_angle;
    // Exponent of sin θ in the surface Jacobian for this angle.
    let power = index as i32;
    if let Some(h) = spec.stretch {
        let beta = stretch_beta(h);
        let (s, w) = gauss_legendre(m);
        let (half, centre) = if index == 0 { (PI, 0.0) } else { (FRAC_PI_2, FRAC_PI_2) };
        let theta: Vec<f64> = s.iter().map(|&s| centre + half * (beta * s).sinh() / beta.sinh()).collect();
        let weights = s
            .iter()
            .zip(&w)
            .zip(&theta)
            .map(|((&s, &w), &t)| w * half * beta * (beta * s).cosh() / beta.sinh() * t.sin().powi(power))
            .collect();
        return AngleRule::from_angles(theta, weights);
    }
    if index == 0 {
        let theta = (0..m).map(|i| -PI + 2.0 * PI * (i as f64 + 0.5) / m as f64).collect();
        return AngleRule::from_angles(theta, vec![1.0; m]);
    }
    match spec.scheme {
        Scheme::GaussLegendre => {
            // ∫ g(θ) sin^j θ dθ = ∫ g(arccos t) (1 - t²)^{(j-1)/2} dt.
            let (t, w) = gauss_jacobi_sym(m, 0.5 * (power as f64 - 1.0));
            let theta = t.iter().rev().map(|t| t.acos()).collect();
            AngleRule::from_angles(theta, w.into_iter().rev().collect())
        }
        Scheme::TrapezoidPeriodic => {
            let theta: Vec<f64> = (0..m).map(|i| PI * (i as f64 + 0.5) / m as f64).collect();
            let weights = theta.iter().map(|t| t.sin().powi(power)).collect();
            AngleRule::from_angles(theta, weights)
        }
    }
}

/// A tensor-product grid on S^n with normalized weights.
#[derive(Debug, Clone)]
pub struct SphereGrid {
    n: usize,
    rules: Vec<AngleRule>,
}

impl SphereGrid {
    pub fn new(n: usize, spec: &QuadSpec) -> Result<Self> {
        if n == 0 {
            return Err(Error::Domain("n must be at least 1".into()));
        }
        spec.validate()?;
        let rules = (0..2 * n - 1).map(|j| build_rule(j, spec)).collect();
        Ok(Self { n, rules })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.rules.iter().map(AngleRule::len).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Sum of all weights; 1 up to rounding by construction.
    pub fn total_weight(&self) -> f64 {
        self.rules.iter().map(|r| r.weights.iter().sum::<f64>()).product()
    }

    /// Integrates `m` functions at once. `f` fills `out[..m]` at each node.
    ///
    /// Work is split over the nodes of the outermost angle. Each block is
    /// summed with a fixed pairwise pattern, so the result does not depend on
    /// the number of worker threads.
    pub fn integrate_many<F>(&self, m: usize, f: F) -> Vec<Complex64>
    where
        F: Fn(&SpherePoint, &mut [Complex64]) + Sync,
    {
        let dims = self.rules.len();
        let outer = &self.rules[dims - 1];
        let partials: Vec<Vec<Complex64>> = (0..outer.len())
            .into_par_iter()
            .map(|io| {
                let mut point = SpherePoint::zeros(self.n);
                let mut sin = vec![0.0; dims];
                let mut cos = vec![0.0; dims];
                let mut omega = vec![0.0; 2 * self.n];
                let mut vals = vec![Complex64::new(0.0, 0.0); m];
                let mut idx = vec![0usize; dims - 1];
                let mut acc = Cascade::new(m);
                sin[dims - 1] = outer.sin[io];
                cos[dims - 1] = outer.cos[io];
                let w_outer = outer.weights[io];
                loop {
                    let mut w = w_outer;
                    for (j, &i) in idx.iter().enumerate() {
                        let r = &self.rules[j];
                        sin[j] = r.sin[i];
                        cos[j] = r.cos[i];
                        w *= r.weights[i];
                    }
                    omega_from_sincos(&sin, &cos, &mut omega);
                    point.set_from_omega(&omega);
                    vals.iter_mut().for_each(|v| *v = Complex64::new(0.0, 0.0));
                    f(&point, &mut vals);
                    vals.iter_mut().for_each(|v| *v *= w);
                    acc.push(&vals);
                    // Odometer over the inner angles.
                    let mut j = 0;
                    loop {
                        if j == idx.len() {
                            return acc.total();
                        }
                        idx[j] += 1;
                        if idx[j] < self.rules[j].len() {
                            break;
                        }
                        idx[j] = 0;
                        j += 1;
                    }
                }
            })
            .collect();
        (0..m).map(|k| pairwise_sum(&partials.iter().map(|p| p[k]).collect::<Vec<_>>())).collect()
    }

    pub fn integrate<F>(&self, f: F) -> Complex64
    where
        F: Fn(&SpherePoint) -> Complex64 + Sync,
    {
        self.integrate_many(1, |p, out| out[0] = f(p))[0]
    }
}

/// ∫_{S^n} f dS with the normalized surface measure.
pub fn surface_integral<F>(n: usize, f: F, spec: &QuadSpec) -> Result<Complex64>
where
    F: Fn(&SpherePoint) -> Complex64 + Sync,
{
    Ok(SphereGrid::new(n, spec)?.integrate(f))
}

/// ⟨φ, ψ⟩ = ∫ φ conj(ψ) dS.
pub fn inner_product<F, G>(n: usize, phi: F, psi: G, spec: &QuadSpec) -> Result<Complex64>
where
    F: Fn(&SpherePoint) -> Complex64 + Sync,
    G: Fn(&SpherePoint) -> Complex64 + Sync,
{
    surface_integral(n, |p| phi(p) * psi(p).conj(), spec)
}

/// A multi-index k ∈ Z_+^n.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct MultiIndex(pub Vec<usize>);

impl MultiIndex {
    pub fn zero(n: usize) -> Self {
        Self(vec![0; n])
    }

    /// The unit index with a 1 in slot `j`.
    pub fn unit(n: usize, j: usize) -> Self {
        let mut k = vec![0; n];
        k[j] = 1;
        Self(k)
    }

    pub fn total(&self) -> usize {
        self.0.iter().sum()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    /// ln(k₁! ⋯ k_n!).
    pub fn ln_factorial(&self) -> f64 {
        self.0.iter().map(|&k| ln_factorial(k)).sum()
    }

    /// x^k = Π x_j^{k_j}.
    pub fn monomial(&self, x: &[Complex64]) -> Complex64 {
        self.0.iter().zip(x).fold(Complex64::new(1.0, 0.0), |acc, (&k, &xj)| acc * xj.powu(k as u32))
    }

    /// All multi-indices of length `n` with |k| ≤ `max_total`, in graded
    /// lexicographic order.
    pub fn all_up_to(n: usize, max_total: usize) -> Vec<Self> {
        let mut out = Vec::new();
        for total in 0..=max_total {
            let mut cur = vec![0; n];
            compositions(total, 0, &mut cur, &mut out);
        }
        out
    }
}

fn compositions(rest: usize, slot: usize, cur: &mut Vec<usize>, out: &mut Vec<MultiIndex>) {
    if slot + 1 == cur.len() {
        cur[slot] = rest;
        out.push(MultiIndex(cur.clone()));
        return;
    }
    for k in (0..=rest).rev() {
        cur[slot] = k;
        compositions(rest - k, slot + 1, cur, out);
    }
    cur[slot] = 0;
}

/// ⟨x^a, x^b⟩ = δ_{ab} a! Γ(n)/Γ(n+|a|) on S^n.
pub fn monomial_inner(a: &MultiIndex, b: &MultiIndex, n: usize) -> f64 {
    if a != b {
        return 0.0;
    }
    let nf = n as f64;
    (a.ln_factorial() + ln_gamma(nf).unwrap() - ln_gamma(nf + a.total() as f64).unwrap()).exp()
}

/// A uniformly distributed point on S^n.
pub fn sample_uniform<R: Rng + ?Sized>(n: usize, rng: &mut R) -> SpherePoint {
    loop {
        let y: Vec<f64> = (0..2 * n).map(|_| rng.sample(StandardNormal)).collect();
        if let Ok(p) = SpherePoint::from_real(&y) {
            return p;
        }
    }
}

/// An n×n complex matrix that has been checked to lie in SU(n).
#[derive(Debug, Clone, PartialEq)]
pub struct SpecialUnitary {
    rows: Vec<ComplexVec>,
}

impl SpecialUnitary {
    pub fn new(rows: Vec<ComplexVec>) -> Result<Self> {
        let n = rows.len();
        if n == 0 || rows.iter().any(|r| r.len() != n) {
            return Err(Error::Domain("matrix must be square and nonempty".into()));
        }
        let mut dev: f64 = 0.0;
        for i in 0..n {
            for j in 0..n {
                // (U U^*)_{ij} = Σ_k U_ik conj(U_jk)
                let g = dot(&rows[i], &rows[j]);
                let want = if i == j { 1.0 } else { 0.0 };
                dev = dev.max((g - want).norm());
            }
        }
        let det = determinant(&rows);
        dev = dev.max((det - 1.0).norm());
        if dev > 1e-12 {
            return Err(Error::NotUnitary(dev));
        }
        Ok(Self { rows })
    }

    pub fn identity(n: usize) -> Self {
        let rows = (0..n)
            .map(|i| (0..n).map(|j| Complex64::new(if i == j { 1.0 } else { 0.0 }, 0.0)).collect())
            .collect();
        Self { rows }
    }

    /// diag(e^{iα}, e^{-iα}, 1, …).
    pub fn diagonal_phase(n: usize, alpha: f64) -> Self {
        let mut u = Self::identity(n);
        u.rows[0][0] = Complex64::from_polar(1.0, alpha);
        u.rows[1][1] = Complex64::from_polar(1.0, -alpha);
        u
    }

    /// Real rotation by `angle` in the (i, j) coordinate plane.
    pub fn block_rotation(n: usize, i: usize, j: usize, angle: f64) -> Self {
        let mut u = Self::identity(n);
        let (s, c) = angle.sin_cos();
        u.rows[i][i] = Complex64::new(c, 0.0);
        u.rows[j][j] = Complex64::new(c, 0.0);
        u.rows[i][j] = Complex64::new(-s, 0.0);
        u.rows[j][i] = Complex64::new(s, 0.0);
        u
    }

    pub fn dim(&self) -> usize {
        self.rows.len()
    }

    pub fn rows(&self) -> &[ComplexVec] {
        &self.rows
    }

    pub fn apply(&self, x: &[Complex64]) -> ComplexVec {
        self.rows.iter().map(|r| r.iter().zip(x).map(|(a, b)| a * b).sum()).collect()
    }

    /// U^{-1} = U^*.
    pub fn inverse(&self) -> Self {
        let n = self.dim();
        let rows = (0..n).map(|i| (0..n).map(|j| self.rows[j][i].conj()).collect()).collect();
        Self { rows }
    }
}

fn determinant(rows: &[ComplexVec]) -> Complex64 {
    let n = rows.len();
    let mut a: Vec<ComplexVec> = rows.to_vec();
    let mut det = Complex64::new(1.0, 0.0);
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| a[i][col].norm().total_cmp(&a[j][col].norm())).unwrap();
        if a[piv][col].norm() == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        if piv != col {
            a.swap(piv, col);
            det = -det;
        }
        det *= a[col][col];
        for i in col + 1..n {
            let f = a[i][col] / a[col][col];
            for k in col..n {
                let v = a[col][k];
                a[i][k] -= f * v;
            }
        }
    }
    det
}
