//! Stationary phase for 𝒜Ψ = (r/πħ)^{n-1/2} ∫ Ψ(ω) e^{i f(ω)/ħ} dΩ on S^{2n-1},
//! f(ω) = -2ir(ω₁ - 1).

use std::f64::consts::PI;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::berezin::{check_resolution, validate_grid, ExpansionReport, QuadPolicy, VANISHING_FLOOR};
use crate::error::{Error, Result};
use crate::fd;
use crate::fit::AsymptoticFit;
use crate::jet::{cos_coeffs, Jet};
use crate::sphere_geom::{angle_jacobian, angles_to_omega, sphere_normalization, AngleVector, QuadSpec, SphereGrid};

/// The phase f near its nondegenerate critical point ê₁.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PhaseModel {
    pub n: usize,
    pub r: f64,
    pub critical_point: AngleVector,
    /// f'' = hessian_scale · I_{2n-1}.
    pub hessian_scale: Complex64,
}

impl PhaseModel {
    pub fn new(n: usize, r: f64) -> Result<Self> {
        if n < 1 || !(r > 0.0) {
            return Err(Error::Domain(format!("need n >= 1 and r > 0, got n = {n}, r = {r}")));
        }
        Ok(Self { n, r, critical_point: AngleVector::critical(n), hessian_scale: Complex64::new(0.0, 2.0 * r) })
    }

    pub fn dimension(&self) -> usize {
        2 * self.n - 1
    }

    /// det f'' = (2ir)^{2n-1}.
    pub fn hessian_det(&self) -> Complex64 {
        self.hessian_scale.powi(self.dimension() as i32)
    }

    /// f at the angles θ.
    pub fn phase(&self, theta: &[f64]) -> Complex64 {
        let w = angles_to_omega(&AngleVector(theta.to_vec()));
        Complex64::new(0.0, -2.0 * self.r) * (w[0] - 1.0)
    }
}

/// Which correction term and with what finite-difference step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrectionSpec {
    pub ell: usize,
    pub fd_step: f64,
}

impl CorrectionSpec {
    pub fn new(ell: usize, fd_step: f64) -> Result<Self> {
        if ell > 2 {
            return Err(Error::Unsupported(format!("M_{ell}: only l <= 2 is implemented")));
        }
        fd::validate_step(fd_step)?;
        Ok(Self { ell, fd_step })
    }
}

/// 𝒜Ψ with the normalized surface measure dΩ.
pub fn a_functional<F>(n: usize, hbar: f64, r: f64, psi: &F, spec: &QuadSpec) -> Result<Complex64>
where
    F: Fn(&[f64]) -> Complex64 + Sync,
{
    if !(hbar > 0.0) || !(r > 0.0) {
        return Err(Error::Domain("hbar and r must be positive".into()));
    }
    check_resolution(spec, hbar)?;
    let grid = SphereGrid::new(n, spec)?;
    let k = 2.0 * r / hbar;
    let v = grid.integrate(|x| psi(&x.y) * (k * (x.y[0] - 1.0)).exp());
    Ok(v * (r / (PI * hbar)).powf(n as f64 - 0.5))
}

/// N·𝒜Ψ with N = 2π^n/Γ(n).
pub fn normalized_a<F>(n: usize, hbar: f64, r: f64, psi: &F, spec: &QuadSpec) -> Result<Complex64>
where
    F: Fn(&[f64]) -> Complex64 + Sync,
{
    Ok(a_functional(n, hbar, r, psi, spec)? * sphere_normalization(n))
}

fn e1(n: usize) -> Vec<f64> {
    let mut y = vec![0.0; 2 * n];
    y[0] = 1.0;
    y
}

/// M₀Ψ = Ψ(ê₁).
pub fn m0_term<F>(psi: &F, n: usize) -> Complex64
where
    F: Fn(&[f64]) -> Complex64 + ?Sized,
{
    psi(&e1(n))
}

/// (1/4r)[Δ_yy - ∂_{y₁y₁} - (2n-1)∂_{y₁} + constant]Ψ(ê₁).
pub fn m1_with_constant<F>(psi: &F, n: usize, r: f64, constant: f64, fd_step: f64) -> Result<Complex64>
where
    F: Fn(&[f64]) -> Complex64 + ?Sized,
{
    fd::validate_step(fd_step)?;
    let y0 = e1(n);
    let d = 2 * n;
    let mut tangential = Complex64::new(0.0, 0.0);
    for j in 1..d {
        let mut a = vec![0; d];
        a[j] = 2;
        tangential += fd::partial(psi, &y0, &a, fd_step);
    }
    let mut a = vec![0; d];
    a[0] = 1;
    let d1 = fd::partial(psi, &y0, &a, fd_step);
    Ok((tangential - d1 * (2.0 * n as f64 - 1.0) + psi(&y0) * constant) / (4.0 * r))
}

/// The stated constant -¼(2n-1)(2n-3) in M₁.
pub fn m1_constant(n: usize) -> f64 {
    let n = n as f64;
    -0.25 * (2.0 * n - 1.0) * (2.0 * n - 3.0)
}

/// M₁Ψ = (1/4r)[Δ_yy - ∂_{y₁y₁} - (2n-1)∂_{y₁} - ¼(2n-1)(2n-3)]Ψ(ê₁).
pub fn m1_term<F>(psi: &F, n: usize, r: f64, fd_step: f64) -> Result<Complex64>
where
    F: Fn(&[f64]) -> Complex64 + ?Sized,
{
    m1_with_constant(psi, n, r, m1_constant(n), fd_step)
}

/// p_cp = f - f(θ₀) - ½⟨f''(θ₀)t, t⟩ as a Taylor polynomial in t = θ - θ₀.
pub fn phase_remainder_jet(n: usize, r: f64, max_degree: usize) -> Jet {
    let d = 2 * n - 1;
    let one = Complex64::new(1.0, 0.0);
    // ω₁ = Π_j cos t_j in the shifted angles.
    let mut omega1 = Jet::constant(d, max_degree, one);
    for j in 0..d {
        omega1 = omega1.mul(&Jet::univariate(d, max_degree, j, &cos_coeffs(max_degree)));
    }
    let mut quad = Jet::zero(d, max_degree);
    for j in 0..d {
        let mut e = vec![0u8; d];
        e[j] = 2;
        quad.add_term(e, one);
    }
    let minus_one = Jet::constant(d, max_degree, -one);
    omega1.add(&minus_one).scale(Complex64::new(0.0, -2.0 * r)).add(&quad.scale(Complex64::new(0.0, -r)))
}

fn factorial(k: usize) -> f64 {
    (1..=k).map(|v| v as f64).product()
}

/// Taylor polynomial of Ψ(ω(θ₀+t))·J(θ₀+t) up to `degree`, by finite
/// differences, carried with nominal truncation `nominal`.
fn amplitude_jet<F>(psi: &F, n: usize, degree: usize, nominal: usize, fd_step: f64) -> Jet
where
    F: Fn(&[f64]) -> Complex64 + ?Sized,
{
    let d = 2 * n - 1;
    let theta0 = AngleVector::critical(n).0;
    let u = |t: &[f64]| {
        let theta: Vec<f64> = theta0.iter().zip(t).map(|(a, b)| a + b).collect();
        psi(&angles_to_omega(&AngleVector(theta.clone()))) * angle_jacobian(&theta)
    };
    let zero = vec![0.0; d];
    let mut jet = Jet::zero(d, nominal.max(degree));
    let mut alpha = vec![0usize; d];
    loop {
        let total: usize = alpha.iter().sum();
        if total <= degree {
            let denom: f64 = alpha.iter().map(|&a| factorial(a)).product();
            let c = fd::partial(&u, &zero, &alpha, fd_step) / denom;
            jet.add_term(alpha.iter().map(|&a| a as u8).collect(), c);
        }
        let mut k = 0;
        loop {
            if k == d {
                return jet;
            }
            alpha[k] += 1;
            if alpha[k] <= degree {
                break;
            }
            alpha[k] = 0;
            k += 1;
        }
    }
}

/// M_ℓΨ = Σ_{s=ℓ}^{3ℓ} i^{-ℓ} 2^{-s}/(s!(s-ℓ)!) [(-f'')^{-1}∂·∂]^s [Ψ J p_cp^{s-ℓ}] at θ₀.
pub fn m_ell_generic<F>(psi: &F, r: f64, n: usize, ell: usize, fd_step: f64) -> Result<Complex64>
where
    F: Fn(&[f64]) -> Complex64 + ?Sized,
{
    let spec = CorrectionSpec::new(ell, fd_step)?;
    let model = PhaseModel::new(n, r)?;
    let top = 6 * spec.ell;
    let p = phase_remainder_jet(n, r, top.max(1));
    let u = amplitude_jet(psi, n, 2 * spec.ell, top, spec.fd_step);
    // (-f'')^{-1} = i/(2r) · I.
    let inv = -1.0 / model.hessian_scale;
    let i_pow = Complex64::new(0.0, 1.0).powi(-(ell as i32));
    let mut total = Complex64::new(0.0, 0.0);
    for s in ell..=3 * ell {
        let mut g = u.mul(&p.pow(s - ell));
        for _ in 0..s {
            g = g.laplacian();
        }
        let coef = i_pow * inv.powi(s as i32) * (0.5f64.powi(s as i32) / (factorial(s) * factorial(s - ell)));
        total += coef * g.constant_term();
    }
    Ok(total)
}

/// |N𝒜Ψ - M₀ - ħM₁| over an ħ grid.
pub fn stationary_expansion_check<F>(n: usize, r: f64, psi: &F, hbar_grid: &[f64], policy: &QuadPolicy) -> Result<ExpansionReport>
where
    F: Fn(&[f64]) -> Complex64 + Sync,
{
    validate_grid(hbar_grid)?;
    let m0 = m0_term(psi, n);
    let m1 = m1_term(psi, n, r, fd::DEFAULT_STEP)?;
    let m1_bare = m1_with_constant(psi, n, r, 0.0, fd::DEFAULT_STEP)?;
    let values = hbar_grid
        .par_iter()
        .map(|&h| normalized_a(n, h, r, psi, &policy.spec(h)))
        .collect::<Result<Vec<_>>>()?;
    let residuals: Vec<f64> = hbar_grid.iter().zip(&values).map(|(h, v)| (v - m0 - m1 * *h).norm()).collect();
    let basis = m0 / (4.0 * r);
    let fitted_constant = if basis.norm() < 1e-12 {
        None
    } else {
        let (a, b) = hbar_grid.iter().zip(&values).fold((0.0, 0.0), |(a, b), (h, v)| {
            let e = v - m0 - m1_bare * *h;
            let bb = basis * *h;
            (a + (bb.conj() * e).re, b + bb.norm_sqr())
        });
        Some(a / b)
    };
    let vanishing = residuals.iter().all(|v| *v <= VANISHING_FLOOR);
    let fitted_slope = AsymptoticFit::power_law(hbar_grid, &residuals)?.slope;
    Ok(ExpansionReport { grid: hbar_grid.to_vec(), values, leading: m0, first_order_pred: m1, residuals, fitted_slope, fitted_constant, vanishing })
}
