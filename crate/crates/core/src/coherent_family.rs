//! The complete family K_{n,p}(x, z) = Σ c_ℓ/ℓ! (x·z/ħ)^ℓ on S^n, its kernel
//! T_{n,p}, the Parseval measure dm, and the asymptotics of g_a.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::AsymptoticFit;
use crate::quad::{exp_sinh, tanh_sinh};
use crate::specfun::{bessel_i, bessel_k_scaled, ln_gamma, principal_pow, SeriesControl};
use crate::sphere_geom::{dot, monomial_inner, norm, sample_uniform, MultiIndex, QuadSpec, SphereGrid, SpherePoint};

/// The triple (n, p, ħ).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Params {
    pub n: usize,
    pub p: f64,
    pub hbar: f64,
}

impl Params {
    pub fn new(n: usize, p: f64, hbar: f64) -> Result<Self> {
        let out = Self { n, p, hbar };
        out.validate()?;
        Ok(out)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::Domain("n must be at least 1".into()));
        }
        if !(self.p > -(self.n as f64)) || !self.p.is_finite() {
            return Err(Error::Domain(format!("need p > -n, got p = {} with n = {}", self.p, self.n)));
        }
        if !(self.hbar > 0.0) || !self.hbar.is_finite() {
            return Err(Error::Domain(format!("hbar must be positive, got {}", self.hbar)));
        }
        Ok(())
    }

    pub fn with_hbar(self, hbar: f64) -> Self {
        Self { hbar, ..self }
    }

    /// n + p, the combination that sets every Bessel order.
    pub fn np(&self) -> f64 {
        self.n as f64 + self.p
    }

    /// a = 1/(n-1), the g_a parameter of K_{n,-1}.
    pub fn g_parameter(&self) -> Result<f64> {
        if self.p != -1.0 || self.n < 2 {
            return Err(Error::Domain("g_a applies to p = -1 with n >= 2".into()));
        }
        Ok(1.0 / (self.n as f64 - 1.0))
    }
}

/// c_{ℓ,p} = ((n)_ℓ/(n+p)_ℓ)^{1/2}.
pub fn c_coeff(params: &Params, l: usize) -> f64 {
    let n = params.n as f64;
    (0..l).map(|j| (n + j as f64) / (params.np() + j as f64)).product::<f64>().sqrt()
}

/// A series value with its truncation diagnostics.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SeriesValue {
    pub value: Complex64,
    pub terms: usize,
    /// Bound on the discarded tail, next-term/(1 - ratio).
    pub tail_bound: f64,
}

/// Precomputed ratios c_ℓ/c_{ℓ-1} for repeated evaluation of K_{n,p}.
#[derive(Debug, Clone)]
pub struct CoherentFamily {
    params: Params,
    ctl: SeriesControl,
    ratios: Vec<f64>,
}

impl CoherentFamily {
    pub fn new(params: Params, ctl: SeriesControl) -> Result<Self> {
        params.validate()?;
        ctl.validate()?;
        let n = params.n as f64;
        let ratios = (0..=ctl.max_terms)
            .map(|l| if l == 0 { 1.0 } else { ((n + l as f64 - 1.0) / (params.np() + l as f64 - 1.0)).sqrt() })
            .collect();
        Ok(Self { params, ctl, ratios })
    }

    pub fn params(&self) -> &Params {
        &self.params
    }

    /// Σ c_ℓ ζ^ℓ/ℓ! with ζ = x·z/ħ already formed.
    pub fn eval_scalar(&self, zeta: Complex64) -> Result<SeriesValue> {
        let mut term = Complex64::new(1.0, 0.0);
        let mut sum = term;
        let mode = zeta.norm();
        for l in 1..=self.ctl.max_terms {
            term *= zeta * (self.ratios[l] / l as f64);
            sum += term;
            let lf = l as f64;
            if lf > mode && term.norm() <= self.ctl.rel_tol * sum.norm() {
                let next = if l < self.ctl.max_terms { self.ratios[l + 1] } else { 1.0 };
                let rho = mode * next / (lf + 1.0);
                let t_next = term.norm() * rho;
                let tail = if rho < 1.0 { t_next / (1.0 - rho) } else { f64::INFINITY };
                return Ok(SeriesValue { value: sum, terms: l + 1, tail_bound: tail });
            }
        }
        Err(Error::NonConvergence { terms: self.ctl.max_terms, last_rel: term.norm() / sum.norm() })
    }

    /// e^{-shift}·(k, k', k'') at ζ, where k(ζ) = Σ c_ℓ ζ^ℓ/ℓ!.
    pub fn eval_with_derivatives(&self, zeta: Complex64, shift: f64) -> Result<[Complex64; 3]> {
        let zero = Complex64::new(0.0, 0.0);
        let mut q = Complex64::new((-shift).exp(), 0.0);
        let (mut c0, mut c1) = (1.0, self.ratios[1]);
        let mut c2 = c1 * self.ratios[2];
        let mut sums = [zero; 3];
        let mode = zeta.norm();
        for l in 0..self.ctl.max_terms - 2 {
            if l > 0 {
                q *= zeta / l as f64;
                c0 = c1;
                c1 = c2;
                c2 *= self.ratios[l + 2];
            }
            let terms = [q * c0, q * c1, q * c2];
            for (s, t) in sums.iter_mut().zip(terms) {
                *s += t;
            }
            let small = terms.iter().zip(&sums).all(|(t, s)| t.norm() <= self.ctl.rel_tol * s.norm());
            if l as f64 > mode && (small || q == zero) {
                return Ok(sums);
            }
        }
        Err(Error::NonConvergence { terms: self.ctl.max_terms, last_rel: (q * c0).norm() / sums[0].norm() })
    }

    pub fn eval(&self, x: &[Complex64], z: &[Complex64]) -> Result<Complex64> {
        Ok(self.eval_scalar(dot(x, z) / self.params.hbar)?.value)
    }
}

/// K_{n,p}(x, z).
pub fn k_family_eval(params: &Params, x: &SpherePoint, z: &[Complex64], ctl: &SeriesControl) -> Result<Complex64> {
    CoherentFamily::new(*params, *ctl)?.eval(&x.x, z)
}

/// T_{n,p} as a function of u = z·w/ħ², Γ(n+p) Σ u^ℓ/(ℓ! Γ(n+p+ℓ)).
pub fn kernel_t_of_u(np: f64, u: Complex64, ctl: &SeriesControl) -> Result<Complex64> {
    if u.norm() <= 1.0 {
        let mut term = Complex64::new(1.0, 0.0);
        let mut sum = term;
        for l in 1..=ctl.max_terms {
            term *= u / (l as f64 * (np + l as f64 - 1.0));
            sum += term;
            if term.norm() <= ctl.rel_tol * sum.norm() {
                return Ok(sum);
            }
        }
        return Err(Error::NonConvergence { terms: ctl.max_terms, last_rel: term.norm() / sum.norm() });
    }
    if u.im == 0.0 && u.re < 0.0 {
        return Err(Error::Branch("z.w lies on the negative real axis (Arg = pi)".into()));
    }
    let root = u.sqrt();
    let nu = np - 1.0;
    let gamma = ln_gamma(np)?.exp();
    Ok(principal_pow(u, -0.5 * nu)? * bessel_i(nu, root * 2.0, ctl)? * gamma)
}

/// T_{n,p}(z, w) = ⟨K(·,w), K(·,z)⟩ = Γ(n+p) u^{(1-n-p)/2} I_{n+p-1}(2√u),
/// u = z·w/ħ².
pub fn kernel_t(params: &Params, z: &[Complex64], w: &[Complex64]) -> Result<Complex64> {
    params.validate()?;
    let u = dot(z, w) / (params.hbar * params.hbar);
    kernel_t_of_u(params.np(), u, &SeriesControl::default())
}

/// Density of dm with respect to Lebesgue measure on C^n = R^{2n}.
pub fn measure_density(params: &Params, z: &[Complex64]) -> Result<f64> {
    params.validate()?;
    let n = params.n as i32;
    let pre = 2.0 / (PI * params.hbar * params.hbar).powi(n) / ln_gamma(params.np())?.exp();
    let rho = norm(z) / params.hbar;
    if rho == 0.0 {
        if params.p > 0.0 {
            // (ρ)^p K_p(2ρ) → Γ(p)/2.
            return Ok(pre * 0.5 * ln_gamma(params.p)?.exp());
        }
        return Err(Error::Domain("dm density is singular at z = 0 for p <= 0".into()));
    }
    let ctl = SeriesControl::default();
    let k = bessel_k_scaled(params.p, 2.0 * rho, &ctl)? * (-2.0 * rho).exp();
    Ok(pre * rho.powf(params.p) * k)
}

/// U_{n,p}(x^k)(z) = c_{|k|} Γ(n)/Γ(n+|k|) (z/ħ)^k.
pub fn u_transform_monomial(params: &Params, k: &MultiIndex, z: &[Complex64]) -> Complex64 {
    let m = k.total();
    let n = params.n as f64;
    let g = (ln_gamma(n).unwrap() - ln_gamma(n + m as f64).unwrap()).exp();
    let zh: Vec<Complex64> = z.iter().map(|c| c / params.hbar).collect();
    k.monomial(&zh) * (c_coeff(params, m) * g)
}

/// ⟨x^k, K(·,z)⟩ by quadrature.
pub fn u_transform_numeric(params: &Params, k: &MultiIndex, z: &[Complex64], spec: &QuadSpec) -> Result<Complex64> {
    let fam = CoherentFamily::new(*params, SeriesControl::default())?;
    let grid = SphereGrid::new(params.n, spec)?;
    let zc = z.to_vec();
    let failed = std::sync::atomic::AtomicBool::new(false);
    let v = grid.integrate(|p| match fam.eval(&p.x, &zc) {
        Ok(kv) => k.monomial(&p.x) * kv.conj(),
        Err(_) => {
            failed.store(true, std::sync::atomic::Ordering::Relaxed);
            Complex64::new(0.0, 0.0)
        }
    });
    if failed.into_inner() {
        return Err(Error::NonConvergence { terms: SeriesControl::default().max_terms, last_rel: f64::NAN });
    }
    Ok(v)
}

/// ∫₀^∞ t^{μ-1} K_p(t) dt by exp-sinh quadrature on the scaled MacDonald function.
pub fn radial_moment(mu: f64, p: f64) -> Result<f64> {
    if !(mu > p.abs()) {
        return Err(Error::Domain(format!("radial moment diverges for mu = {mu}, p = {p}")));
    }
    let ctl = SeriesControl::default();
    let r = exp_sinh(
        |t| {
            let k = bessel_k_scaled(p, t, &ctl).unwrap_or(0.0);
            Complex64::new(((mu - 1.0) * t.ln() - t).exp() * k, 0.0)
        },
        1e-14,
    )?;
    Ok(r.value.re)
}

/// Closed form 2^{μ-2} Γ((μ-p)/2) Γ((μ+p)/2) of [`radial_moment`].
pub fn radial_moment_exact(mu: f64, p: f64) -> f64 {
    ((mu - 2.0) * 2f64.ln() + ln_gamma(0.5 * (mu - p)).unwrap() + ln_gamma(0.5 * (mu + p)).unwrap()).exp()
}

/// Both sides of Parseval's identity for a pair of monomials.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ParsevalReport {
    /// ∫ U(x^a) conj U(x^b) dm.
    pub lhs: f64,
    /// ⟨x^a, x^b⟩.
    pub rhs: f64,
    /// |lhs - rhs|/|rhs|, or |lhs| when rhs = 0.
    pub rel_error: f64,
}

/// Parseval check: angular integral in closed form times a numerical radial
/// MacDonald integral.
pub fn parseval_check(params: &Params, a: &MultiIndex, b: &MultiIndex) -> Result<ParsevalReport> {
    params.validate()?;
    let rhs = monomial_inner(a, b, params.n);
    let angular = monomial_inner(a, b, params.n);
    let lhs = if angular == 0.0 {
        0.0
    } else {
        let n = params.n as f64;
        let m = a.total() as f64;
        let mu = 2.0 * m + 2.0 * n + params.p;
        let cu = c_coeff(params, a.total()) * (ln_gamma(n)? - ln_gamma(n + m)?).exp();
        let mass = 4.0 / (ln_gamma(n)? + ln_gamma(params.np())?).exp() * 2f64.powf(-mu);
        cu * cu * angular * mass * radial_moment(mu, params.p)?
    };
    let rel_error = if rhs == 0.0 { lhs.abs() } else { (lhs - rhs).abs() / rhs.abs() };
    Ok(ParsevalReport { lhs, rhs, rel_error })
}

/// ∫ dm over C^n, computed through the radial integral.
pub fn total_mass(params: &Params) -> Result<f64> {
    let n = params.n;
    Ok(parseval_check(params, &MultiIndex::zero(n), &MultiIndex::zero(n))?.lhs)
}

/// Large-|z·w|/ħ expansion of T_{n,p}(z,w) truncated at order 0 or 1.
pub fn inner_product_asymptotic(params: &Params, z: &[Complex64], w: &[Complex64], order: usize) -> Result<Complex64> {
    params.validate()?;
    if order > 1 {
        return Err(Error::Unsupported(format!("order {order} (only 0 and 1)")));
    }
    let zw = dot(z, w);
    if zw.norm() == 0.0 {
        return Err(Error::Domain("z.w must be nonzero".into()));
    }
    if zw.im == 0.0 && zw.re < 0.0 {
        return Err(Error::Branch("z.w lies on the negative real axis (Arg = pi)".into()));
    }
    let h = params.hbar;
    let np = params.np();
    let root = zw.sqrt();
    let lead = principal_pow(zw / (h * h), 0.5 * (0.5 - np))? * (root * (2.0 / h)).exp() * (ln_gamma(np)?.exp() / (2.0 * PI.sqrt()));
    if order == 0 {
        return Ok(lead);
    }
    Ok(lead * (1.0 - (np - 1.5) * (np - 0.5) * h / (root * 4.0)))
}

const G_CANCELLATION: f64 = 9.0;

/// g_a(z) = Σ √(aℓ+1) z^ℓ/ℓ!.
pub fn g_eval(a: f64, z: Complex64, ctl: &SeriesControl) -> Result<Complex64> {
    g_derivative(a, 0, z, ctl)
}

/// s-th derivative of g_a, Σ √(a(ℓ+s)+1) z^ℓ/ℓ!.
///
/// The series is summed directly unless it would cancel badly (Re z ≪ |z|),
/// in which case the half-line integral form is used.
pub fn g_derivative(a: f64, s: usize, z: Complex64, ctl: &SeriesControl) -> Result<Complex64> {
    if z.norm() - z.re > G_CANCELLATION {
        return g_half_line(a, s, z);
    }
    Ok(g_series(a, s, z, ctl)?.value)
}

/// Direct series for g_a^{(s)} with its tail bound.
pub fn g_series(a: f64, s: usize, z: Complex64, ctl: &SeriesControl) -> Result<SeriesValue> {
    ctl.validate()?;
    if !(a > 0.0) {
        return Err(Error::Domain(format!("g_a needs a > 0, got {a}")));
    }
    let sf = s as f64;
    let coef = |l: f64| (a * (l + sf) + 1.0).sqrt();
    let mut power = Complex64::new(1.0, 0.0);
    let mut sum = power * coef(0.0);
    let mode = z.norm();
    for l in 1..=ctl.max_terms {
        let lf = l as f64;
        power *= z / lf;
        let term = power * coef(lf);
        sum += term;
        if lf > mode && term.norm() <= ctl.rel_tol * sum.norm() {
            let rho = mode / (lf + 1.0) * (coef(lf + 1.0) / coef(lf));
            let t_next = power.norm() * mode / (lf + 1.0) * coef(lf + 1.0);
            let tail = if rho < 1.0 { t_next / (1.0 - rho) } else { f64::INFINITY };
            return Ok(SeriesValue { value: sum, terms: l + 1, tail_bound: tail });
        }
        if sum.norm() == 0.0 && term.norm() == 0.0 {
            break;
        }
    }
    if z.norm() == 0.0 {
        return Ok(SeriesValue { value: sum, terms: 1, tail_bound: 0.0 });
    }
    Err(Error::NonConvergence { terms: ctl.max_terms, last_rel: power.norm() / sum.norm() })
}

/// g_a^{(s)}(z) = (2/√π) ∫₀^∞ e^{-sat²} (a z e^{-at²} + 1 + sa) exp(z e^{-at²}) e^{-t²} dt.
pub fn g_half_line(a: f64, s: usize, z: Complex64) -> Result<Complex64> {
    if !(a > 0.0) {
        return Err(Error::Domain(format!("g_a needs a > 0, got {a}")));
    }
    let sa = s as f64 * a;
    let t_max = (45.0 + (1.0 + a * z.norm() + sa).ln()).sqrt();
    let r = tanh_sinh(
        |t, _, _| {
            let e = (-a * t * t).exp();
            let inner = z * (a * e) + 1.0 + sa;
            inner * (z * e - (sa + 1.0) * t * t).exp()
        },
        0.0,
        t_max,
        1e-15,
    )?;
    Ok(r.value * (2.0 / PI.sqrt()))
}

/// m(w) = w (1-w²)^{1/a-1} / √(-ln(1-w²)), with m(0) = 1.
pub fn m_function(a: f64, w: f64) -> f64 {
    if w == 0.0 {
        return 1.0;
    }
    let u = w * w;
    let l = -(-u).ln_1p();
    w * (1.0 - u).powf(1.0 / a - 1.0) / l.sqrt()
}

/// Evaluates m(w) from 1 - w, keeping precision near w = 1.
fn m_function_near_one(a: f64, w: f64, one_minus_w: f64) -> f64 {
    let q = one_minus_w * (1.0 + w);
    let l = -q.ln();
    if l <= 0.0 {
        return m_function(a, w);
    }
    w * q.powf(1.0 / a - 1.0) / l.sqrt()
}

/// The w-form (2/√(aπ)) e^z ∫₀¹ [a z (1-w²) + 1] e^{-z w²} m(w) dw, Re z > 0.
pub fn g_integral(a: f64, z: Complex64) -> Result<Complex64> {
    if !(z.re > 0.0) {
        return Err(Error::Domain("g_integral requires Re z > 0".into()));
    }
    if !(a > 0.0 && a <= 2.0) {
        return Err(Error::Domain(format!("g_integral requires 0 < a <= 2, got {a}")));
    }
    let r = tanh_sinh(
        |w, _, dr| {
            let m = if w < 0.5 { m_function(a, w) } else { m_function_near_one(a, w, dr) };
            let q = dr * (1.0 + w);
            (z * (a * q) + 1.0) * (-z * w * w).exp() * m
        },
        0.0,
        1.0,
        1e-15,
    )
    .map_err(|e| Error::Quadrature(format!("g_integral (a = {a}, z = {z}): {e}")))?;
    Ok(r.value * z.exp() * (2.0 / (a * PI).sqrt()))
}

/// Product of two truncated power series.
fn series_mul(x: &[f64], y: &[f64]) -> Vec<f64> {
    let n = x.len().min(y.len());
    (0..n).map(|k| (0..=k).map(|j| x[j] * y[k - j]).sum()).collect()
}

/// f^α for a power series with f[0] = 1.
fn series_pow(f: &[f64], alpha: f64) -> Vec<f64> {
    let mut g = vec![0.0; f.len()];
    g[0] = 1.0;
    for k in 1..f.len() {
        let kf = k as f64;
        g[k] = (1..=k).map(|j| ((alpha + 1.0) * j as f64 - kf) * f[j] * g[k - j]).sum::<f64>() / kf;
    }
    g
}

/// Taylor coefficients b_{2j}, j = 0..=N, of the even function m(w).
pub fn m_taylor_coeffs(a: f64, big_n: usize) -> Result<Vec<f64>> {
    if !(a > 0.0 && a <= 2.0) {
        return Err(Error::Domain(format!("need 0 < a <= 2, got {a}")));
    }
    let len = big_n + 1;
    // In u = w²: m = (1-u)^{1/a-1} (L(u)/u)^{-1/2}, L(u)/u = Σ u^k/(k+1).
    let c = 1.0 / a - 1.0;
    let mut binom = vec![1.0; len];
    for k in 1..len {
        binom[k] = binom[k - 1] * -(c - k as f64 + 1.0) / k as f64;
    }
    let log_ratio: Vec<f64> = (0..len).map(|k| 1.0 / (k as f64 + 1.0)).collect();
    Ok(series_mul(&binom, &series_pow(&log_ratio, -0.5)))
}

/// d_r = ∫₀^∞ e^{-t²} t^{2r} dt = Γ(r+½)/2.
pub fn d_moment(r: usize) -> f64 {
    0.5 * ln_gamma(r as f64 + 0.5).unwrap().exp()
}

/// The coefficient data of the g_a expansion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaCoefficients {
    pub a: f64,
    /// b_{2j}, j = 0..=N.
    pub b: Vec<f64>,
    /// d_r, r = 0..=N+s_max.
    pub d: Vec<f64>,
    /// a1s[s][j] = a_{j,s}, with a_{0,s} = 1.
    pub a1s: Vec<Vec<f64>>,
}

impl GaCoefficients {
    pub fn new(a: f64, big_n: usize, s_max: usize) -> Result<Self> {
        let b = m_taylor_coeffs(a, big_n)?;
        let d: Vec<f64> = (0..=big_n + s_max).map(d_moment).collect();
        let binom = |s: usize, k: usize| -> f64 { (0..k).fold(1.0, |acc, i| acc * (s - i) as f64 / (i + 1) as f64) };
        // k d_{k-1} with the convention 0 when k = 0.
        let kd = |k: usize, r: usize| if k == 0 { 0.0 } else { k as f64 * d[r - 1] };
        let t = |k: usize, j: usize| -> f64 {
            if j == 0 {
                a * b[0] * (d[k] - kd(k, k))
            } else {
                a * (b[j] - b[j - 1]) * (d[j + k] - kd(k, j + k)) + b[j - 1] * d[k + j - 1]
            }
        };
        let a1s = (0..=s_max)
            .map(|s| {
                (0..=big_n)
                    .map(|jj| {
                        let sum: f64 = (0..=jj.min(s))
                            .map(|k| {
                                let sign = if k % 2 == 0 { 1.0 } else { -1.0 };
                                binom(s, k) * sign * t(k, jj - k)
                            })
                            .sum();
                        sum / (a * d[0])
                    })
                    .collect()
            })
            .collect();
        Ok(Self { a, b, d, a1s })
    }

    pub fn order(&self) -> usize {
        self.b.len() - 1
    }

    pub fn a_coeff(&self, j: usize, s: usize) -> f64 {
        self.a1s[s][j]
    }
}

/// √a √z e^z [1 + a_{1,s}/z + … + a_{N,s}/z^N].
pub fn g_derivative_asymptotic(a: f64, s: usize, z: Complex64, big_n: usize, coeffs: &GaCoefficients) -> Result<Complex64> {
    if coeffs.a != a {
        return Err(Error::Domain("coefficient table built for a different a".into()));
    }
    if s >= coeffs.a1s.len() || big_n > coeffs.order() {
        return Err(Error::Domain(format!("table too small for s = {s}, N = {big_n}")));
    }
    if !(z.re > 0.0) {
        return Err(Error::Domain("asymptotic form requires Re z > 0".into()));
    }
    let inv = 1.0 / z;
    let mut sum = Complex64::new(0.0, 0.0);
    let mut pw = Complex64::new(1.0, 0.0);
    for j in 0..=big_n {
        sum += pw * coeffs.a_coeff(j, s);
        pw *= inv;
    }
    Ok(sum * z.sqrt() * z.exp() * a.sqrt())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Region {
    W,
    V,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RegionTag {
    pub tag: Region,
    pub c: f64,
}

/// W if C Re(x·z)/|z| ≥ 1, V otherwise.
pub fn region_classify(x: &SpherePoint, z: &[Complex64], c: f64) -> Result<RegionTag> {
    if !(c > 1.0) {
        return Err(Error::Domain(format!("region constant must exceed 1, got {c}")));
    }
    let r = norm(z);
    if r == 0.0 {
        return Err(Error::Domain("z must be nonzero".into()));
    }
    let tag = if c * dot(&x.x, z).re / r >= 1.0 { Region::W } else { Region::V };
    Ok(RegionTag { tag, c })
}

/// Result of sampling the V_z bound on g_a^{(s)}.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VBoundReport {
    /// Largest ratio |g^{(s)}| / bound-shape per ħ.
    pub fit: AsymptoticFit,
    /// Smallest constant C₁ making the bound hold on every sample.
    pub c1: f64,
    pub mu: f64,
    pub samples: usize,
    /// Ratios do not grow as ħ decreases.
    pub bounded: bool,
}

/// Samples x ∈ V_z and measures |g_a^{(s)}(x·z/ħ)| against
/// (1/ħ) e^{|z|/ħ} e^{μ|z|/ħ} (|z|/ħ + 1), μ = 1/C - 1.
pub fn v_region_bound_check(
    params: &Params,
    z: &[Complex64],
    c: f64,
    s: usize,
    hbar_grid: &[f64],
    samples: usize,
    seed: u64,
) -> Result<VBoundReport> {
    let a = params.g_parameter()?;
    if hbar_grid.is_empty() {
        return Err(Error::Domain("empty hbar grid".into()));
    }
    let r = norm(z);
    let mu = 1.0 / c - 1.0;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pts = Vec::with_capacity(samples);
    let mut guard = 0usize;
    while pts.len() < samples && guard < 1000 * samples.max(1) {
        guard += 1;
        let x = sample_uniform(params.n, &mut rng);
        if region_classify(&x, z, c)?.tag == Region::V {
            pts.push(dot(&x.x, z));
        }
    }
    // The points orthogonal to z always lie in V.
    pts.push(Complex64::new(0.0, 0.0));
    let ctl = SeriesControl::default();
    let mut ratios = Vec::with_capacity(hbar_grid.len());
    for &h in hbar_grid {
        let rh = r / h;
        let ln_shape = -h.ln() + rh * (1.0 + mu) + (rh + 1.0).ln();
        let mut worst: f64 = 0.0;
        for &xz in &pts {
            let g = g_derivative(a, s, xz / h, &ctl)?;
            worst = worst.max((g.norm().ln() - ln_shape).exp());
        }
        ratios.push(worst);
    }
    let c1 = ratios.iter().cloned().fold(0.0, f64::max);
    let bounded = ratios.iter().all(|v| v.is_finite()) && ratios.last().unwrap() <= &(2.0 * ratios[0]);
    Ok(VBoundReport { fit: AsymptoticFit::power_law(hbar_grid, &ratios)?, c1, mu, samples: pts.len(), bounded })
}

/// K_{n,-1}(x,z) ≈ [x·z/(ħ(n-1))]^{1/2} e^{x·z/ħ} [1 + a₁ħ/(x·z)], a₁ = ½(n - 5/4).
pub fn k_minus1_asymptotic(params: &Params, x: &SpherePoint, z: &[Complex64], order: usize, c: f64) -> Result<Complex64> {
    let a = params.g_parameter()?;
    if order > 1 {
        return Err(Error::Unsupported(format!("order {order} (only 0 and 1)")));
    }
    let tag = region_classify(x, z, c)?;
    if tag.tag != Region::W {
        return Err(Error::RegionViolation(c * dot(&x.x, z).re / norm(z)));
    }
    let xz = dot(&x.x, z);
    let zeta = xz / params.hbar;
    let lead = (zeta * a).sqrt() * zeta.exp();
    if order == 0 {
        return Ok(lead);
    }
    let a1 = 0.5 * (params.n as f64 - 1.25);
    Ok(lead * (1.0 + a1 * params.hbar / xz))
}
