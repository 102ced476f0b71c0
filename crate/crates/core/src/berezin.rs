//! Covariant symbols and the Berezin transform on S^n.

use std::fmt;
use std::sync::Arc;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coherent_family::{c_coeff, CoherentFamily, Params};
use crate::error::{Error, Result};
use crate::fd;
use crate::fit::{least_squares, AsymptoticFit};
use crate::specfun::{bessel_i, bessel_i_ratio, ln_gamma, principal_pow, SeriesControl};
use crate::sphere_geom::{dot, norm, upsilon, upsilon_inv, ComplexVec, MultiIndex, QuadSpec, SpecialUnitary, SphereGrid, SpherePoint};

type SymbolFn = dyn Fn(&[Complex64]) -> Complex64 + Send + Sync;

/// A smooth function on S^n, evaluated on complex coordinates.
#[derive(Clone)]
pub enum SymbolFunction {
    Monomial(MultiIndex),
    General(Arc<SymbolFn>),
}

impl fmt::Debug for SymbolFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Monomial(k) => write!(f, "Monomial({:?})", k.0),
            Self::General(_) => write!(f, "General(..)"),
        }
    }
}

impl SymbolFunction {
    pub fn monomial(k: MultiIndex) -> Self {
        Self::Monomial(k)
    }

    pub fn general<F>(f: F) -> Self
    where
        F: Fn(&[Complex64]) -> Complex64 + Send + Sync + 'static,
    {
        Self::General(Arc::new(f))
    }

    pub fn constant(c: f64) -> Self {
        Self::general(move |_| Complex64::new(c, 0.0))
    }

    /// |x_j|².
    pub fn abs_sq(j: usize) -> Self {
        Self::general(move |x| Complex64::new(x[j].norm_sqr(), 0.0))
    }

    /// x_i x̄_j + x_j x̄_i.
    pub fn hermitian_pair(i: usize, j: usize) -> Self {
        Self::general(move |x| x[i] * x[j].conj() + x[j] * x[i].conj())
    }

    pub fn eval(&self, x: &[Complex64]) -> Complex64 {
        match self {
            Self::Monomial(k) => k.monomial(x),
            Self::General(f) => f(x),
        }
    }

    /// φ∘U.
    pub fn compose(&self, u: &SpecialUnitary) -> Self {
        let inner = self.clone();
        let u = u.clone();
        Self::general(move |x| inner.eval(&u.apply(x)))
    }

    /// The degree-0 homogeneous extension F(y) = φ(Υ⁻¹y/|y|) to R^{2n} ∖ {0}.
    pub fn homogeneous(&self, y: &[f64]) -> Complex64 {
        let r = y.iter().map(|v| v * v).sum::<f64>().sqrt();
        let x: ComplexVec = upsilon_inv(y).into_iter().map(|c| c / r).collect();
        self.eval(&x)
    }
}

/// Report of an ħ-expansion check.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExpansionReport {
    /// Strictly decreasing ħ values.
    pub grid: Vec<f64>,
    /// The computed quantity at each ħ.
    pub values: Vec<Complex64>,
    pub leading: Complex64,
    pub first_order_pred: Complex64,
    /// |value - leading - ħ·first_order_pred| at each ħ.
    pub residuals: Vec<f64>,
    pub fitted_slope: f64,
    /// Best constant term ĉ; `None` when φ(z/|z|) = 0 leaves it undetermined.
    pub fitted_constant: Option<f64>,
    /// Residuals sit at rounding level throughout, so no slope is measurable.
    pub vanishing: bool,
}

impl ExpansionReport {
    pub fn passes_slope(&self, lo: f64, hi: f64) -> bool {
        self.vanishing || (self.fitted_slope >= lo && self.fitted_slope <= hi)
    }
}

/// Residual level below which an expansion check counts as identically satisfied.
pub const VANISHING_FLOOR: f64 = 1e-12;

pub fn validate_grid(grid: &[f64]) -> Result<()> {
    if grid.len() < 3 {
        return Err(Error::Domain(format!("need at least 3 hbar values, got {}", grid.len())));
    }
    if grid.iter().any(|h| !(*h > 0.0)) || grid.windows(2).any(|w| w[1] >= w[0]) {
        return Err(Error::Domain("hbar grid must be positive and strictly decreasing".into()));
    }
    Ok(())
}

pub fn default_hbar_grid() -> Vec<f64> {
    vec![0.4, 0.283, 0.2, 0.141, 0.1]
}

/// The constant -¼(2n-1)(2n-3) stated alongside the p = 0 operator.
pub fn stated_constant_p0(n: usize) -> f64 {
    let n = n as f64;
    -0.25 * (2.0 * n - 1.0) * (2.0 * n - 3.0)
}

/// ⟨x^k K(·,z), K(·,w)⟩ / ⟨K(·,z), K(·,w)⟩ through the closed-form series.
pub fn covariant_symbol_monomial(params: &Params, k: &MultiIndex, w: &[Complex64], z: &[Complex64], ctl: &SeriesControl) -> Result<Complex64> {
    params.validate()?;
    ctl.validate()?;
    let h = params.hbar;
    let v = dot(w, z) / (h * h);
    if v.norm() == 0.0 {
        return Err(Error::Domain("z.w must be nonzero".into()));
    }
    if v.im == 0.0 && v.re < 0.0 {
        return Err(Error::Branch("w.z lies on the negative real axis (Arg = pi)".into()));
    }
    let m = k.total();
    if m == 0 {
        return Ok(Complex64::new(1.0, 0.0));
    }
    let n = params.n as f64;
    let np = params.np();
    let mf = m as f64;
    let mut term = Complex64::new((-ln_gamma(mf + np)?).exp() / c_coeff(params, m), 0.0);
    let mut sum = term;
    let mut converged = false;
    for l in 0..ctl.max_terms {
        let lf = l as f64;
        let ratio = ((n + lf) / (np + lf) * (np + mf + lf) / (n + mf + lf)).sqrt();
        term *= v * (ratio / ((lf + 1.0) * (mf + lf + np)));
        sum += term;
        if lf > v.norm().sqrt() && term.norm() <= ctl.rel_tol * sum.norm() {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::NonConvergence { terms: ctl.max_terms, last_rel: term.norm() / sum.norm() });
    }
    let nu = np - 1.0;
    let bess = bessel_i(nu, v.sqrt() * 2.0, ctl)?;
    if bess.norm() == 0.0 || !bess.is_finite() {
        return Err(Error::Domain(format!("I_nu(2 sqrt(w.z)/hbar) = {bess} cannot be divided by")));
    }
    let wh: ComplexVec = w.iter().map(|c| c / h).collect();
    let out = principal_pow(v, 0.5 * nu)? / bess * k.monomial(&wh) * sum;
    if !out.is_finite() {
        return Err(Error::Overflow(format!("covariant symbol at |w.z|/hbar^2 = {}", v.norm())));
    }
    Ok(out)
}

/// (z/|z|)^k I_{n+|k|-1}(2|z|/ħ) / I_{n-1}(2|z|/ħ).
pub fn berezin_monomial_p0(params: &Params, k: &MultiIndex, z: &[Complex64]) -> Result<Complex64> {
    if params.p != 0.0 {
        return Err(Error::Domain("closed form holds for p = 0".into()));
    }
    let r = norm(z);
    if r == 0.0 {
        return Err(Error::Domain("z must be nonzero".into()));
    }
    let ctl = SeriesControl::default();
    let x = Complex64::new(2.0 * r / params.hbar, 0.0);
    let n = params.n as f64;
    let m = k.total();
    let dir: ComplexVec = z.iter().map(|c| c / r).collect();
    if m == 0 {
        return Ok(Complex64::new(1.0, 0.0));
    }
    Ok(k.monomial(&dir) * bessel_i_ratio(n - 1.0, m, x.re, &ctl)?)
}

/// (z/|z|)^k (1 - |k|(|k|+2n-2)ħ/(4|z|)).
pub fn berezin_monomial_p0_asymptotic(params: &Params, k: &MultiIndex, z: &[Complex64]) -> Result<Complex64> {
    let r = norm(z);
    if r == 0.0 {
        return Err(Error::Domain("z must be nonzero".into()));
    }
    let dir: ComplexVec = z.iter().map(|c| c / r).collect();
    let m = k.total() as f64;
    let n = params.n as f64;
    Ok(k.monomial(&dir) * (1.0 - m * (m + 2.0 * n - 2.0) * params.hbar / (4.0 * r)))
}

/// Columns of a unitary matrix whose first column is z/|z|.
pub fn unitary_frame(z: &[Complex64]) -> Result<Vec<ComplexVec>> {
    let r = norm(z);
    if r == 0.0 {
        return Err(Error::Domain("z must be nonzero".into()));
    }
    let n = z.len();
    let mut cols: Vec<ComplexVec> = vec![z.iter().map(|c| c / r).collect()];
    // Start from the basis vectors least aligned with z.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| z[a].norm().partial_cmp(&z[b].norm()).unwrap());
    for &e in &order {
        if cols.len() == n {
            break;
        }
        let mut v = vec![Complex64::new(0.0, 0.0); n];
        v[e] = Complex64::new(1.0, 0.0);
        for _ in 0..2 {
            for c in &cols {
                let proj = dot(&v, c);
                for (vi, ci) in v.iter_mut().zip(c) {
                    *vi -= proj * ci;
                }
            }
        }
        let nv = norm(&v);
        if nv > 1e-8 {
            cols.push(v.into_iter().map(|c| c / nv).collect());
        }
    }
    Ok(cols)
}

fn apply_frame(cols: &[ComplexVec], xp: &[Complex64], out: &mut [Complex64]) {
    out.iter_mut().for_each(|o| *o = Complex64::new(0.0, 0.0));
    for (c, &s) in cols.iter().zip(xp) {
        for (o, ci) in out.iter_mut().zip(c) {
            *o += ci * s;
        }
    }
}

/// Minimum nodes per angle for a peak of width √ħ.
pub fn resolution_floor(hbar: f64) -> usize {
    (8.0 / hbar.sqrt()).ceil() as usize
}

pub fn check_resolution(spec: &QuadSpec, hbar: f64) -> Result<()> {
    let need = resolution_floor(hbar);
    if spec.nodes_per_angle < need {
        return Err(Error::Resolution(format!("nodes_per_angle = {} < 8/sqrt(hbar) = {need}", spec.nodes_per_angle)));
    }
    Ok(())
}

/// Node-count policy for ħ sweeps: stretched grids with
/// max(min_nodes, ⌈per_root/√ħ⌉) nodes per angle.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadPolicy {
    pub min_nodes: usize,
    pub per_root: f64,
}

impl QuadPolicy {
    pub fn for_dim(n: usize) -> Self {
        if n <= 2 {
            Self { min_nodes: 32, per_root: 12.0 }
        } else {
            Self { min_nodes: 16, per_root: 8.0 }
        }
    }

    pub fn spec(&self, hbar: f64) -> QuadSpec {
        let m = self.min_nodes.max((self.per_root / hbar.sqrt()).ceil() as usize).max(resolution_floor(hbar));
        QuadSpec::stretched(m, hbar)
    }
}

/// ∫ φ |K(·,z)|² dS / ∫ |K(·,z)|² dS on a grid rotated so that z/|z| sits at ê₁.
pub fn berezin_numeric(params: &Params, phi: &SymbolFunction, z: &[Complex64], spec: &QuadSpec, ctl: &SeriesControl) -> Result<Complex64> {
    params.validate()?;
    check_resolution(spec, params.hbar)?;
    let r = norm(z);
    if r == 0.0 {
        return Err(Error::Domain("z must be nonzero".into()));
    }
    if z.len() != params.n {
        return Err(Error::Domain(format!("z has {} components, expected {}", z.len(), params.n)));
    }
    let fam = CoherentFamily::new(*params, *ctl)?;
    let frame = unitary_frame(z)?;
    let grid = SphereGrid::new(params.n, spec)?;
    let rh = r / params.hbar;
    let failed = std::sync::atomic::AtomicBool::new(false);
    let sums = grid.integrate_many(2, |xp, out| {
        let k = match fam.eval_scalar(xp.x[0] * rh) {
            Ok(v) => v.value * (-rh).exp(),
            Err(_) => {
                failed.store(true, std::sync::atomic::Ordering::Relaxed);
                return;
            }
        };
        let w = k.norm_sqr();
        let mut x = vec![Complex64::new(0.0, 0.0); params.n];
        apply_frame(&frame, &xp.x, &mut x);
        out[0] = phi.eval(&x) * w;
        out[1] = Complex64::new(w, 0.0);
    });
    if failed.into_inner() {
        return Err(Error::NonConvergence { terms: ctl.max_terms, last_rel: f64::NAN });
    }
    Ok(sums[0] / sums[1])
}

/// Derivatives of F(y) = φ(y/|y|) at y = Υ(z/|z|).
#[derive(Debug, Clone, PartialEq)]
pub struct FirstOrderTerms {
    pub value: Complex64,
    pub laplacian: Complex64,
    /// R F, zero for the homogeneous extension.
    pub radial: Complex64,
    pub radial_sq: Complex64,
    pub at_point: Complex64,
}

/// (1/(4r)) [4Δ_{xx̄} - R² - (2n-2)R + constant_term] F at z/|z|, with the
/// real Laplacian standing in for 4Δ_{xx̄}.
pub fn first_order_operator(params: &Params, phi: &SymbolFunction, z: &[Complex64], constant_term: f64, fd_step: f64) -> Result<Complex64> {
    Ok(first_order_terms(params, phi, z, constant_term, fd_step)?.value)
}

pub fn first_order_terms(params: &Params, phi: &SymbolFunction, z: &[Complex64], constant_term: f64, fd_step: f64) -> Result<FirstOrderTerms> {
    fd::validate_step(fd_step)?;
    let r = norm(z);
    if r == 0.0 {
        return Err(Error::Domain("z must be nonzero".into()));
    }
    let y0: Vec<f64> = upsilon(z).into_iter().map(|v| v / r).collect();
    let f = |y: &[f64]| phi.homogeneous(y);
    let g = fd::gradient(&f, &y0, fd_step);
    let hs = fd::hessian(&f, &y0, fd_step);
    let lap: Complex64 = (0..y0.len()).map(|i| hs[i][i]).sum();
    let radial: Complex64 = y0.iter().zip(&g).map(|(y, g)| g * *y).sum();
    let mut radial_sq = radial;
    for (i, yi) in y0.iter().enumerate() {
        for (j, yj) in y0.iter().enumerate() {
            radial_sq += hs[i][j] * (yi * yj);
        }
    }
    let at_point = f(&y0);
    let n = params.n as f64;
    let value = (lap - radial_sq - radial * (2.0 * n - 2.0) + at_point * constant_term) / (4.0 * r);
    Ok(FirstOrderTerms { value, laplacian: lap, radial, radial_sq, at_point })
}

/// Berezin transform over an ħ grid against the first-order prediction.
pub fn expansion_check(
    params: &Params,
    phi: &SymbolFunction,
    z: &[Complex64],
    hbar_grid: &[f64],
    constant_term: f64,
    policy: &QuadPolicy,
) -> Result<ExpansionReport> {
    validate_grid(hbar_grid)?;
    let r = norm(z);
    if r == 0.0 {
        return Err(Error::Domain("z must be nonzero".into()));
    }
    let dir: ComplexVec = z.iter().map(|c| c / r).collect();
    let leading = phi.eval(&dir);
    let terms = first_order_terms(params, phi, z, constant_term, fd::DEFAULT_STEP)?;
    let pred = terms.value;
    let pred0 = first_order_operator(params, phi, z, 0.0, fd::DEFAULT_STEP)?;
    let ctl = SeriesControl::default();
    let values = hbar_grid
        .par_iter()
        .map(|&h| berezin_numeric(&params.with_hbar(h), phi, z, &policy.spec(h), &ctl))
        .collect::<Result<Vec<_>>>()?;
    let residuals: Vec<f64> = hbar_grid.iter().zip(&values).map(|(h, b)| (b - leading - pred * *h).norm()).collect();
    // Least squares for ĉ in B - φ ≈ ħ (pred0 + ĉ F/(4r)) + ħ² d with real d,
    // real and imaginary parts stacked.
    let basis = terms.at_point / (4.0 * r);
    let fitted_constant = if basis.norm() < 1e-12 {
        None
    } else {
        let mut rows = Vec::with_capacity(2 * hbar_grid.len());
        let mut rhs = Vec::with_capacity(2 * hbar_grid.len());
        for (h, v) in hbar_grid.iter().zip(&values) {
            let e = v - leading - pred0 * *h;
            let bb = basis * *h;
            rows.push(vec![bb.re, h * h]);
            rhs.push(e.re);
            rows.push(vec![bb.im, 0.0]);
            rhs.push(e.im);
        }
        Some(least_squares(&rows, &rhs)?[0])
    };
    let vanishing = residuals.iter().all(|v| *v <= VANISHING_FLOOR);
    let fitted_slope = AsymptoticFit::power_law(hbar_grid, &residuals)?.slope;
    Ok(ExpansionReport { grid: hbar_grid.to_vec(), values, leading, first_order_pred: pred, residuals, fitted_slope, fitted_constant, vanishing })
}

/// |B(φ∘U)(U⁻¹z) - B(φ)(z)|.
pub fn su_invariance_check(params: &Params, phi: &SymbolFunction, z: &[Complex64], u: &SpecialUnitary, spec: &QuadSpec) -> Result<f64> {
    let check = SpecialUnitary::new(u.rows().to_vec())?;
    let ctl = SeriesControl::default();
    let lhs = berezin_numeric(params, &phi.compose(&check), &check.inverse().apply(z), spec, &ctl)?;
    let rhs = berezin_numeric(params, phi, z, spec, &ctl)?;
    Ok((lhs - rhs).norm())
}

/// ⟨x^k K(·,z), K(·,w)⟩ / ⟨K(·,z), K(·,w)⟩ by direct quadrature.
pub fn covariant_symbol_quadrature(params: &Params, k: &MultiIndex, w: &[Complex64], z: &[Complex64], spec: &QuadSpec) -> Result<Complex64> {
    let fam = CoherentFamily::new(*params, SeriesControl::default())?;
    let grid = SphereGrid::new(params.n, spec)?;
    let sums = grid.integrate_many(2, |x: &SpherePoint, out| {
        let kk = fam.eval(&x.x, z).unwrap_or_default() * fam.eval(&x.x, w).unwrap_or_default().conj();
        out[0] = k.monomial(&x.x) * kk;
        out[1] = kk;
    });
    Ok(sums[0] / sums[1])
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn e1(n: usize, r: f64) -> Vec<Complex64> {
        let mut z = vec![c(0.0, 0.0); n];
        z[0] = c(r, 0.0);
        z
    }

    #[test]
    fn p0_closed_form_values() {
        let params = Params::new(2, 0.0, 1.0).unwrap();
        let z = e1(2, 1.0);
        let k = MultiIndex::unit(2, 0);
        let v = berezin_monomial_p0(&params, &k, &z).unwrap();
        assert!((v.re - 0.433_127_426_722_311_76).abs() < 1e-14 && v.im == 0.0);
        assert_eq!(berezin_monomial_p0(&params, &MultiIndex::zero(2), &z).unwrap(), c(1.0, 0.0));
        let small = berezin_monomial_p0(&params.with_hbar(1e-3), &k, &z).unwrap();
        assert!((small.re - (1.0 - 0.75e-3)).abs() < 1e-6);
        assert!(berezin_monomial_p0(&Params::new(2, -1.0, 1.0).unwrap(), &k, &z).is_err());
    }

    #[test]
    fn asymptotic_coefficient() {
        let params = Params::new(2, 0.0, 1.0).unwrap();
        let z = e1(2, 1.0);
        let k = MultiIndex::unit(2, 0);
        let a = berezin_monomial_p0_asymptotic(&params, &k, &z).unwrap();
        assert!((a.re - 0.25).abs() < 1e-15);
        assert_eq!(berezin_monomial_p0_asymptotic(&params, &MultiIndex::zero(2), &z).unwrap(), c(1.0, 0.0));
    }

    #[test]
    fn corollary_order_two() {
        let z = [c(0.6, 0.3), c(0.2, -0.4)];
        for k in [MultiIndex(vec![1, 0]), MultiIndex(vec![1, 2])] {
            let grid = [0.2, 0.141, 0.1, 0.071, 0.05];
            let errs: Vec<f64> = grid
                .iter()
                .map(|&h| {
                    let p = Params::new(2, 0.0, h).unwrap();
                    (berezin_monomial_p0(&p, &k, &z).unwrap() - berezin_monomial_p0_asymptotic(&p, &k, &z).unwrap()).norm()
                })
                .collect();
            let s = AsymptoticFit::power_law(&grid, &errs).unwrap().slope;
            assert!((1.8..=2.2).contains(&s), "slope {s}");
        }
    }

    #[test]
    fn covariant_symbol_series() {
        let ctl = SeriesControl::default();
        let params = Params::new(2, 0.0, 0.7).unwrap();
        let z = [c(0.6, 0.3), c(0.2, -0.4)];
        for k in [MultiIndex(vec![1, 0]), MultiIndex(vec![2, 1])] {
            let a = covariant_symbol_monomial(&params, &k, &z, &z, &ctl).unwrap();
            let b = berezin_monomial_p0(&params, &k, &z).unwrap();
            assert!((a - b).norm() < 1e-10 * b.norm());
        }
        assert_eq!(covariant_symbol_monomial(&params, &MultiIndex::zero(2), &z, &z, &ctl).unwrap(), c(1.0, 0.0));
        let w = [c(-0.6, -0.3), c(-0.2, 0.4)];
        assert!(matches!(covariant_symbol_monomial(&params, &MultiIndex::unit(2, 0), &w, &z, &ctl), Err(Error::Branch(_))));
    }

    #[test]
    fn covariant_symbol_matches_quadrature() {
        let ctl = SeriesControl::default();
        let z = [c(0.5, 0.2), c(-0.1, 0.6)];
        let w = [c(0.7, -0.1), c(0.2, 0.3)];
        for p in [0.0, -1.0] {
            let params = Params::new(2, p, 0.5).unwrap();
            for k in [MultiIndex(vec![1, 0]), MultiIndex(vec![1, 1]), MultiIndex(vec![0, 3])] {
                let a = covariant_symbol_monomial(&params, &k, &w, &z, &ctl).unwrap();
                let q = covariant_symbol_quadrature(&params, &k, &w, &z, &QuadSpec::gauss(24)).unwrap();
                assert!((a - q).norm() <= 1e-6 * a.norm(), "p={p} k={:?}: {a} vs {q}", k.0);
            }
        }
    }

    #[test]
    fn numeric_berezin_of_one_is_one() {
        let ctl = SeriesControl::default();
        for p in [0.0, -1.0] {
            let params = Params::new(2, p, 0.3).unwrap();
            let v = berezin_numeric(&params, &SymbolFunction::constant(1.0), &[c(0.3, 0.4), c(-0.5, 0.1)], &QuadSpec::gauss(16), &ctl).unwrap();
            assert!((v - 1.0).norm() < 1e-12);
        }
    }

    #[test]
    fn numeric_berezin_matches_closed_form() {
        let ctl = SeriesControl::default();
        let z = [c(0.6, 0.3), c(0.2, -0.4)];
        for h in [1.0, 0.5, 0.2] {
            let params = Params::new(2, 0.0, h).unwrap();
            for k in [MultiIndex(vec![1, 0]), MultiIndex(vec![1, 1]), MultiIndex(vec![0, 3])] {
                let b = berezin_numeric(&params, &SymbolFunction::monomial(k.clone()), &z, &QuadSpec::gauss(24), &ctl).unwrap();
                let want = berezin_monomial_p0(&params, &k, &z).unwrap();
                assert!((b - want).norm() < 1e-6, "h={h} k={:?}: {b} vs {want}", k.0);
            }
        }
    }

    #[test]
    fn resolution_guard() {
        let params = Params::new(2, 0.0, 0.1).unwrap();
        let r = berezin_numeric(&params, &SymbolFunction::constant(1.0), &e1(2, 1.0), &QuadSpec::gauss(20), &SeriesControl::default());
        assert!(matches!(r, Err(Error::Resolution(_))));
    }

    #[test]
    fn first_order_values() {
        let params = Params::new(2, 0.0, 1.0).unwrap();
        let z = e1(2, 1.0);
        let one = first_order_operator(&params, &SymbolFunction::constant(1.0), &z, 0.0, 1e-3).unwrap();
        assert!(one.norm() < 1e-9);
        let x1 = first_order_terms(&params, &SymbolFunction::monomial(MultiIndex::unit(2, 0)), &z, 0.0, 1e-3).unwrap();
        assert!((x1.value - c(-0.75, 0.0)).norm() < 1e-8);
        assert!(x1.radial.norm() < 1e-9);
        assert!(first_order_operator(&params, &SymbolFunction::constant(1.0), &z, 0.0, 0.5).is_err());
        assert!((stated_constant_p0(2) + 0.75).abs() < 1e-15);
    }

    #[test]
    fn first_order_reproduces_corollary_for_monomials() {
        let z = [c(0.6, 0.3), c(0.2, -0.4)];
        let r = norm(&z);
        for n_k in [vec![1, 0], vec![1, 1], vec![2, 1]] {
            let k = MultiIndex(n_k);
            let params = Params::new(2, 0.0, 1.0).unwrap();
            let op = first_order_operator(&params, &SymbolFunction::monomial(k.clone()), &z, 0.0, 1e-3).unwrap();
            let m = k.total() as f64;
            let dir: Vec<Complex64> = z.iter().map(|c| c / r).collect();
            let want = k.monomial(&dir) * (-m * (m + 2.0) / (4.0 * r));
            assert!((op - want).norm() <= 1e-2 * want.norm());
        }
    }

    #[test]
    fn expansion_of_x1() {
        let params = Params::new(2, 0.0, 1.0).unwrap();
        let z = [c(0.6, 0.3), c(0.2, -0.4)];
        let phi = SymbolFunction::monomial(MultiIndex::unit(2, 0));
        let rep = expansion_check(&params, &phi, &z, &default_hbar_grid(), 0.0, &QuadPolicy::for_dim(2)).unwrap();
        assert!(rep.fitted_slope >= 1.8, "slope {}", rep.fitted_slope);
        assert!(rep.fitted_constant.unwrap().abs() < 0.3);
        let one = expansion_check(&params, &SymbolFunction::constant(1.0), &z, &default_hbar_grid(), 0.0, &QuadPolicy::for_dim(2)).unwrap();
        assert!(one.vanishing);
        assert!(one.fitted_constant.unwrap().abs() < 1e-9);
    }

    #[test]
    fn su_invariance() {
        let params = Params::new(2, 0.0, 0.5).unwrap();
        let z = [c(0.6, 0.3), c(0.2, -0.4)];
        let spec = QuadSpec::gauss(24);
        let id = su_invariance_check(&params, &SymbolFunction::abs_sq(0), &z, &SpecialUnitary::identity(2), &spec).unwrap();
        assert!(id < 1e-14);
        let d = su_invariance_check(&params, &SymbolFunction::abs_sq(0), &z, &SpecialUnitary::diagonal_phase(2, 0.7), &spec).unwrap();
        assert!(d < 1e-8);
        let b = su_invariance_check(&params, &SymbolFunction::hermitian_pair(0, 1), &z, &SpecialUnitary::block_rotation(2, 0, 1, 0.4), &spec).unwrap();
        assert!(b < 1e-8);
    }

    #[test]
    fn frame_is_unitary() {
        let z = [c(0.1, 0.2), c(-0.3, 0.5), c(0.0, -0.4)];
        let f = unitary_frame(&z).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                let d = dot(&f[i], &f[j]);
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((d - want).norm() < 1e-14);
            }
        }
    }

    #[test]
    fn rejects_bad_grid() {
        assert!(validate_grid(&[0.4, 0.2]).is_err());
        assert!(validate_grid(&[0.1, 0.2, 0.3]).is_err());
        assert!(validate_grid(&default_hbar_grid()).is_ok());
    }
}
