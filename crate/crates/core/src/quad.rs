//! One-dimensional quadrature rules and deterministic summation.
//!
//! Gauss rules are computed by Newton iteration on the three-term recurrence,
//! the double-exponential rules by trapezoidal refinement in the transformed
//! variable.

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::specfun::ln_gamma;

/// Gauss–Legendre nodes and weights on (-1, 1), nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    gauss_jacobi_sym(n, 0.0)
}

/// Gauss rule for the symmetric Jacobi weight (1 - t^2)^alpha on (-1, 1).
///
/// Nodes are returned in ascending order.
pub fn gauss_jacobi_sym(n: usize, alpha: f64) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "need at least one node");
    assert!(alpha > -1.0, "alpha must exceed -1");
    let mut nodes: Vec<f64> = Vec::with_capacity(n);
    let mut weights = Vec::with_capacity(n);
    let nf = n as f64;
    // Log of the constant Gamma(n+a+1)^2 2^(2a+1) / (Gamma(n+2a+1) n!).
    let ln_c = 2.0 * ln_gamma(nf + alpha + 1.0).unwrap() + (2.0 * alpha + 1.0) * 2f64.ln()
        - ln_gamma(nf + 2.0 * alpha + 1.0).unwrap()
        - ln_gamma(nf + 1.0).unwrap();
    for i in 0..n {
        // Roots in descending order, deflating the ones already found.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75 + 0.5 * alpha) / (nf + alpha + 0.5)).cos();
        for _ in 0..100 {
            let (p, dp, _) = jacobi_sym_eval(n, alpha, x);
            let defl: f64 = nodes.iter().map(|&r| 1.0 / (x - r)).sum();
            let dx = p / (dp - p * defl);
            x -= dx;
            if dx.abs() <= 1e-16 * x.abs().max(1.0) {
                break;
            }
        }
        let (_, dp, _) = jacobi_sym_eval(n, alpha, x);
        nodes.push(x);
        weights.push((ln_c - ((1.0 - x * x) * dp * dp).ln()).exp());
    }
    nodes.reverse();
    weights.reverse();
    // Enforce exact symmetry.
    for i in 0..n / 2 {
        let j = n - 1 - i;
        let x = 0.5 * (nodes[j] - nodes[i]);
        nodes[i] = -x;
        nodes[j] = x;
        let w = 0.5 * (weights[i] + weights[j]);
        weights[i] = w;
        weights[j] = w;
    }
    if n % 2 == 1 {
        nodes[n / 2] = 0.0;
    }
    (nodes, weights)
}

/// P_n^{(a,a)}(x), its derivative and P_{n-1}^{(a,a)}(x).
fn jacobi_sym_eval(n: usize, a: f64, x: f64) -> (f64, f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = (a + 1.0) * x;
    if n == 0 {
        return (1.0, 0.0, 0.0);
    }
    for k in 2..=n {
        let k = k as f64;
        let c = 2.0 * k + 2.0 * a;
        let num = (c - 1.0) * c * (c - 2.0) * x * p1 - 2.0 * (k + a - 1.0).powi(2) * c * p0;
        let den = 2.0 * k * (k + 2.0 * a) * (c - 2.0);
        let p2 = num / den;
        p0 = p1;
        p1 = p2;
    }
    let nf = n as f64;
    let c = 2.0 * nf + 2.0 * a;
    let dp = (-nf * c * x * p1 + 2.0 * (nf + a).powi(2) * p0) / (c * (1.0 - x * x));
    (p1, dp, p0)
}

/// Result of a double-exponential quadrature.
#[derive(Debug, Clone, Copy)]
pub struct DeResult {
    pub value: Complex64,
    /// Difference between the last two refinement levels.
    pub error: f64,
    /// Number of integrand evaluations.
    pub evaluations: usize,
}

/// Trapezoidal rule on [-t_max, t_max] with step halving until the estimate
/// settles. `g` must already contain the transformation Jacobian.
fn de_trapezoid<G: Fn(f64) -> Complex64>(g: G, t_max: f64, tol: f64, max_levels: usize) -> Result<DeResult> {
    let mut h = 0.5;
    let mut sum = Complex64::new(0.0, 0.0);
    let mut abs_sum = 0.0;
    let mut evals = 0;
    let mut k = 0i64;
    loop {
        let t = k as f64 * h;
        if t > t_max {
            break;
        }
        if k == 0 {
            let v = g(0.0);
            sum += v;
            abs_sum += v.norm();
            evals += 1;
        } else {
            let v = g(t) + g(-t);
            sum += v;
            abs_sum += v.norm();
            evals += 2;
        }
        k += 1;
    }
    let mut estimate = sum * h;
    for _ in 0..max_levels {
        h *= 0.5;
        let mut k = 1i64;
        loop {
            let t = k as f64 * h;
            if t > t_max {
                break;
            }
            let v = g(t) + g(-t);
            sum += v;
            abs_sum += v.norm();
            evals += 2;
            k += 2;
        }
        let next = sum * h;
        let err = (next - estimate).norm();
        estimate = next;
        let scale = (abs_sum * h).max(f64::MIN_POSITIVE);
        if err <= tol * scale || err <= tol * estimate.norm() {
            return Ok(DeResult { value: estimate, error: err, evaluations: evals });
        }
    }
    Err(Error::Quadrature(format!("double-exponential rule did not settle within {max_levels} levels")))
}

/// Tanh–sinh quadrature on (a, b).
///
/// The integrand receives `(x, x - a, b - x)` with the two endpoint distances
/// computed without cancellation, so endpoint singularities can be handled.
pub fn tanh_sinh<F>(f: F, a: f64, b: f64, tol: f64) -> Result<DeResult>
where
    F: Fn(f64, f64, f64) -> Complex64,
{
    let half = 0.5 * (b - a);
    let g = |t: f64| {
        let u = std::f64::consts::FRAC_PI_2 * t.sinh();
        // Distance to the nearer endpoint, relative to the half-length.
        let e = 2.0 / (1.0 + (2.0 * u.abs()).exp());
        let cu = u.cosh();
        let w = half * std::f64::consts::FRAC_PI_2 * t.cosh() / (cu * cu);
        if e * half <= 0.0 || !w.is_finite() || w == 0.0 {
            return Complex64::new(0.0, 0.0);
        }
        let (dl, dr) = if u >= 0.0 { ((2.0 - e) * half, e * half) } else { (e * half, (2.0 - e) * half) };
        let x = if u >= 0.0 { b - dr } else { a + dl };
        f(x, dl, dr) * w
    };
    de_trapezoid(g, 4.5, tol, 12)
}

/// Exp–sinh quadrature on (0, infinity) for integrands decaying at infinity.
pub fn exp_sinh<F>(f: F, tol: f64) -> Result<DeResult>
where
    F: Fn(f64) -> Complex64,
{
    let g = |t: f64| {
        let x = (std::f64::consts::FRAC_PI_2 * t.sinh()).exp();
        if x == 0.0 || !x.is_finite() {
            return Complex64::new(0.0, 0.0);
        }
        let w = std::f64::consts::FRAC_PI_2 * t.cosh() * x;
        let v = f(x);
        if v == Complex64::new(0.0, 0.0) {
            return v;
        }
        v * w
    };
    de_trapezoid(g, 4.0, tol, 12)
}

/// Pairwise summation of a slice in a fixed order.
pub fn pairwise_sum(v: &[Complex64]) -> Complex64 {
    const BASE: usize = 8;
    if v.len() <= BASE {
        return v.iter().fold(Complex64::new(0.0, 0.0), |a, &b| a + b);
    }
    let mid = v.len() / 2;
    pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
}

/// Streaming pairwise summation of fixed-length vectors.
///
/// Values are merged like a binary counter, so the rounding pattern depends
/// only on the number of values pushed, never on timing.
#[derive(Debug, Clone)]
pub struct Cascade {
    width: usize,
    levels: Vec<Option<Vec<Complex64>>>,
}

impl Cascade {
    pub fn new(width: usize) -> Self {
        Self { width, levels: Vec::new() }
    }

    pub fn push(&mut self, values: &[Complex64]) {
        debug_assert_eq!(values.len(), self.width);
        let mut carry = values.to_vec();
        for slot in self.levels.iter_mut() {
            match slot.take() {
                None => {
                    *slot = Some(carry);
                    return;
                }
                Some(prev) => {
                    for (c, p) in carry.iter_mut().zip(prev) {
                        *c += p;
                    }
                }
            }
        }
        self.levels.push(Some(carry));
    }

    pub fn total(&self) -> Vec<Complex64> {
        let mut out = vec![Complex64::new(0.0, 0.0); self.width];
        for v in self.levels.iter().flatten() {
            for (o, x) in out.iter_mut().zip(v) {
                *o += x;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn legendre_integrates_polynomials_exactly() {
        let (x, w) = gauss_legendre(6);
        for deg in 0..12 {
            let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(deg)).sum();
            let exact = if deg % 2 == 1 { 0.0 } else { 2.0 / (deg as f64 + 1.0) };
            assert!((q - exact).abs() < 1e-14, "degree {deg}: {q} vs {exact}");
        }
    }

    #[test]
    fn jacobi_weights_sum_to_beta_integral() {
        for &a in &[0.5, 1.0, 1.5, 2.0] {
            for n in [4, 17, 40] {
                let (_, w) = gauss_jacobi_sym(n, a);
                let mu0 = std::f64::consts::PI.sqrt()
                    * (ln_gamma(a + 1.0).unwrap() - ln_gamma(a + 1.5).unwrap()).exp();
                let s: f64 = w.iter().sum();
                assert!((s - mu0).abs() < 1e-13 * mu0, "a={a} n={n}");
            }
        }
    }

    #[test]
    fn jacobi_exact_for_degree_2n_minus_1() {
        // int t^2 (1-t^2)^{1/2} dt = pi/8
        let (x, w) = gauss_jacobi_sym(3, 0.5);
        let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x * x).sum();
        assert!((q - std::f64::consts::PI / 8.0).abs() < 4e-15, "{q}");
        let (x, w) = gauss_jacobi_sym(3, 1.0);
        // int t^4 (1-t^2) dt = 2/5 - 2/7
        let q: f64 = x.iter().zip(&w).map(|(x, w)| w * x.powi(4)).sum();
        assert!((q - (0.4 - 2.0 / 7.0)).abs() < 1e-15);
    }

    #[test]
    fn tanh_sinh_handles_endpoint_singularity() {
        // int_0^1 1/sqrt(1-x) dx = 2
        let r = tanh_sinh(|_, _, dr| Complex64::new(1.0 / dr.sqrt(), 0.0), 0.0, 1.0, 1e-14).unwrap();
        assert!((r.value.re - 2.0).abs() < 1e-12);
    }

    #[test]
    fn exp_sinh_gamma_integral() {
        // int_0^inf x^3 e^-x dx = 6
        let r = exp_sinh(|x| Complex64::new(x.powi(3) * (-x).exp(), 0.0), 1e-14).unwrap();
        assert!((r.value.re - 6.0).abs() < 1e-12);
    }

    #[test]
    fn cascade_matches_pairwise_total() {
        let vals: Vec<Complex64> = (0..1000).map(|i| Complex64::new((i as f64).sin(), 1.0 / (1.0 + i as f64))).collect();
        let mut c = Cascade::new(1);
        for v in &vals {
            c.push(std::slice::from_ref(v));
        }
        let a = c.total()[0];
        let b = pairwise_sum(&vals);
        assert!((a - b).norm() < 1e-12);
    }
}
