//! Truncated multivariate Taylor polynomials around the origin.

use std::collections::BTreeMap;

use num_complex::Complex64;

type Exponent = Vec<u8>;

#[derive(Debug, Clone, PartialEq)]
pub struct Jet {
    dim: usize,
    max_degree: usize,
    terms: BTreeMap<Exponent, Complex64>,
}

impl Jet {
    pub fn zero(dim: usize, max_degree: usize) -> Self {
        Self { dim, max_degree, terms: BTreeMap::new() }
    }

    pub fn constant(dim: usize, max_degree: usize, c: Complex64) -> Self {
        let mut j = Self::zero(dim, max_degree);
        j.add_term(vec![0; dim], c);
        j
    }

    /// The coordinate t_i.
    pub fn variable(dim: usize, max_degree: usize, i: usize) -> Self {
        let mut e = vec![0; dim];
        e[i] = 1;
        let mut j = Self::zero(dim, max_degree);
        j.add_term(e, Complex64::new(1.0, 0.0));
        j
    }

    /// Σ_k coeffs[k] t_i^k.
    pub fn univariate(dim: usize, max_degree: usize, i: usize, coeffs: &[f64]) -> Self {
        let mut j = Self::zero(dim, max_degree);
        for (k, &c) in coeffs.iter().enumerate().take(max_degree + 1) {
            let mut e = vec![0; dim];
            e[i] = k as u8;
            j.add_term(e, Complex64::new(c, 0.0));
        }
        j
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn max_degree(&self) -> usize {
        self.max_degree
    }

    pub fn add_term(&mut self, e: Exponent, c: Complex64) {
        if e.iter().map(|&k| k as usize).sum::<usize>() > self.max_degree || c == Complex64::new(0.0, 0.0) {
            return;
        }
        let v = self.terms.entry(e.clone()).or_insert(Complex64::new(0.0, 0.0));
        *v += c;
        if *v == Complex64::new(0.0, 0.0) {
            self.terms.remove(&e);
        }
    }

    pub fn coefficient(&self, e: &[u8]) -> Complex64 {
        self.terms.get(e).copied().unwrap_or(Complex64::new(0.0, 0.0))
    }

    pub fn constant_term(&self) -> Complex64 {
        self.coefficient(&vec![0; self.dim])
    }

    /// Lowest degree carrying a nonzero coefficient.
    pub fn order(&self) -> Option<usize> {
        self.terms.keys().map(|e| e.iter().map(|&k| k as usize).sum()).min()
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let mut out = Self::zero(self.dim, self.max_degree);
        for (e, c) in &self.terms {
            out.add_term(e.clone(), c * s);
        }
        out
    }

    pub fn add(&self, other: &Self) -> Self {
        let mut out = self.clone();
        out.max_degree = self.max_degree.min(other.max_degree);
        out.terms.retain(|e, _| e.iter().map(|&k| k as usize).sum::<usize>() <= out.max_degree);
        for (e, c) in &other.terms {
            out.add_term(e.clone(), *c);
        }
        out
    }

    pub fn mul(&self, other: &Self) -> Self {
        let max_degree = self.max_degree.min(other.max_degree);
        let mut out = Self::zero(self.dim, max_degree);
        for (ea, ca) in &self.terms {
            let da: usize = ea.iter().map(|&k| k as usize).sum();
            for (eb, cb) in &other.terms {
                let db: usize = eb.iter().map(|&k| k as usize).sum();
                if da + db > max_degree {
                    continue;
                }
                let e: Exponent = ea.iter().zip(eb).map(|(a, b)| a + b).collect();
                out.add_term(e, ca * cb);
            }
        }
        out
    }

    pub fn pow(&self, k: usize) -> Self {
        (0..k).fold(Self::constant(self.dim, self.max_degree, Complex64::new(1.0, 0.0)), |acc, _| acc.mul(self))
    }

    /// Σ_i ∂²/∂t_i²; the result keeps the same nominal truncation degree.
    pub fn laplacian(&self) -> Self {
        let mut out = Self::zero(self.dim, self.max_degree);
        for (e, c) in &self.terms {
            for i in 0..self.dim {
                let k = e[i] as f64;
                if e[i] >= 2 {
                    let mut f = e.clone();
                    f[i] -= 2;
                    out.add_term(f, c * (k * (k - 1.0)));
                }
            }
        }
        out
    }

    pub fn eval(&self, t: &[f64]) -> Complex64 {
        self.terms
            .iter()
            .map(|(e, c)| c * e.iter().zip(t).map(|(&k, x)| x.powi(k as i32)).product::<f64>())
            .sum()
    }
}

/// Taylor coefficients of cos t up to degree `deg`.
pub fn cos_coeffs(deg: usize) -> Vec<f64> {
    let mut out = vec![0.0; deg + 1];
    let mut fact = 1.0;
    for k in 0..=deg {
        if k > 0 {
            fact *= k as f64;
        }
        if k % 2 == 0 {
            out[k] = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 } / fact;
        }
    }
    out
}

/// Taylor coefficients of sin t up to degree `deg`.
pub fn sin_coeffs(deg: usize) -> Vec<f64> {
    let mut out = vec![0.0; deg + 1];
    let mut fact = 1.0;
    for k in 0..=deg {
        if k > 0 {
            fact *= k as f64;
        }
        if k % 2 == 1 {
            out[k] = if (k / 2) % 2 == 0 { 1.0 } else { -1.0 } / fact;
        }
    }
    out
}
