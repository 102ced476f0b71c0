//! Convergence-order fits and small least-squares problems.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// A measured sequence against a grid (ħ or z) with its fitted power law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticFit {
    pub grid: Vec<f64>,
    pub values: Vec<f64>,
    /// Exponent q in values ≈ C·grid^q.
    pub slope: f64,
    /// The prefactor C.
    pub coefficient: f64,
    /// Residuals of the log-log fit.
    pub residuals: Vec<f64>,
}

impl AsymptoticFit {
    /// Fits log|values| against log(grid).
    pub fn power_law(grid: &[f64], values: &[f64]) -> Result<Self> {
        let (slope, intercept, residuals) = loglog_fit(grid, values)?;
        Ok(Self {
            grid: grid.to_vec(),
            values: values.to_vec(),
            slope,
            coefficient: intercept.exp(),
            residuals,
        })
    }

    /// True when every value sits below `floor`, i.e. the quantity is zero
    /// to working precision and no slope can be measured.
    pub fn below_floor(&self, floor: f64) -> bool {
        self.values.iter().all(|v| v.abs() <= floor)
    }
}

fn loglog_fit(x: &[f64], y: &[f64]) -> Result<(f64, f64, Vec<f64>)> {
    if x.len() != y.len() || x.len() < 2 {
        return Err(Error::Domain("need at least two paired points for a fit".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.abs().max(f64::MIN_POSITIVE).ln()).collect();
    let (b, a) = linear_fit(&lx, &ly);
    let res = lx.iter().zip(&ly).map(|(u, v)| v - (a + b * u)).collect();
    Ok((b, a, res))
}

/// Ordinary least squares y ≈ a + b x; returns (b, a).
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let m = x.len() as f64;
    let mx = x.iter().sum::<f64>() / m;
    let my = y.iter().sum::<f64>() / m;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx).powi(2)).sum();
    let b = sxy / sxx;
    (b, my - b * mx)
}

/// Least-squares solution of `rows · c ≈ y`.
pub fn least_squares(rows: &[Vec<f64>], y: &[f64]) -> Result<Vec<f64>> {
    let m = rows.len();
    let k = rows.first().map_or(0, Vec::len);
    if m < k || k == 0 || y.len() != m {
        return Err(Error::Domain(format!("least squares needs m >= k > 0 (m={m}, k={k})")));
    }
    let a = DMatrix::from_fn(m, k, |i, j| rows[i][j]);
    let b = DVector::from_column_slice(y);
    let svd = a.svd(true, true);
    let sol = svd.solve(&b, 1e-14).map_err(|e| Error::Domain(e.to_string()))?;
    Ok(sol.iter().copied().collect())
}

/// Fits y(x) ≈ Σ_{j=1}^{terms} c_j x^{-j} and returns the c_j.
pub fn inverse_power_fit(x: &[f64], y: &[f64], terms: usize) -> Result<Vec<f64>> {
    let rows: Vec<Vec<f64>> = x.iter().map(|&v| (1..=terms).map(|j| v.powi(-(j as i32))).collect()).collect();
    least_squares(&rows, y)
}

/// Fits y(h) ≈ c₀ + c₁ h + … + c_{deg} h^{deg}.
pub fn polynomial_fit(h: &[f64], y: &[f64], deg: usize) -> Result<Vec<f64>> {
    let rows: Vec<Vec<f64>> = h.iter().map(|&v| (0..=deg).map(|j| v.powi(j as i32)).collect()).collect();
    least_squares(&rows, y)
}
