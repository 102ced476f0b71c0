//! Central finite differences on functions R^d → C.

use num_complex::Complex64;

use crate::error::{Error, Result};

pub const DEFAULT_STEP: f64 = 1e-3;

/// Accepts steps in the open interval (1e-6, 1e-1).
pub fn validate_step(h: f64) -> Result<()> {
    if h > 1e-6 && h < 1e-1 {
        Ok(())
    } else {
        Err(Error::InvalidStep(h))
    }
}

/// Fornberg weights for the derivative of order `m` at 0 from samples at `offsets`.
pub fn fornberg_weights(offsets: &[f64], m: usize) -> Vec<f64> {
    let n = offsets.len();
    let mut c = vec![vec![0.0; m + 1]; n];
    let mut c1 = 1.0;
    let mut c4 = offsets[0];
    c[0][0] = 1.0;
    for i in 1..n {
        let mn = i.min(m);
        let mut c2 = 1.0;
        let c5 = c4;
        c4 = offsets[i];
        for j in 0..i {
            let c3 = offsets[i] - offsets[j];
            c2 *= c3;
            if j == i - 1 {
                for k in (1..=mn).rev() {
                    c[i][k] = c1 * (k as f64 * c[i - 1][k - 1] - c5 * c[i - 1][k]) / c2;
                }
                c[i][0] = -c1 * c5 * c[i - 1][0] / c2;
            }
            for k in (1..=mn).rev() {
                c[j][k] = (c4 * c[j][k] - k as f64 * c[j][k - 1]) / c3;
            }
            c[j][0] = c4 * c[j][0] / c3;
        }
        c1 = c2;
    }
    c.into_iter().map(|row| row[m]).collect()
}

/// Fourth-order central stencil (integer offsets, weights) for a derivative
/// of order `m`.
pub fn central_stencil(m: usize) -> (Vec<i32>, Vec<f64>) {
    if m == 0 {
        return (vec![0], vec![1.0]);
    }
    let half = (m as i32 + 1) / 2 + 1;
    let offs: Vec<i32> = (-half..=half).collect();
    let w = fornberg_weights(&offs.iter().map(|&o| o as f64).collect::<Vec<_>>(), m);
    offs.into_iter().zip(w).filter(|(_, w)| w.abs() > 1e-14).unzip()
}

/// Step used for a mixed partial of total order `order`, widened for
/// high orders to keep rounding under control.
fn effective_step(h: f64, order: usize) -> f64 {
    if order <= 2 {
        h
    } else {
        h.max(f64::EPSILON.powf(1.0 / (order as f64 + 4.0)))
    }
}

/// ∂^α f(y0) from a tensor product of one-dimensional central stencils.
pub fn partial<F>(f: &F, y0: &[f64], alpha: &[usize], h: f64) -> Complex64
where
    F: Fn(&[f64]) -> Complex64 + ?Sized,
{
    let order: usize = alpha.iter().sum();
    let h = effective_step(h, order);
    let axes: Vec<(usize, Vec<i32>, Vec<f64>)> =
        alpha.iter().enumerate().filter(|(_, &a)| a > 0).map(|(j, &a)| {
            let (o, w) = central_stencil(a);
            (j, o, w)
        }).collect();
    if axes.is_empty() {
        return f(y0);
    }
    // Weights sum to zero; subtracting f(y0) keeps constants exact.
    let f0 = f(y0);
    let mut idx = vec![0usize; axes.len()];
    let mut y = y0.to_vec();
    let mut sum = Complex64::new(0.0, 0.0);
    loop {
        let mut w = 1.0;
        for (k, (j, o, ws)) in axes.iter().enumerate() {
            y[*j] = y0[*j] + o[idx[k]] as f64 * h;
            w *= ws[idx[k]];
        }
        sum += (f(&y) - f0) * w;
        let mut k = 0;
        loop {
            if k == axes.len() {
                return sum / h.powi(order as i32);
            }
            idx[k] += 1;
            if idx[k] < axes[k].1.len() {
                break;
            }
            idx[k] = 0;
            k += 1;
        }
    }
}

fn unit_alpha(d: usize, i: usize, j: usize) -> Vec<usize> {
    let mut a = vec![0; d];
    a[i] += 1;
    a[j] += 1;
    a
}

pub fn gradient<F>(f: &F, y0: &[f64], h: f64) -> Vec<Complex64>
where
    F: Fn(&[f64]) -> Complex64 + ?Sized,
{
    let d = y0.len();
    (0..d)
        .map(|i| {
            let mut a = vec![0; d];
            a[i] = 1;
            partial(f, y0, &a, h)
        })
        .collect()
}

/// Full Hessian, symmetric by construction.
pub fn hessian<F>(f: &F, y0: &[f64], h: f64) -> Vec<Vec<Complex64>>
where
    F: Fn(&[f64]) -> Complex64 + ?Sized,
{
    let d = y0.len();
    let mut out = vec![vec![Complex64::new(0.0, 0.0); d]; d];
    for i in 0..d {
        for j in i..d {
            let v = partial(f, y0, &unit_alpha(d, i, j), h);
            out[i][j] = v;
            out[j][i] = v;
        }
    }
    out
}

pub fn laplacian<F>(f: &F, y0: &[f64], h: f64) -> Complex64
where
    F: Fn(&[f64]) -> Complex64 + ?Sized,
{
    let d = y0.len();
    (0..d).map(|i| partial(f, y0, &unit_alpha(d, i, i), h)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn stencil_weights() {
        let (o, w) = central_stencil(1);
        assert_eq!(o, vec![-2, -1, 1, 2]);
        let want = [1.0 / 12.0, -2.0 / 3.0, 2.0 / 3.0, -1.0 / 12.0];
        assert!(w.iter().zip(want).all(|(a, b)| (a - b).abs() < 1e-14));
        let (_, w) = central_stencil(2);
        let want = [-1.0 / 12.0, 4.0 / 3.0, -5.0 / 2.0, 4.0 / 3.0, -1.0 / 12.0];
        assert!(w.iter().zip(want).all(|(a, b)| (a - b).abs() < 1e-14));
    }

    #[test]
    fn step_validation() {
        assert!(validate_step(1e-3).is_ok());
        assert!(matches!(validate_step(1e-7), Err(Error::InvalidStep(_))));
        assert!(validate_step(0.1).is_err());
        assert!(validate_step(f64::NAN).is_err());
    }

    #[test]
    fn derivatives_of_smooth_function() {
        // f = exp(y0) sin(y1) + y0² y1
        let f = |y: &[f64]| Complex64::new(y[0].exp() * y[1].sin() + y[0] * y[0] * y[1], 0.0);
        let p = [0.3, -0.7];
        let g = gradient(&f, &p, 1e-3);
        assert!((g[0].re - (0.3f64.exp() * (-0.7f64).sin() + 2.0 * 0.3 * -0.7)).abs() < 1e-10);
        let hs = hessian(&f, &p, 1e-3);
        assert!((hs[0][1].re - (0.3f64.exp() * (-0.7f64).cos() + 0.6)).abs() < 1e-9);
        let d4 = partial(&f, &p, &[2, 2], 1e-3);
        assert!((d4.re + 0.3f64.exp() * (-0.7f64).sin()).abs() < 1e-5, "{d4}");
        let d3 = partial(&f, &p, &[0, 3], 1e-3);
        assert!((d3.re + 0.3f64.exp() * (-0.7f64).cos()).abs() < 1e-6);
    }
}
