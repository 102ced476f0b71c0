//! Shared inputs for the criterion benches.

use berezin_core::Complex64;

/// A generic point of C^2 on the unit sphere.
pub fn sample_point() -> Vec<Complex64> {
    let z = [Complex64::new(0.6, 0.3), Complex64::new(0.2, -0.4)];
    let r = z.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
    z.iter().map(|v| v / r).collect()
}
