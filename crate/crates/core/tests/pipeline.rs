//! Cross-module consistency through the public API.

use berezin_core::berezin::{berezin_monomial_p0, berezin_numeric, su_invariance_check, QuadPolicy};
use berezin_core::coherent_family::{kernel_t, u_transform_monomial, u_transform_numeric};
use berezin_core::specfun::bessel_i_real;
use berezin_core::{Complex64, MultiIndex, Params, QuadSpec, SeriesControl, SpecialUnitary, SymbolFunction};

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

#[test]
fn kernel_on_the_diagonal_is_a_bessel_ratio() {
    // p = 0: T(z,z) = Γ(n) (ħ/|z|)^{n-1} I_{n-1}(2|z|/ħ).
    let ctl = SeriesControl::default();
    for (n, h) in [(2usize, 1.0), (3, 0.5), (2, 0.1)] {
        let mut z = vec![c(0.0, 0.0); n];
        z[0] = c(0.6, 0.0);
        z[n - 1] += c(0.0, 0.8);
        let params = Params::new(n, 0.0, h).unwrap();
        let gamma_n: f64 = (1..n).map(|k| k as f64).product();
        let want = gamma_n * h.powi(n as i32 - 1) * bessel_i_real(n as f64 - 1.0, 2.0 / h, &ctl).unwrap();
        let got = kernel_t(&params, &z, &z).unwrap();
        assert!((got.re - want).abs() <= 1e-12 * want, "n={n} h={h}: {got} vs {want}");
        assert!(got.im.abs() <= 1e-12 * want);
    }
}

#[test]
fn berezin_quadrature_closed_form_and_invariance_agree() {
    let z = [c(0.6, 0.3), c(0.2, -0.4)];
    let params = Params::new(2, 0.0, 0.5).unwrap();
    let spec = QuadPolicy::for_dim(2).spec(0.5);
    let k = MultiIndex(vec![2, 1]);
    let phi = SymbolFunction::monomial(k.clone());
    let q = berezin_numeric(&params, &phi, &z, &spec, &SeriesControl::default()).unwrap();
    let exact = berezin_monomial_p0(&params, &k, &z).unwrap();
    assert!((q - exact).norm() < 1e-9, "{q} vs {exact}");

    let u = SpecialUnitary::block_rotation(2, 0, 1, 0.7);
    let dev = su_invariance_check(&params.with_hbar(0.5), &SymbolFunction::abs_sq(0), &z, &u, &spec).unwrap();
    assert!(dev < 1e-9, "{dev}");
}

#[test]
fn u_transform_quadrature_matches_closed_form() {
    let z = [c(0.3, -0.2), c(0.5, 0.1), c(-0.1, 0.4)];
    for p in [0.0, -1.0] {
        let params = Params::new(3, p, 0.7).unwrap();
        let k = MultiIndex(vec![1, 0, 2]);
        let q = u_transform_numeric(&params, &k, &z, &QuadSpec::gauss(16)).unwrap();
        let exact = u_transform_monomial(&params, &k, &z);
        assert!((q - exact).norm() <= 1e-9 * exact.norm(), "p={p}: {q} vs {exact}");
    }
}
