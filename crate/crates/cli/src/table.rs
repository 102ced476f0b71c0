//! Convergence tables: a numeric quantity against its asymptotic form over a grid.

use berezin_core::berezin::{berezin_monomial_p0, berezin_monomial_p0_asymptotic, default_hbar_grid};
use berezin_core::coherent_family::{g_eval, g_derivative_asymptotic, inner_product_asymptotic, kernel_t, GaCoefficients};
use berezin_core::{Complex64, MultiIndex, Params, SeriesControl};
use serde::Serialize;

use crate::config::{e1, CliError, CliResult, RunConfig};
use crate::eval::git_describe;

/// Number of inverse powers kept in the g_a expansion.
pub const G_TERMS: usize = 4;

/// (target, grid column label, description).
pub const TABLES: [(&str, &str, &str); 3] = [
    ("corollary-p0", "hbar", "Bessel-ratio Berezin transform of x^k at p = 0 against its first-order expansion"),
    ("g-asymptotic", "z", "g_a(z) against sqrt(a z) e^z (1 + a_1/z + ... + a_4/z^4), a = 1/(n-1)"),
    ("norm-asymptotic", "hbar", "T(z,z) against its first-order large-|z|/hbar expansion"),
];

pub fn table_names() -> Vec<&'static str> {
    TABLES.iter().map(|t| t.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct TableRow {
    pub x: f64,
    pub numeric: f64,
    pub asymptotic: f64,
    pub abs_err: f64,
    pub rel_err: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Table {
    pub target: String,
    pub description: String,
    pub git_describe: String,
    pub config: RunConfig,
    /// Header of the grid column.
    pub x_label: String,
    pub rows: Vec<TableRow>,
}

fn row(x: f64, numeric: Complex64, asymptotic: Complex64) -> TableRow {
    let abs_err = (numeric - asymptotic).norm();
    // Real parts are tabulated; the inputs used by every table are real.
    TableRow { x, numeric: numeric.re, asymptotic: asymptotic.re, abs_err, rel_err: abs_err / numeric.norm() }
}

pub fn build_table(cfg: &RunConfig) -> CliResult<Table> {
    let Some(&(target, x_label, description)) = TABLES.iter().find(|t| t.0 == cfg.target) else {
        return Err(CliError::Usage(format!("unknown table {:?}; expected one of {}", cfg.target, table_names().join(", "))));
    };
    if cfg.grid.as_ref().is_some_and(Vec::is_empty) {
        return Err(CliError::Usage("grid must be nonempty".into()));
    }
    let n = cfg.n_or(2);
    let rows = match target {
        "corollary-p0" => {
            if cfg.p.is_some_and(|p| p != 0.0) {
                return Err(CliError::Usage("corollary-p0 is defined at p = 0".into()));
            }
            let k = match &cfg.k {
                Some(_) => cfg.multi_index(n)?,
                None => MultiIndex::unit(n, 0),
            };
            let z = cfg.point('z', n, e1(n))?;
            cfg.grid_or(default_hbar_grid())
                .into_iter()
                .map(|h| {
                    let params = Params::new(n, 0.0, h)?;
                    Ok(row(h, berezin_monomial_p0(&params, &k, &z)?, berezin_monomial_p0_asymptotic(&params, &k, &z)?))
                })
                .collect::<CliResult<Vec<_>>>()?
        }
        "g-asymptotic" => {
            if n < 2 {
                return Err(CliError::Usage("g-asymptotic needs n >= 2".into()));
            }
            let a = 1.0 / (n as f64 - 1.0);
            let coeffs = GaCoefficients::new(a, G_TERMS, 0)?;
            let ctl = SeriesControl::default();
            cfg.grid_or(vec![20.0, 40.0, 80.0, 120.0, 200.0])
                .into_iter()
                .map(|x| {
                    let z = Complex64::new(x, 0.0);
                    Ok(row(x, g_eval(a, z, &ctl)?, g_derivative_asymptotic(a, 0, z, G_TERMS, &coeffs)?))
                })
                .collect::<CliResult<Vec<_>>>()?
        }
        "norm-asymptotic" => {
            let mut def = vec![Complex64::new(0.0, 0.0); n];
            def[0] = Complex64::new(0.6, 0.0);
            def[n - 1] += Complex64::new(0.0, 0.8);
            let z = cfg.point('z', n, def)?;
            let p = cfg.p_or(0.0);
            cfg.grid_or(default_hbar_grid())
                .into_iter()
                .map(|h| {
                    let params = Params::new(n, p, h)?;
                    Ok(row(h, kernel_t(&params, &z, &z)?, inner_product_asymptotic(&params, &z, &z, 1)?))
                })
                .collect::<CliResult<Vec<_>>>()?
        }
        _ => unreachable!("table list and dispatch disagree"),
    };
    Ok(Table {
        target: target.into(),
        description: description.into(),
        git_describe: git_describe().into(),
        config: cfg.clone(),
        x_label: x_label.into(),
        rows,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Command;

    #[test]
    fn corollary_default_grid() {
        let mut c = RunConfig::new(Command::Table, "corollary-p0");
        c.k = Some(vec![1, 0]);
        let t = build_table(&c).unwrap();
        assert_eq!(t.rows.len(), 5);
        assert_eq!(t.x_label, "hbar");
        assert_eq!(t.rows.iter().map(|r| r.x).collect::<Vec<_>>(), default_hbar_grid());
        // Error is O(ħ²): it shrinks by about 16 from ħ = 0.4 to ħ = 0.1.
        let ratio = t.rows[0].abs_err / t.rows[4].abs_err;
        assert!((10.0..25.0).contains(&ratio), "{ratio}");
    }

    #[test]
    fn g_asymptotic_converges() {
        let t = build_table(&RunConfig::new(Command::Table, "g-asymptotic")).unwrap();
        assert_eq!(t.x_label, "z");
        assert!(t.rows.windows(2).all(|w| w[1].rel_err < w[0].rel_err));
        assert!(t.rows.last().unwrap().rel_err < 1e-9);
    }

    #[test]
    fn usage_errors() {
        let mut c = RunConfig::new(Command::Table, "corollary-p0");
        c.grid = Some(vec![]);
        assert!(matches!(build_table(&c), Err(CliError::Usage(_))));
        assert!(matches!(build_table(&RunConfig::new(Command::Table, "nope")), Err(CliError::Usage(_))));
        let mut p = RunConfig::new(Command::Table, "corollary-p0");
        p.p = Some(-1.0);
        assert!(matches!(build_table(&p), Err(CliError::Usage(_))));
    }
}
