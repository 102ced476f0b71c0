//! Single-operation evaluation.

use berezin_core::berezin::{berezin_monomial_p0, berezin_monomial_p0_asymptotic, berezin_numeric, QuadPolicy};
use berezin_core::coherent_family::{g_eval, kernel_t, measure_density, u_transform_monomial};
use berezin_core::{Complex64, Params, QuadSpec, SeriesControl, SymbolFunction};
use serde::Serialize;

use crate::config::{e1, CliError, CliResult, RunConfig};

/// (target, module, defining formula).
pub const TARGETS: [(&str, &str, &str); 7] = [
    ("kernel_T", "coherent_family", "T(z,w) = <K(.,w), K(.,z)> summed in closed form"),
    ("berezin_monomial_p0", "berezin", "B(x^k)(z) = (z/|z|)^k I_{n+|k|-1}(2|z|/hbar) / I_{n-1}(2|z|/hbar), p = 0"),
    ("berezin_p0_asymptotic", "berezin", "(z/|z|)^k (1 - |k|(|k|+2n-2) hbar / (4|z|)), p = 0"),
    ("berezin_numeric", "berezin", "B(x^k)(z) = <x^k K(.,z), K(.,z)> / <K(.,z), K(.,z)> by sphere quadrature"),
    ("g_eval", "coherent_family", "g_a(z) = sum_l sqrt(a l + 1) z^l / l!, a = 1/(n-1)"),
    ("measure_density", "coherent_family", "density of dm_{n,p} with respect to Lebesgue measure"),
    ("u_transform", "coherent_family", "U(x^k)(z) = c_{|k|} Gamma(n)/Gamma(n+|k|) (z/hbar)^k"),
];

pub fn target_names() -> Vec<&'static str> {
    TARGETS.iter().map(|t| t.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Provenance {
    pub module: String,
    pub formula: String,
    pub git_describe: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct EvalRow {
    pub hbar: Option<f64>,
    pub re: f64,
    pub im: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Evaluation {
    pub target: String,
    pub provenance: Provenance,
    pub rows: Vec<EvalRow>,
}

pub fn git_describe() -> &'static str {
    env!("BEREZIN_GIT_DESCRIBE")
}

/// Evaluates the configured target at every ħ of the grid (default ħ = 1).
pub fn evaluate(cfg: &RunConfig) -> CliResult<Evaluation> {
    let Some(&(target, module, formula)) = TARGETS.iter().find(|t| t.0 == cfg.target) else {
        return Err(CliError::Usage(format!("unknown eval target {:?}; expected one of {}", cfg.target, target_names().join(", "))));
    };
    let n = cfg.n_or(2);
    let p = cfg.p_or(0.0);
    let ctl = SeriesControl::default();
    let provenance = Provenance { module: module.into(), formula: formula.into(), git_describe: git_describe().into() };
    let row = |hbar: Option<f64>, v: Complex64| EvalRow { hbar, re: v.re, im: v.im };

    if target == "g_eval" {
        if n < 2 {
            return Err(CliError::Usage("g_eval needs n >= 2".into()));
        }
        let a = 1.0 / (n as f64 - 1.0);
        let zs = cfg.z.clone().unwrap_or_else(|| vec![Complex64::new(0.0, 0.0)]);
        let rows = zs.iter().map(|&z| Ok(row(None, g_eval(a, z, &ctl)?))).collect::<CliResult<Vec<_>>>()?;
        return Ok(Evaluation { target: target.into(), provenance, rows });
    }

    let z = cfg.point('z', n, e1(n))?;
    let mut rows = Vec::new();
    for hbar in cfg.grid_or(vec![1.0]) {
        let params = Params::new(n, p, hbar)?;
        let v = match target {
            "kernel_T" => kernel_t(&params, &z, &cfg.point('w', n, e1(n))?)?,
            "berezin_monomial_p0" => berezin_monomial_p0(&params, &cfg.multi_index(n)?, &z)?,
            "berezin_p0_asymptotic" => berezin_monomial_p0_asymptotic(&params, &cfg.multi_index(n)?, &z)?,
            "berezin_numeric" => {
                let spec = cfg.nodes.map_or_else(|| QuadPolicy::for_dim(n).spec(hbar), QuadSpec::gauss);
                berezin_numeric(&params, &SymbolFunction::monomial(cfg.multi_index(n)?), &z, &spec, &ctl)?
            }
            "measure_density" => Complex64::new(measure_density(&params, &z)?, 0.0),
            "u_transform" => u_transform_monomial(&params, &cfg.multi_index(n)?, &z),
            _ => unreachable!("target table and dispatch disagree"),
        };
        rows.push(row(Some(hbar), v));
    }
    Ok(Evaluation { target: target.into(), provenance, rows })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::Command;

    fn cfg(target: &str) -> RunConfig {
        RunConfig::new(Command::Eval, target)
    }

    #[test]
    fn spec_examples() {
        // n = 2, p = 0, ħ = 1, z = w = ê₁: T = Γ(2) I₁(2)/1 = 1.5906368546373291.
        let e = evaluate(&cfg("kernel_T")).unwrap();
        assert!((e.rows[0].re - 1.590_636_854_637_329).abs() < 1e-13, "{:?}", e.rows);
        assert_eq!(e.rows[0].im, 0.0);
        assert_eq!(e.provenance.module, "coherent_family");

        let b = evaluate(&cfg("berezin_monomial_p0")).unwrap();
        assert_eq!((b.rows[0].re, b.rows[0].im), (1.0, 0.0));

        let g = evaluate(&cfg("g_eval")).unwrap();
        assert_eq!((g.rows[0].re, g.rows[0].im), (1.0, 0.0));
        assert_eq!(g.rows[0].hbar, None);
    }

    #[test]
    fn grid_and_errors() {
        let mut c = cfg("kernel_T");
        c.grid = Some(vec![1.0, 0.5]);
        assert_eq!(evaluate(&c).unwrap().rows.len(), 2);
        assert!(matches!(evaluate(&cfg("nope")), Err(CliError::Usage(_))));
        let mut bad = cfg("kernel_T");
        bad.z = Some(vec![Complex64::new(1.0, 0.0)]);
        assert!(matches!(evaluate(&bad), Err(CliError::Usage(_))));
        let mut p1 = cfg("berezin_monomial_p0");
        p1.p = Some(-1.0);
        assert!(matches!(evaluate(&p1), Err(CliError::Core(_))));
    }
}
