//! Run configuration shared by the three commands.

use std::path::PathBuf;
use std::str::FromStr;

use berezin_core::{Complex64, MultiIndex};
use serde::Serialize;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("usage: {0}")]
    Usage(String),
    #[error(transparent)]
    Core(#[from] berezin_core::Error),
    #[error("cannot write {path}: {source}")]
    Output { path: PathBuf, source: std::io::Error },
    #[error("serialization failed: {0}")]
    Serialize(String),
}

impl CliError {
    /// 2 for usage errors, 1 otherwise.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Usage(_) => 2,
            _ => 1,
        }
    }
}

pub type CliResult<T> = std::result::Result<T, CliError>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Command {
    Eval,
    Verify,
    Table,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
}

/// Fully parsed invocation. Optional fields fall back to per-target defaults.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunConfig {
    pub command: Command,
    pub target: String,
    pub n: Option<usize>,
    pub p: Option<f64>,
    pub grid: Option<Vec<f64>>,
    #[serde(serialize_with = "ser_complex_list")]
    pub z: Option<Vec<Complex64>>,
    #[serde(serialize_with = "ser_complex_list")]
    pub w: Option<Vec<Complex64>>,
    pub k: Option<Vec<usize>>,
    pub output: Option<PathBuf>,
    pub format: Format,
    pub seed: u64,
    pub nodes: Option<usize>,
}

fn ser_complex_list<S: serde::Serializer>(v: &Option<Vec<Complex64>>, s: S) -> Result<S::Ok, S::Error> {
    match v {
        None => s.serialize_none(),
        Some(list) => s.collect_seq(list.iter().map(|c| format!("{c}"))),
    }
}

impl RunConfig {
    pub fn new(command: Command, target: &str) -> Self {
        Self {
            command,
            target: target.to_string(),
            n: None,
            p: None,
            grid: None,
            z: None,
            w: None,
            k: None,
            output: None,
            format: Format::Csv,
            seed: 42,
            nodes: None,
        }
    }

    pub fn n_or(&self, default: usize) -> usize {
        self.n.unwrap_or(default)
    }

    pub fn p_or(&self, default: f64) -> f64 {
        self.p.unwrap_or(default)
    }

    pub fn grid_or(&self, default: Vec<f64>) -> Vec<f64> {
        self.grid.clone().unwrap_or(default)
    }

    /// The complex point `z`, padded or checked against dimension `n`.
    pub fn point(&self, which: char, n: usize, default: Vec<Complex64>) -> CliResult<Vec<Complex64>> {
        let v = match which {
            'z' => self.z.clone(),
            _ => self.w.clone(),
        }
        .unwrap_or(default);
        if v.len() != n {
            return Err(CliError::Usage(format!("--{which} has {} components, expected n = {n}", v.len())));
        }
        Ok(v)
    }

    pub fn multi_index(&self, n: usize) -> CliResult<MultiIndex> {
        let k = self.k.clone().unwrap_or_else(|| vec![0; n]);
        if k.len() != n {
            return Err(CliError::Usage(format!("--k has {} components, expected n = {n}", k.len())));
        }
        Ok(MultiIndex(k))
    }
}

/// Comma-separated positive grid values.
pub fn parse_grid(s: &str) -> CliResult<Vec<f64>> {
    let items: Vec<&str> = s.split(',').map(str::trim).filter(|t| !t.is_empty()).collect();
    if items.is_empty() {
        return Err(CliError::Usage("grid must be nonempty".into()));
    }
    items
        .iter()
        .map(|t| match t.parse::<f64>() {
            Ok(v) if v > 0.0 && v.is_finite() => Ok(v),
            _ => Err(CliError::Usage(format!("grid entry {t:?} is not a positive number"))),
        })
        .collect()
}

/// Comma-separated complex numbers such as `0.6+0.3i,-0.2i`.
pub fn parse_complex_list(s: &str) -> CliResult<Vec<Complex64>> {
    let items: Vec<&str> = s.split(',').map(str::trim).collect();
    if items.iter().any(|t| t.is_empty()) {
        return Err(CliError::Usage(format!("empty component in {s:?}")));
    }
    items
        .iter()
        .map(|t| Complex64::from_str(t).map_err(|_| CliError::Usage(format!("cannot parse {t:?} as a complex number"))))
        .collect()
}

pub fn parse_index(s: &str) -> CliResult<Vec<usize>> {
    s.split(',')
        .map(|t| t.trim().parse::<usize>().map_err(|_| CliError::Usage(format!("multi-index entry {t:?} is not a nonnegative integer"))))
        .collect()
}

/// First axis vector of C^n.
pub fn e1(n: usize) -> Vec<Complex64> {
    let mut v = vec![Complex64::new(0.0, 0.0); n];
    v[0] = Complex64::new(1.0, 0.0);
    v
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grids() {
        assert_eq!(parse_grid("0.4, 0.2,0.1").unwrap(), vec![0.4, 0.2, 0.1]);
        assert!(matches!(parse_grid(""), Err(CliError::Usage(_))));
        assert!(matches!(parse_grid(" , "), Err(CliError::Usage(_))));
        assert!(matches!(parse_grid("0.1,-1"), Err(CliError::Usage(_))));
    }

    #[test]
    fn complex_lists() {
        let v = parse_complex_list("0.6+0.3i,-0.4i,1").unwrap();
        assert_eq!(v, vec![Complex64::new(0.6, 0.3), Complex64::new(0.0, -0.4), Complex64::new(1.0, 0.0)]);
        assert!(parse_complex_list("1,,0").is_err());
        assert!(parse_complex_list("x").is_err());
    }

    #[test]
    fn defaults() {
        let c = RunConfig::new(Command::Eval, "kernel_T");
        assert_eq!(c.seed, 42);
        assert_eq!(c.point('z', 2, e1(2)).unwrap(), e1(2));
        assert_eq!(c.multi_index(3).unwrap(), MultiIndex(vec![0, 0, 0]));
        let mut d = c.clone();
        d.k = Some(vec![1]);
        assert!(matches!(d.multi_index(2), Err(CliError::Usage(_))));
    }
}
