//! CSV (RFC 4180) and JSON rendering, plus output placement.

use std::path::Path;

use serde::Serialize;

use crate::config::{CliError, CliResult, Format};
use crate::eval::Evaluation;
use crate::suites::CheckResult;
use crate::table::Table;

fn json<T: Serialize>(v: &T) -> CliResult<String> {
    let mut s = serde_json::to_string_pretty(v).map_err(|e| CliError::Serialize(e.to_string()))?;
    s.push('\n');
    Ok(s)
}

fn csv_body<F>(header: &[&str], fill: F) -> CliResult<String>
where
    F: FnOnce(&mut csv::Writer<Vec<u8>>) -> csv::Result<()>,
{
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_writer(Vec::new());
    let run = |w: &mut csv::Writer<Vec<u8>>| -> csv::Result<()> {
        w.write_record(header)?;
        fill(w)
    };
    run(&mut w).map_err(|e| CliError::Serialize(e.to_string()))?;
    let bytes = w.into_inner().map_err(|e| CliError::Serialize(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| CliError::Serialize(e.to_string()))
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(String::new, |x| x.to_string())
}

/// Comment lines start with `#` and precede the column header.
pub fn render_eval(e: &Evaluation, format: Format) -> CliResult<String> {
    match format {
        Format::Json => json(e),
        Format::Csv => {
            let head = format!(
                "# target: {}\r\n# module: {}\r\n# formula: {}\r\n# git-describe: {}\r\n",
                e.target, e.provenance.module, e.provenance.formula, e.provenance.git_describe
            );
            let body = csv_body(&["hbar", "re", "im"], |w| {
                for r in &e.rows {
                    w.write_record([opt(r.hbar), r.re.to_string(), r.im.to_string()])?;
                }
                Ok(())
            })?;
            Ok(head + &body)
        }
    }
}

pub fn render_table(t: &Table, format: Format) -> CliResult<String> {
    match format {
        Format::Json => json(t),
        Format::Csv => {
            let config = serde_json::to_string(&t.config).map_err(|e| CliError::Serialize(e.to_string()))?;
            let head = format!("# git-describe: {}\r\n# config: {config}\r\n# {}\r\n", t.git_describe, t.description);
            let body = csv_body(&[t.x_label.as_str(), "numeric", "asymptotic", "abs_err", "rel_err"], |w| {
                for r in &t.rows {
                    w.write_record([r.x, r.numeric, r.asymptotic, r.abs_err, r.rel_err].map(|v| v.to_string()))?;
                }
                Ok(())
            })?;
            Ok(head + &body)
        }
    }
}

#[derive(Serialize)]
struct Report<'a> {
    git_describe: &'a str,
    target: &'a str,
    passed: bool,
    checks: Vec<ReportCheck<'a>>,
}

/// Timing is left out so identical runs produce identical files.
#[derive(Serialize)]
struct ReportCheck<'a> {
    id: &'a str,
    suite: &'a str,
    passed: bool,
    detail: &'a str,
    metrics: &'a std::collections::BTreeMap<String, f64>,
}

pub fn render_report(target: &str, checks: &[CheckResult]) -> CliResult<String> {
    json(&Report {
        git_describe: crate::eval::git_describe(),
        target,
        passed: checks.iter().all(|c| c.passed),
        checks: checks
            .iter()
            .map(|c| ReportCheck { id: &c.id, suite: &c.suite, passed: c.passed, detail: &c.detail, metrics: &c.metrics })
            .collect(),
    })
}

/// Writes to `path`, or to stdout when no path is given.
pub fn emit(path: Option<&Path>, contents: &str) -> CliResult<()> {
    match path {
        Some(p) => std::fs::write(p, contents).map_err(|source| CliError::Output { path: p.to_path_buf(), source }),
        None => {
            print!("{contents}");
            Ok(())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::config::{Command, RunConfig};
    use crate::table::build_table;

    #[test]
    fn csv_table_parses_back() {
        let mut c = RunConfig::new(Command::Table, "corollary-p0");
        c.k = Some(vec![1, 0]);
        let t = build_table(&c).unwrap();
        let text = render_table(&t, Format::Csv).unwrap();
        assert!(text.starts_with("# git-describe: "));
        let mut rdr = csv::ReaderBuilder::new().comment(Some(b'#')).from_reader(text.as_bytes());
        assert_eq!(rdr.headers().unwrap(), vec!["hbar", "numeric", "asymptotic", "abs_err", "rel_err"]);
        let rows: Vec<Vec<f64>> = rdr.records().map(|r| r.unwrap().iter().map(|v| v.parse().unwrap()).collect()).collect();
        assert_eq!(rows.len(), 5);
        assert_eq!(rows[2][1], t.rows[2].numeric);
    }

    #[test]
    fn json_key_order_is_stable() {
        let t = build_table(&RunConfig::new(Command::Table, "g-asymptotic")).unwrap();
        let text = render_table(&t, Format::Json).unwrap();
        let keys: Vec<String> = serde_json::from_str::<serde_json::Value>(&text).unwrap().as_object().unwrap().keys().cloned().collect();
        assert_eq!(keys, ["target", "description", "git_describe", "config", "x_label", "rows"]);
        assert_eq!(text, render_table(&t, Format::Json).unwrap());
    }

    #[test]
    fn unwritable_path() {
        let err = emit(Some(Path::new("/nonexistent-dir/x.csv")), "a").unwrap_err();
        assert!(matches!(err, CliError::Output { .. }));
        assert_eq!(err.exit_code(), 1);
    }
}
