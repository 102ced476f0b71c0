//! Command-line front end: `eval` a single operation, `verify` the
//! acceptance suites, or write a convergence `table`.

pub mod config;
pub mod eval;
pub mod render;
pub mod suites;
pub mod table;

use std::process::ExitCode;

pub use config::{CliError, CliResult, Command, Format, RunConfig};

/// Environment variable capping the worker pool size.
pub const THREADS_ENV: &str = "BEREZIN_THREADS";

/// Applies `BEREZIN_THREADS` to the global rayon pool.
pub fn init_threads() -> CliResult<()> {
    let Ok(v) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|n| *n > 0)
        .ok_or_else(|| CliError::Usage(format!("{THREADS_ENV} must be a positive integer, got {v:?}")))?;
    // A pool that already exists keeps its size.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

pub fn run_eval(cfg: &RunConfig) -> CliResult<ExitCode> {
    let e = eval::evaluate(cfg)?;
    let text = render::render_eval(&e, cfg.format)?;
    if let Some(p) = &cfg.output {
        render::emit(Some(p), &text)?;
    }
    render::emit(None, &text)?;
    Ok(ExitCode::SUCCESS)
}

/// Report file used when `--output` is absent.
pub const DEFAULT_REPORT: &str = "berezin-verify.json";

pub fn run_verify(cfg: &RunConfig) -> CliResult<ExitCode> {
    let checks = suites::run_suites(&cfg.target, &suites::SuiteOptions::from_config(cfg))?;
    for c in &checks {
        println!("{} {} {} [{:.1}s] {}", c.id, c.suite, if c.passed { "PASS" } else { "FAIL" }, c.seconds, c.detail);
    }
    let path = cfg.output.clone().unwrap_or_else(|| DEFAULT_REPORT.into());
    render::emit(Some(&path), &render::render_report(&cfg.target, &checks)?)?;
    let failed: Vec<&str> = checks.iter().filter(|c| !c.passed).map(|c| c.id.as_str()).collect();
    if failed.is_empty() {
        Ok(ExitCode::SUCCESS)
    } else {
        eprintln!("failed: {}", failed.join(", "));
        Ok(ExitCode::FAILURE)
    }
}

pub fn run_table(cfg: &RunConfig) -> CliResult<ExitCode> {
    let t = table::build_table(cfg)?;
    render::emit(cfg.output.as_deref(), &render::render_table(&t, cfg.format)?)?;
    Ok(ExitCode::SUCCESS)
}

pub fn run(cfg: &RunConfig) -> CliResult<ExitCode> {
    init_threads()?;
    match cfg.command {
        Command::Eval => run_eval(cfg),
        Command::Verify => run_verify(cfg),
        Command::Table => run_table(cfg),
    }
}
