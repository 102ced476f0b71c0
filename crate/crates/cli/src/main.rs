use std::path::PathBuf;
use std::process::ExitCode;

use berezin_cli::config::{parse_complex_list, parse_grid, parse_index};
use berezin_cli::{eval, suites, table, CliError, CliResult, Command, Format, RunConfig};
use clap::{CommandFactory, Parser};

#[derive(Debug, Parser)]
#[command(name = "berezin", version, about = "Evaluate operations, run verification suites, write convergence tables")]
struct Cli {
    /// eval, verify or table.
    #[arg(long, value_enum, default_value_t = Command::Verify)]
    command: Command,
    /// Operation, suite or table name. Defaults to `all` for verify.
    #[arg(long)]
    target: Option<String>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long, allow_hyphen_values = true)]
    p: Option<f64>,
    /// Comma-separated grid (ħ values, or z values for g-asymptotic).
    #[arg(long, allow_hyphen_values = true)]
    hbar_grid: Option<String>,
    /// Comma-separated complex components, e.g. 0.6+0.3i,0.2-0.4i.
    #[arg(long, allow_hyphen_values = true)]
    z: Option<String>,
    #[arg(long, allow_hyphen_values = true)]
    w: Option<String>,
    /// Comma-separated multi-index.
    #[arg(long)]
    k: Option<String>,
    #[arg(long)]
    output: Option<PathBuf>,
    #[arg(long, value_enum, default_value_t = Format::Csv)]
    format: Format,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    /// Quadrature nodes per angle for numeric quantities.
    #[arg(long)]
    nodes: Option<usize>,
}

impl Cli {
    fn into_config(self) -> CliResult<RunConfig> {
        let target = match (self.target, self.command) {
            (Some(t), _) => t,
            (None, Command::Verify) => "all".to_string(),
            (None, _) => {
                let names = if self.command == Command::Eval { eval::target_names() } else { table::table_names() };
                return Err(CliError::Usage(format!("--target is required; expected one of {}", names.join(", "))));
            }
        };
        let mut cfg = RunConfig::new(self.command, &target);
        cfg.n = self.n;
        cfg.p = self.p;
        cfg.grid = self.hbar_grid.as_deref().map(parse_grid).transpose()?;
        cfg.z = self.z.as_deref().map(parse_complex_list).transpose()?;
        cfg.w = self.w.as_deref().map(parse_complex_list).transpose()?;
        cfg.k = self.k.as_deref().map(parse_index).transpose()?;
        cfg.output = self.output;
        cfg.format = self.format;
        cfg.seed = self.seed;
        cfg.nodes = self.nodes;
        if cfg.command == Command::Verify {
            suites::select(&cfg.target)?;
        }
        Ok(cfg)
    }
}

fn main() -> ExitCode {
    let result = Cli::parse().into_config().and_then(|cfg| berezin_cli::run(&cfg));
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            if matches!(e, CliError::Usage(_)) {
                eprintln!("\n{}", Cli::command().render_usage());
            }
            ExitCode::from(e.exit_code())
        }
    }
}
