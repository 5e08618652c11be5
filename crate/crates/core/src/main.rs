use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use bakrylab::config::{read_table, ExperimentConfig};
use bakrylab::error::Error;
use bakrylab::runner::{output_root, parse_values, run, sweep};

#[derive(Debug, Parser)]
#[command(
    name = "bakrylab",
    version,
    about = "Gradient-estimate laboratory for weighted nonlinear heat equations"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve and run every configured check.
    Run { config: PathBuf },
    /// Run the configuration once per value of a numeric field.
    Sweep {
        config: PathBuf,
        /// Dotted path of the field, e.g. `grid.n`.
        #[arg(long)]
        param: String,
        /// Comma-separated values, e.g. `65,129,257`.
        #[arg(long, allow_hyphen_values = true)]
        values: String,
    },
    /// Parse and validate a configuration without running it.
    Validate { config: PathBuf },
}

fn base_dir(path: &Path) -> &Path {
    path.parent().unwrap_or(Path::new("."))
}

fn execute(command: Command) -> Result<bool, Error> {
    match command {
        Command::Validate { config } => {
            let parsed = ExperimentConfig::load(&config)?;
            println!("{}: ok ({})", config.display(), parsed.content_hash()?);
            Ok(true)
        }
        Command::Run { config } => {
            let parsed = ExperimentConfig::load(&config)?;
            let summary = run(&parsed, &output_root(&parsed))?;
            for o in &summary.outcomes {
                println!(
                    "{:<16} {} scalar={:e}",
                    o.check.name(),
                    if o.pass { "PASS" } else { "FAIL" },
                    o.scalar
                );
            }
            println!("reports: {}", summary.dir.display());
            Ok(summary.all_pass())
        }
        Command::Sweep {
            config,
            param,
            values,
        } => {
            let table = read_table(&config)?;
            let template = ExperimentConfig::from_table(table.clone(), base_dir(&config))?;
            let values = parse_values(&values)?;
            let summary = sweep(
                &table,
                base_dir(&config),
                &param,
                &values,
                &output_root(&template),
            )?;
            for row in &summary.rows {
                println!(
                    "{param}={} {:<16} {} scalar={:e}",
                    row.value,
                    row.check.name(),
                    if row.pass { "PASS" } else { "FAIL" },
                    row.scalar
                );
            }
            println!("table: {}", summary.csv_path.display());
            Ok(summary.all_pass())
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}
