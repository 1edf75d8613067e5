use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use sentibench_core::fixture::{generate, write_fixture, FixtureSpec};
use sentibench_core::pipeline::{self, PipelineError, RunConfig};
use sentibench_core::report::{compare, OutputFormat};

#[derive(Parser)]
#[command(name = "sentibench", version, about = "Back-test news sentiment factors on daily A-share data")]
struct Cli {
    /// Output format for tables printed to stdout.
    #[arg(long, global = true, default_value = "text")]
    format: OutputFormat,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Score, back-test and write every report into the output directory.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Score news and export the factor panel only.
    Score {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Write a seeded synthetic dataset and a config that runs it.
    GenFixture {
        #[arg(long)]
        seed: u64,
        #[arg(long)]
        stocks: usize,
        #[arg(long)]
        days: usize,
        /// Correlation between latent sentiment and same-day return.
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        plant_corr: f64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Tabulate the reports of two or more run directories.
    Compare {
        #[arg(required = true, num_args = 2..)]
        dirs: Vec<PathBuf>,
    },
}

fn fail(module: &str, operation: &str, location: &Path, message: impl std::fmt::Display) -> ExitCode {
    let message = message.to_string().replace(['\n', '\r'], " ");
    eprintln!(
        "error module={module} operation={operation} location={:?} message={message:?}",
        location.display().to_string()
    );
    ExitCode::from(1)
}

fn pipeline_fail(e: PipelineError) -> ExitCode {
    eprintln!("{e}");
    ExitCode::from(e.exit_code() as u8)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Run { config, out } => {
            let cfg = match RunConfig::load(&config) {
                Ok(c) => c,
                Err(e) => return pipeline_fail(e),
            };
            match pipeline::run(&cfg, &out) {
                Ok(outcome) => {
                    let table = sentibench_core::report::ComparisonTable {
                        rows: vec![outcome.report.row()],
                    };
                    print!("{}", table.render(cli.format));
                    ExitCode::SUCCESS
                }
                Err(e) => pipeline_fail(e),
            }
        }
        Command::Score { config, out } => {
            let cfg = match RunConfig::load(&config) {
                Ok(c) => c,
                Err(e) => return pipeline_fail(e),
            };
            match pipeline::score(&cfg, &out) {
                Ok((panel, _)) => {
                    println!("wrote {} factor values to {}", panel.len(), out.display());
                    ExitCode::SUCCESS
                }
                Err(e) => pipeline_fail(e),
            }
        }
        Command::GenFixture {
            seed,
            stocks,
            days,
            plant_corr,
            out,
        } => {
            let spec = FixtureSpec::new(seed, stocks, days, plant_corr);
            let fixture = match generate(&spec) {
                Ok(f) => f,
                Err(e) => {
                    fail("cli", "gen_fixture", &out, e);
                    return ExitCode::from(2);
                }
            };
            match write_fixture(&fixture, &out) {
                Ok(files) => {
                    for f in files {
                        println!("{}", f.display());
                    }
                    ExitCode::SUCCESS
                }
                Err(e) => fail("cli", "gen_fixture", &out, e),
            }
        }
        Command::Compare { dirs } => match compare(&dirs) {
            Ok(table) => {
                print!("{}", table.render(cli.format));
                ExitCode::SUCCESS
            }
            Err(e) => {
                let location = match &e {
                    sentibench_core::report::ReportError::MissingReport { dir } => dir.clone(),
                    _ => PathBuf::new(),
                };
                fail("report", "compare", &location, e)
            }
        },
    }
}
