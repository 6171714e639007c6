use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fluxtalk::config::DEFAULT_DEVICE_JSON;
use fluxtalk::lab::Realism;
use fluxtalk::scenario::{run_file, RunOptions};

#[derive(Debug, Parser)]
#[command(name = "fluxtalk", version)]
#[command(about = "Flux crosstalk simulator and estimators for tunable transmon devices")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run a scenario file and write its artifacts and manifest.
    Run(RunArgs),
    /// Print the built-in default device configuration.
    DefaultDevice,
}

#[derive(Debug, Args)]
struct RunArgs {
    scenario: PathBuf,

    /// Overrides the scenario seed.
    #[arg(long)]
    seed: Option<u64>,

    /// Output directory (overrides the scenario's).
    #[arg(long)]
    out: Option<PathBuf>,

    /// Analytic Gaussian measurement noise.
    #[arg(long, conflicts_with = "full")]
    fast: bool,

    /// Shot-sampled Ramsey fringes.
    #[arg(long)]
    full: bool,

    /// Worker threads.
    #[arg(long)]
    jobs: Option<usize>,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::DefaultDevice => {
            print!("{DEFAULT_DEVICE_JSON}");
            ExitCode::SUCCESS
        }
        Command::Run(args) => {
            let realism = match (args.fast, args.full) {
                (true, _) => Some(Realism::Fast),
                (_, true) => Some(Realism::Full),
                _ => None,
            };
            let opts = RunOptions {
                seed: args.seed,
                out: args.out,
                realism,
                jobs: args.jobs,
            };
            match run_file(&args.scenario, &opts) {
                Ok(report) => {
                    println!(
                        "{}: {} artifacts in {}",
                        report.manifest.scenario,
                        report.manifest.artifacts.len(),
                        report.out_dir.display()
                    );
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error[{}]: {e}", e.qualified_name());
                    ExitCode::from(e.exit_code())
                }
            }
        }
    }
}
