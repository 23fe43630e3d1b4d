use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use rovib_cli::config::{JobConfig, RunConfig};
use rovib_cli::error::CliError;
use rovib_cli::{execute, Action};

#[derive(Parser)]
#[command(
    name = "rovib",
    version,
    about = "Rovibrational dynamics of diatomics in strong laser pulses"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// TOML run configuration.
    #[arg(short, long)]
    config: PathBuf,
    /// Overrides `output_dir` from the configuration.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Build (or load) the eigen library and write level tables.
    Eigen(Common),
    /// Run a single-propagation job.
    Run(Common),
    /// Run a nu0 or intensity scan.
    Scan(Common),
    /// Run a thermal ensemble.
    Thermal(Common),
    /// Refinement check of the shortest task of any job.
    Check(Common),
    /// Write pulse intensity and spectrum tables.
    Export(Common),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("rovib: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn dispatch(command: Command) -> Result<(), CliError> {
    let (common, action, allowed): (Common, Action, fn(&JobConfig) -> bool) = match command {
        Command::Eigen(c) => (c, Action::Eigen, |_| true),
        Command::Export(c) => (c, Action::Export, |_| true),
        Command::Check(c) => (c, Action::Check, |_| true),
        Command::Run(c) => (c, Action::Run, |j| {
            matches!(
                j,
                JobConfig::Single { .. } | JobConfig::ConvergenceCheck { .. }
            )
        }),
        Command::Scan(c) => (c, Action::Run, |j| {
            matches!(
                j,
                JobConfig::Nu0Scan { .. } | JobConfig::IntensityScan { .. }
            )
        }),
        Command::Thermal(c) => (c, Action::Run, |j| matches!(j, JobConfig::Thermal { .. })),
    };
    let mut config = RunConfig::load(&common.config)?;
    if let Some(dir) = common.output {
        config.output_dir = dir;
    }
    if !allowed(&config.job) {
        return Err(CliError::Config(format!(
            "job kind '{}' does not belong to this subcommand",
            config.job.name()
        )));
    }
    let manifest = execute(&config, action)?;
    println!(
        "{}: {} files in {}",
        manifest.job,
        manifest.files.len(),
        config.output_dir.display()
    );
    Ok(())
}
