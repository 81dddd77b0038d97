use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use rollsim_cli::commands::{cmd_gen, cmd_pack, cmd_partition, cmd_simulate, cmd_sweep, Format};
use rollsim_cli::load_scenario;
use rollsim_core::error::Error;

#[derive(Parser)]
#[command(
    name = "rollsim",
    about = "Scheduling and discrete-event simulation toolkit for multimodal RL training pipelines",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a workload trace from the scenario's workload spec.
    Gen {
        #[arg(long)]
        config: PathBuf,
        /// Output directory; the trace lands at <out>/trace.jsonl.
        #[arg(long)]
        out: PathBuf,
        /// Overrides the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Run the policy comparison and write report, timelines and traces.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Pack the workload into bins and report balance quality.
    Pack {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Plan visual sharding, volumes, dispatch and MMTP comparisons.
    Partition {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
    /// Grid over named config paths, one report row per point.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
        /// Sweep points to execute in parallel.
        #[arg(long, default_value_t = 1)]
        parallel: usize,
        #[arg(long, value_enum, default_value_t = Format::Json)]
        format: Format,
    },
}

fn run(cli: Cli) -> Result<(), Error> {
    let (config, out, artifacts) = match cli.command {
        Command::Gen { config, out, seed } => {
            let (scenario, _) = load_scenario(&config, seed)?;
            let base = config.parent().unwrap_or(std::path::Path::new("."));
            (config.clone(), out, cmd_gen(&scenario, base)?)
        }
        Command::Simulate {
            config,
            out,
            seed,
            format,
        } => {
            let (scenario, _) = load_scenario(&config, seed)?;
            let base = config.parent().unwrap_or(std::path::Path::new("."));
            (config.clone(), out, cmd_simulate(&scenario, base, format)?)
        }
        Command::Pack {
            config,
            out,
            seed,
            format,
        } => {
            let (scenario, _) = load_scenario(&config, seed)?;
            let base = config.parent().unwrap_or(std::path::Path::new("."));
            (config.clone(), out, cmd_pack(&scenario, base, format)?)
        }
        Command::Partition {
            config,
            out,
            seed,
            format,
        } => {
            let (scenario, _) = load_scenario(&config, seed)?;
            let base = config.parent().unwrap_or(std::path::Path::new("."));
            (config.clone(), out, cmd_partition(&scenario, base, format)?)
        }
        Command::Sweep {
            config,
            out,
            seed,
            parallel,
            format,
        } => {
            let (scenario, raw) = load_scenario(&config, seed)?;
            let base = config.parent().unwrap_or(std::path::Path::new("."));
            (
                config.clone(),
                out,
                cmd_sweep(&scenario, &raw, base, parallel.max(1), format)?,
            )
        }
    };
    let written = artifacts.persist(&out)?;
    println!("{}: {} file(s) written to {}", config.display(), written.len(), out.display());
    for path in written {
        println!("  {}", path.display());
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e @ Error::Config { .. }) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(3)
        }
    }
}
