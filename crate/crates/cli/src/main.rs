use std::path::PathBuf;
use std::process::ExitCode;

use acsm_cli::run::{cmd_compare, cmd_sweep, cmd_train, generate_reference};
use acsm_cli::ExperimentConfig;
use acsm_core::sampler::SamplerKind;
use clap::{Parser, Subcommand};

#[derive(Parser)]
#[command(name = "acsm", version, about = "Causal PINN training with adaptive collocation sampling")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the configured problem spectrally and write the REFSOL file.
    GenerateReference {
        #[arg(long)]
        config: PathBuf,
    },
    /// Train one (sampler, seed) cell.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        sampler: SamplerKind,
        #[arg(long)]
        seed: u64,
    },
    /// Train every sampler kind for every seed and tabulate errors.
    Compare {
        #[arg(long)]
        config: PathBuf,
    },
    /// Repeat the comparison over a list of collocation budgets.
    Sweep {
        #[arg(long)]
        config: PathBuf,
    },
}

fn run(cli: Cli) -> anyhow::Result<()> {
    match cli.command {
        Command::GenerateReference { config } => {
            generate_reference(&ExperimentConfig::load(&config)?)?;
        }
        Command::Train { config, sampler, seed } => {
            let r = cmd_train(&ExperimentConfig::load(&config)?, sampler, seed)?;
            println!("{} N_r={} seed={} relative_l2={:e}", r.kind, r.n_r, r.seed, r.relative_l2);
        }
        Command::Compare { config } => {
            for r in cmd_compare(&ExperimentConfig::load(&config)?)? {
                println!("{} N_r={} seed={} relative_l2={:e}", r.kind, r.n_r, r.seed, r.relative_l2);
            }
        }
        Command::Sweep { config } => {
            cmd_sweep(&ExperimentConfig::load(&config)?)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("info")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
