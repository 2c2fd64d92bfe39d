use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dynqoi_cli::config::{preset, PipelineConfig};
use dynqoi_cli::{run_all, run_stage, CliError, Stage};

#[derive(Parser)]
#[command(name = "dynqoi", version, about = "Learn QoI from time-series ensembles and invert for parameter densities")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    /// Overrides `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `seed`.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    Generate(RunArgs),
    Filter(RunArgs),
    Dynamics(RunArgs),
    Qoi(RunArgs),
    Invert(RunArgs),
    Metrics(RunArgs),
    /// Every stage in order.
    All(RunArgs),
    /// Writes a ready-made config for one of the benchmark experiments.
    Preset {
        /// oscillator, hopf, shock-6.5 or shock-9.5
        name: String,
        /// Where to write the config JSON.
        #[arg(long)]
        config: PathBuf,
        /// Output directory recorded in the config.
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

fn load(args: &RunArgs) -> Result<PipelineConfig, CliError> {
    let mut cfg = PipelineConfig::load(&args.config)?;
    if let Some(out) = &args.out {
        cfg.output_dir = out.clone();
    }
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    Ok(cfg)
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (stage, args) = match cli.command {
        Command::Generate(a) => (Some(Stage::Generate), a),
        Command::Filter(a) => (Some(Stage::Filter), a),
        Command::Dynamics(a) => (Some(Stage::Dynamics), a),
        Command::Qoi(a) => (Some(Stage::Qoi), a),
        Command::Invert(a) => (Some(Stage::Invert), a),
        Command::Metrics(a) => (Some(Stage::Metrics), a),
        Command::All(a) => (None, a),
        Command::Preset { name, config, out, seed } => {
            let mut cfg = preset(&name, out)?;
            if let Some(s) = seed {
                cfg.seed = s;
            }
            std::fs::write(&config, cfg.to_json() + "\n")?;
            return Ok(());
        }
    };
    let cfg = load(&args)?;
    match stage {
        Some(s) => run_stage(s, &cfg),
        None => run_all(&cfg),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
