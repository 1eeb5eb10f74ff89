use clap::{Args, Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use ursst::experiments::{run_experiment, Experiment, ExperimentConfig};
use ursst::Error;

#[derive(Parser, Debug)]
#[command(name = "ursst", version, about = "Aged-CSIT MF beamforming experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Empirical outage of the bound-driven power adaptation.
    Outage(RunArgs),
    /// Histograms of bound values over CSIT draws.
    Pdf(RunArgs),
    /// Normalized Chernoff bound against the hardened limit, per M.
    Hardening(RunArgs),
    /// Average transmit power over the p_dec grid.
    PowerPdec(RunArgs),
    /// Average transmit power over the M grid.
    PowerM(RunArgs),
    /// Energy-recycling aSNR and bound ratios, per M.
    Recycling(RunArgs),
    /// Every bound kind for every scheme.
    BoundsCompare(RunArgs),
}

#[derive(Args, Debug)]
struct RunArgs {
    /// JSON experiment configuration.
    #[arg(long)]
    config: PathBuf,
    /// Overrides the config seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Overrides the config trial count.
    #[arg(long)]
    trials: Option<u64>,
    /// Worker threads (defaults to the available parallelism).
    #[arg(long)]
    workers: Option<usize>,
    /// Output directory (defaults to the directory of `output_path`).
    #[arg(long)]
    out_dir: Option<PathBuf>,
}

impl Command {
    fn split(self) -> (Experiment, RunArgs) {
        match self {
            Command::Outage(a) => (Experiment::Outage, a),
            Command::Pdf(a) => (Experiment::Pdf, a),
            Command::Hardening(a) => (Experiment::Hardening, a),
            Command::PowerPdec(a) => (Experiment::PowerPdec, a),
            Command::PowerM(a) => (Experiment::PowerM, a),
            Command::Recycling(a) => (Experiment::Recycling, a),
            Command::BoundsCompare(a) => (Experiment::BoundsCompare, a),
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::Config(_) | Error::InvalidArgument(_) | Error::OutOfRange(_) | Error::Json(_) => 2,
        Error::Infeasible(_) => 3,
        _ => 1,
    }
}

fn run(experiment: Experiment, args: RunArgs) -> ursst::Result<()> {
    let mut cfg = ExperimentConfig::from_path(&args.config)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if let Some(trials) = args.trials {
        cfg.trials = trials;
    }
    let workers = args
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let config_dir = args.config.parent().unwrap_or(Path::new(""));
    let out_dir = args.out_dir.unwrap_or_default();
    let out = run_experiment(experiment, &cfg, config_dir, &out_dir, workers)?;
    println!("{} rows -> {}", out.rows, out.csv.display());
    println!("manifest -> {}", out.manifest.display());
    Ok(())
}

fn main() -> ExitCode {
    let (experiment, args) = Cli::parse().command.split();
    match run(experiment, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
