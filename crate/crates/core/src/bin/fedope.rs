use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use fedope::harness::{
    emit_csv, emit_summary_json, run_experiment, summary_report, ConfigLayer, ExperimentConfig,
};
use fedope::{Algorithm, Error};

#[derive(Parser)]
#[command(version, about = "Private federated online prediction experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fed-DP-OPE-Stoch against a stochastic (or oblivious, as linear) adversary.
    Stoch(Args),
    /// Fed-SVT against an oblivious adversary.
    Svt(Args),
}

#[derive(clap::Args)]
struct Args {
    /// JSON file with the same keys as the flags; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    layer: ConfigLayer,
}

fn run(algorithm: Algorithm, args: Args) -> Result<(), Error> {
    let base = match &args.config {
        Some(path) => ConfigLayer::from_json_file(path)?,
        None => ConfigLayer::default(),
    };
    let cfg = ExperimentConfig::resolve(algorithm, base.overlay(args.layer))?;
    let result = run_experiment(&cfg)?;
    for w in &result.warnings {
        eprintln!("warning: {w}");
    }
    match &cfg.out {
        Some(path) => emit_csv(&result, path)?,
        None => fedope::harness::write_csv(&result, std::io::stdout().lock())?,
    }
    if let Some(path) = &cfg.summary_json {
        emit_summary_json(&result, path)?;
    } else {
        let s = summary_report(&result).summary;
        eprintln!(
            "final regret {:.6} ± {:.6} over {} trial(s), {} scalars communicated",
            s.final_regret_mean, s.final_regret_std, cfg.trials, s.total_comm_scalars
        );
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (algorithm, args) = match cli.command {
        Command::Stoch(a) => (Algorithm::FedStoch, a),
        Command::Svt(a) => (Algorithm::FedSvt, a),
    };
    match run(algorithm, args) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_configuration() { 2 } else { 1 })
        }
    }
}
