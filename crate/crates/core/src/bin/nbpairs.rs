use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use narrowband_pairs::config::{load_config, Experiment, RunConfig};
use narrowband_pairs::pipeline;

#[derive(Parser)]
#[command(name = "nbpairs", version, about = "Narrowband entangled photon-pair source simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Degenerate phase matching, temperature tuning and focusing.
    Phasematch(RunArgs),
    /// SPDC envelope and filter-line transmission.
    Spectrum(RunArgs),
    /// Simulate detection time tags and export them.
    Simulate(RunArgs),
    /// Coincidence histogram, ring-down fit and brightness.
    Correlate(RunArgs),
    /// Polarization tomography and entanglement metrics.
    Tomography(RunArgs),
    /// Every stage except the raw time-tag export.
    FullPipeline(RunArgs),
    /// Print the default configuration.
    DefaultConfig,
}

#[derive(Args)]
struct RunArgs {
    /// TOML configuration; missing keys take their defaults.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Poling grating by degenerate wavelength.
    #[arg(long, value_enum)]
    grating: Option<Grating>,
}

#[derive(Clone, Copy, ValueEnum)]
enum Grating {
    #[value(name = "850")]
    Nm850,
    #[value(name = "854")]
    Nm854,
}

fn build_config(experiment: Experiment, args: &RunArgs) -> narrowband_pairs::Result<RunConfig> {
    let mut config = match &args.config {
        Some(path) => load_config(path)?,
        None => RunConfig::default(),
    };
    config.experiment = experiment;
    if let Some(seed) = args.seed {
        config.seed = seed;
    }
    if let Some(out) = &args.out {
        config.output_dir = out.clone();
    }
    if let Some(g) = args.grating {
        config.crystal.grating_index = match g {
            Grating::Nm850 => 0,
            Grating::Nm854 => 1,
        };
    }
    config.validate()?;
    Ok(config)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (experiment, args) = match cli.command {
        Command::Phasematch(a) => (Experiment::Phasematch, a),
        Command::Spectrum(a) => (Experiment::Spectrum, a),
        Command::Simulate(a) => (Experiment::Simulate, a),
        Command::Correlate(a) => (Experiment::Correlate, a),
        Command::Tomography(a) => (Experiment::Tomography, a),
        Command::FullPipeline(a) => (Experiment::FullPipeline, a),
        Command::DefaultConfig => {
            return match RunConfig::default().dump() {
                Ok(text) => {
                    print!("{text}");
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("nbpairs: {e}");
                    ExitCode::from(1)
                }
            };
        }
    };
    let config = match build_config(experiment, &args) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("nbpairs: {e}");
            return ExitCode::from(2);
        }
    };
    match pipeline::run(&config) {
        Ok(out) => {
            for f in &out.files {
                println!("{}", f.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("nbpairs: {e}");
            ExitCode::from(1)
        }
    }
}
