//! `qaqc` — run compilation and noise experiments from a TOML config.
//!
//! Exit codes: 0 on success, 2 on a configuration error, 3 on a numerical
//! failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qaqc_core::harness::{run, Depths, Experiment, ExperimentConfig};
use qaqc_core::Error;

#[derive(Parser, Debug)]
#[command(
    name = "qaqc",
    version,
    about = "Variational compilation of three-qubit gates"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Multi-restart noiseless compilation at one Trotter depth.
    Compile(Overrides),
    /// Compile independently at each depth of `--m`.
    TrotterSweep(Overrides),
    /// Charge/nuclear robustness curves of the compiled parameters.
    NoiseSweep(Overrides),
    /// Nelder-Mead training under amplitude damping over a grid of p.
    DampingSweep(Overrides),
    /// Gradient variance over random initial points.
    GradStats(Overrides),
}

#[derive(Args, Debug)]
struct Overrides {
    /// TOML config; every key is optional.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Master seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Output directory; each run gets a fresh subdirectory.
    #[arg(long)]
    out: Option<PathBuf>,
    /// `toffoli`, `fredkin` or a matrix file.
    #[arg(long)]
    target: Option<String>,
    /// Depth, list (`1,2,4`) or inclusive range (`1-8`).
    #[arg(long)]
    m: Option<String>,
    /// Optimizer restarts (the noisy optimizer for damping-sweep).
    #[arg(long)]
    restarts: Option<usize>,
}

impl Command {
    fn split(self) -> (Experiment, Overrides) {
        match self {
            Command::Compile(o) => (Experiment::Compile, o),
            Command::TrotterSweep(o) => (Experiment::TrotterSweep, o),
            Command::NoiseSweep(o) => (Experiment::CoherentNoiseSweep, o),
            Command::DampingSweep(o) => (Experiment::DampingSweep, o),
            Command::GradStats(o) => (Experiment::GradStats, o),
        }
    }
}

fn build_config(experiment: Experiment, o: Overrides) -> Result<ExperimentConfig, Error> {
    let mut cfg = match &o.config {
        Some(path) => ExperimentConfig::from_path(path)?,
        None => ExperimentConfig::default(),
    };
    cfg.experiment = experiment;
    if let Some(seed) = o.seed {
        cfg.master_seed = seed;
    }
    if let Some(out) = o.out {
        cfg.output_dir = out;
    }
    if let Some(target) = o.target {
        cfg.target = target;
    }
    if let Some(m) = o.m {
        cfg.m = Some(m.parse::<Depths>()?);
    }
    if let Some(r) = o.restarts {
        match experiment {
            Experiment::DampingSweep => cfg.damping.optimizer.restarts = r,
            _ => cfg.optimizer.restarts = r,
        }
    }
    cfg.validate()?;
    Ok(cfg)
}

fn exit_code(err: &Error) -> ExitCode {
    if err.is_config() {
        ExitCode::from(2)
    } else {
        ExitCode::from(3)
    }
}

fn main() -> ExitCode {
    let (experiment, overrides) = Cli::parse().command.split();
    let cfg = match build_config(experiment, overrides) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    };
    match run(&cfg) {
        Ok(out) => {
            println!("{}", out.dir.display());
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
