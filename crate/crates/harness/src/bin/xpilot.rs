use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};

use xpilot_harness::selftest::selftest;
use xpilot_harness::{run, write_csv, Experiment, ExperimentConfig};

#[derive(Parser)]
#[command(name = "xpilot", version, about = "Cross-pilot OTFS link simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// BER against SNR at a fixed PDR.
    BerVsSnr(RunArgs),
    /// BER against PDR at a fixed SNR.
    BerVsPdr(RunArgs),
    /// PAPR and BER over a PDR sweep.
    PaprVsBer(RunArgs),
    /// Runs the built-in invariant suites.
    Selftest,
}

#[derive(Args)]
struct RunArgs {
    /// Experiment file; built-in defaults when omitted.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    /// Monte Carlo frames per sweep point.
    #[arg(long)]
    frames: Option<usize>,
    /// Output CSV; standard output when omitted.
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    workers: Option<usize>,
}

impl RunArgs {
    fn load(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path)?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(frames) = self.frames {
            cfg.frames = frames;
        }
        if self.out.is_some() {
            cfg.out = self.out.clone();
        }
        if self.workers.is_some() {
            cfg.workers = self.workers;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn simulate(experiment: Experiment, args: &RunArgs) -> Result<()> {
    let cfg = args.load()?;
    log::info!(
        "{}: {} points x {} frames, seed {}",
        experiment.name(),
        experiment.sweep_values(&cfg).len(),
        cfg.frames,
        cfg.seed
    );
    let rows = run(&cfg, experiment)?;
    match &cfg.out {
        Some(path) => {
            let file = File::create(path).with_context(|| format!("cannot create {}", path.display()))?;
            let mut w = BufWriter::new(file);
            write_csv(&mut w, &cfg, experiment, &rows)?;
            w.flush()?;
        }
        None => write_csv(io::stdout().lock(), &cfg, experiment, &rows)?,
    }
    Ok(())
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::BerVsSnr(a) => simulate(Experiment::BerVsSnr, a),
        Command::BerVsPdr(a) => simulate(Experiment::BerVsPdr, a),
        Command::PaprVsBer(a) => simulate(Experiment::PaprVsBer, a),
        Command::Selftest => {
            let report = selftest();
            println!("{report}");
            return if report.passed() { ExitCode::SUCCESS } else { ExitCode::FAILURE };
        }
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
