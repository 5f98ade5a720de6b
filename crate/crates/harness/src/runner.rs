//! Monte Carlo sweeps comparing the cross-pilot receiver with the multi-pilot baseline.
//!
//! Each frame draws one channel, one set of data bits and one noise stream and
//! runs both layouts on them, so the comparison is paired. A frame whose
//! estimation breaks down (no pilot energy, all-zero profiles or gains) is
//! counted as an erasure: every bit is decided as zero.

use std::io::Write;

use rand::Rng;
use rayon::prelude::*;
use serde::Serialize;

use xpilot_core::channel::{draw_channel, observe, solve_energy, ChannelRealization};
use xpilot_core::dd::idzt;
use xpilot_core::detector::mf_mrc_detect;
use xpilot_core::estimator::{baseline_from_beamformed, beamform_paths, estimate_from_beamformed, EstimateSet};
use xpilot_core::pilots::{build_tx_frame, papr_db_oversampled, PilotScheme};
use xpilot_core::qam::{bit_errors, Qam};

use crate::config::ExperimentConfig;
use crate::seed::{self, Stream};

/// Version of the CSV layout written by [`write_csv`].
pub const CSV_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error("simulation failed: {0}")]
    Core(#[from] xpilot_core::Error),
    #[error("cannot start worker pool: {0}")]
    Pool(#[from] rayon::ThreadPoolBuildError),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Experiment {
    BerVsSnr,
    BerVsPdr,
    PaprVsBer,
}

impl Experiment {
    pub fn name(self) -> &'static str {
        match self {
            Experiment::BerVsSnr => "ber-vs-snr",
            Experiment::BerVsPdr => "ber-vs-pdr",
            Experiment::PaprVsBer => "papr-vs-ber",
        }
    }

    pub fn sweep_values(self, cfg: &ExperimentConfig) -> &[f64] {
        match self {
            Experiment::BerVsSnr => &cfg.sweep.snr_db,
            Experiment::BerVsPdr => &cfg.sweep.pdr_db,
            Experiment::PaprVsBer => &cfg.sweep.papr_pdr_db,
        }
    }

    /// `(snr_db, pdr_db)` at one sweep value.
    pub fn operating_point(self, cfg: &ExperimentConfig, value: f64) -> (f64, f64) {
        match self {
            Experiment::BerVsSnr => (value, cfg.sweep.fixed_pdr_db),
            Experiment::BerVsPdr | Experiment::PaprVsBer => (cfg.sweep.fixed_snr_db, value),
        }
    }
}

/// One CSV row. PAPR columns without suffix belong to the cross-pilot frame.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ResultRow {
    pub sweep_value: f64,
    pub ber_proposed: f64,
    pub ber_baseline: f64,
    pub papr_mean_db: f64,
    pub papr_p99_db: f64,
    pub papr_mean_db_baseline: f64,
    pub papr_p99_db_baseline: f64,
    pub frames: usize,
    /// Seed of this sweep point; [`run_point`] with it reproduces the row.
    pub seed: u64,
}

/// Per-scheme outcome of one frame.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LinkOutcome {
    pub bit_errors: usize,
    pub papr_db: f64,
    pub erased: bool,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct FrameOutcome {
    pub bits: usize,
    pub proposed: LinkOutcome,
    pub baseline: LinkOutcome,
}

/// Resolved, validated simulation inputs shared by all frames.
#[derive(Clone, Debug)]
pub struct Simulation {
    cfg: ExperimentConfig,
    cross: PilotScheme,
    multi: PilotScheme,
    bits_per_frame: usize,
}

enum Receiver {
    Proposed,
    Baseline,
}

impl Simulation {
    pub fn new(cfg: &ExperimentConfig) -> Result<Self, RunError> {
        cfg.validate().map_err(|e| RunError::Config(e.to_string()))?;
        let multi = cfg.baseline_scheme().map_err(RunError::Config)?;
        let qam = Qam::new(cfg.detector.qam_order)?;
        Ok(Self {
            cross: cfg.cross_scheme(),
            multi,
            bits_per_frame: cfg.frame.cells() * qam.bits_per_symbol(),
            cfg: cfg.clone(),
        })
    }

    pub fn config(&self) -> &ExperimentConfig {
        &self.cfg
    }

    pub fn bits_per_frame(&self) -> usize {
        self.bits_per_frame
    }

    /// Simulates one frame of both layouts at `(snr_db, pdr_db)`.
    pub fn frame(&self, snr_db: f64, pdr_db: f64, frame_seed: u64) -> Result<FrameOutcome, RunError> {
        let cfg = &self.cfg;
        let channel = draw_channel(&cfg.channel, &cfg.frame, &mut seed::stream(frame_seed, Stream::Channel))?;
        let mut data_rng = seed::stream(frame_seed, Stream::Data);
        let bits: Vec<u8> = (0..self.bits_per_frame).map(|_| data_rng.random_range(0..2u8)).collect();
        let proposed = self.link(Receiver::Proposed, &channel, &bits, snr_db, pdr_db, frame_seed)?;
        let baseline = self.link(Receiver::Baseline, &channel, &bits, snr_db, pdr_db, frame_seed)?;
        Ok(FrameOutcome {
            bits: bits.len(),
            proposed,
            baseline,
        })
    }

    fn link(
        &self,
        rx: Receiver,
        channel: &ChannelRealization,
        bits: &[u8],
        snr_db: f64,
        pdr_db: f64,
        frame_seed: u64,
    ) -> Result<LinkOutcome, RunError> {
        let cfg = &self.cfg;
        let frame = &cfg.frame;
        let scheme = match rx {
            Receiver::Proposed => &self.cross,
            Receiver::Baseline => &self.multi,
        };
        let sigma2 = cfg.receiver.sigma2;
        let alloc = solve_energy(snr_db, pdr_db, frame.m, frame.n, scheme.pilot_count(frame), sigma2);
        let tx = build_tx_frame(bits, scheme, &alloc, cfg.detector.qam_order, frame)?;
        let s = idzt(&tx.x, frame)?;
        let papr_db = papr_db_oversampled(&s, frame, cfg.papr.oversampling)?;
        // same noise realization for both layouts
        let mut noise = seed::stream(frame_seed, Stream::Noise);
        let obs = observe(&s, channel, cfg.receiver.antennas, sigma2, frame, &mut noise)?;
        let doas = channel.doas();
        let beamformed = beamform_paths(&obs, &doas);
        let estimates = match rx {
            Receiver::Proposed => estimate_from_beamformed(&beamformed, &doas, scheme, &alloc, &cfg.search, frame),
            Receiver::Baseline => {
                baseline_from_beamformed(&beamformed, &doas, scheme, &alloc, &cfg.baseline_window(), frame)
            }
        };
        let detected = estimates.and_then(|est: EstimateSet| {
            mf_mrc_detect(&beamformed, &est, &tx.pilots, &alloc, cfg.detector.qam_order, bits, frame)
        });
        match detected {
            Ok(d) => Ok(LinkOutcome {
                bit_errors: d.bit_errors,
                papr_db,
                erased: false,
            }),
            Err(e @ (xpilot_core::Error::ZeroPilotEnergy
            | xpilot_core::Error::ZeroChannelEstimate
            | xpilot_core::Error::Degenerate(_))) => {
                log::debug!("frame {frame_seed:#x} erased: {e}");
                Ok(LinkOutcome {
                    bit_errors: bit_errors(&vec![0; bits.len()], bits),
                    papr_db,
                    erased: true,
                })
            }
            Err(e) => Err(e.into()),
        }
    }

    /// Runs every frame of one sweep point and aggregates in frame order.
    pub fn point(&self, experiment: Experiment, value: f64, point_seed: u64) -> Result<ResultRow, RunError> {
        let (snr_db, pdr_db) = experiment.operating_point(&self.cfg, value);
        let outcomes = (0..self.cfg.frames)
            .into_par_iter()
            .map(|f| self.frame(snr_db, pdr_db, seed::frame_seed(point_seed, f)))
            .collect::<Result<Vec<_>, _>>()?;
        let erased = outcomes.iter().filter(|o| o.proposed.erased).count();
        let erased_base = outcomes.iter().filter(|o| o.baseline.erased).count();
        if erased + erased_base > 0 {
            log::info!(
                "{} = {value}: {erased} proposed and {erased_base} baseline frames erased",
                experiment.name()
            );
        }
        Ok(aggregate(value, point_seed, &outcomes))
    }
}

fn aggregate(value: f64, point_seed: u64, outcomes: &[FrameOutcome]) -> ResultRow {
    let total_bits: usize = outcomes.iter().map(|o| o.bits).sum();
    let ber = |pick: fn(&FrameOutcome) -> &LinkOutcome| {
        outcomes.iter().map(|o| pick(o).bit_errors).sum::<usize>() as f64 / total_bits as f64
    };
    let papr = |pick: fn(&FrameOutcome) -> &LinkOutcome| {
        let values: Vec<f64> = outcomes.iter().map(|o| pick(o).papr_db).collect();
        (mean(&values), percentile(&values, 0.99))
    };
    let (papr_mean_db, papr_p99_db) = papr(|o| &o.proposed);
    let (papr_mean_db_baseline, papr_p99_db_baseline) = papr(|o| &o.baseline);
    ResultRow {
        sweep_value: value,
        ber_proposed: ber(|o| &o.proposed),
        ber_baseline: ber(|o| &o.baseline),
        papr_mean_db,
        papr_p99_db,
        papr_mean_db_baseline,
        papr_p99_db_baseline,
        frames: outcomes.len(),
        seed: point_seed,
    }
}

fn mean(values: &[f64]) -> f64 {
    values.iter().sum::<f64>() / values.len() as f64
}

/// Nearest-rank percentile.
pub fn percentile(values: &[f64], q: f64) -> f64 {
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let rank = ((q * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

fn pool(workers: Option<usize>) -> Result<rayon::ThreadPool, RunError> {
    Ok(rayon::ThreadPoolBuilder::new()
        .num_threads(workers.unwrap_or(0))
        .build()?)
}

/// Runs a whole sweep on `cfg.workers` threads. Rows follow the sweep order.
pub fn run(cfg: &ExperimentConfig, experiment: Experiment) -> Result<Vec<ResultRow>, RunError> {
    let sim = Simulation::new(cfg)?;
    let values = experiment.sweep_values(cfg).to_vec();
    pool(cfg.workers)?.install(|| {
        values
            .par_iter()
            .enumerate()
            .map(|(i, &v)| sim.point(experiment, v, seed::point_seed(cfg.seed, i)))
            .collect()
    })
}

/// Reruns a single sweep point with the seed recorded in its row.
pub fn run_point(
    cfg: &ExperimentConfig,
    experiment: Experiment,
    value: f64,
    point_seed: u64,
) -> Result<ResultRow, RunError> {
    let sim = Simulation::new(cfg)?;
    pool(cfg.workers)?.install(|| sim.point(experiment, value, point_seed))
}

pub fn run_ber_vs_snr(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>, RunError> {
    run(cfg, Experiment::BerVsSnr)
}

pub fn run_ber_vs_pdr(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>, RunError> {
    run(cfg, Experiment::BerVsPdr)
}

pub fn run_papr_vs_ber(cfg: &ExperimentConfig) -> Result<Vec<ResultRow>, RunError> {
    run(cfg, Experiment::PaprVsBer)
}

/// The comment line that opens every CSV file.
pub fn csv_header_line(cfg: &ExperimentConfig, experiment: Experiment) -> String {
    format!(
        "# xpilot {} csv v{CSV_VERSION} config={} version={}",
        experiment.name(),
        cfg.hash(),
        env!("CARGO_PKG_VERSION")
    )
}

pub fn write_csv<W: Write>(
    mut out: W,
    cfg: &ExperimentConfig,
    experiment: Experiment,
    rows: &[ResultRow],
) -> Result<(), RunError> {
    writeln!(out, "{}", csv_header_line(cfg, experiment))?;
    let mut w = csv::Writer::from_writer(out);
    for row in rows {
        w.serialize(row)?;
    }
    w.flush()?;
    Ok(())
}
