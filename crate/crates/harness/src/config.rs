//! Experiment configuration, read from a TOML file.
//!
//! Every block has defaults matching the 4-path vehicular scenario, so an empty
//! file is a valid configuration. Errors carry the line of the offending key
//! whenever it can be located in the source text.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use xpilot_core::channel::ChannelProfile;
use xpilot_core::dd::FrameConfig;
use xpilot_core::estimator::{BaselineWindow, SearchConfig};
use xpilot_core::pilots::{uniform_grid, PilotScheme};
use xpilot_core::qam::Qam;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("{origin}: {message}")]
    Parse { origin: String, message: String },
    #[error("{origin}:{line}: [{table}] {key}: {message}")]
    Invalid {
        origin: String,
        line: usize,
        table: String,
        key: String,
        message: String,
    },
    #[error("{origin}: [{table}] {key}: {message}")]
    InvalidUnlocated {
        origin: String,
        table: String,
        key: String,
        message: String,
    },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default = "default_frames")]
    pub frames: usize,
    #[serde(default = "default_seed")]
    pub seed: u64,
    /// Output CSV path; standard output when absent.
    #[serde(default, skip_serializing)]
    pub out: Option<PathBuf>,
    /// Worker threads; all cores when absent or zero. Never affects results.
    #[serde(default, skip_serializing)]
    pub workers: Option<usize>,
    #[serde(default = "default_frame")]
    pub frame: FrameConfig,
    #[serde(default = "ChannelProfile::vehicular_4path")]
    pub channel: ChannelProfile,
    #[serde(default)]
    pub receiver: ReceiverConfig,
    #[serde(default)]
    pub scheme: SchemeConfig,
    #[serde(default)]
    pub detector: DetectorConfig,
    #[serde(default)]
    pub search: SearchConfig,
    #[serde(default)]
    pub papr: PaprConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
}

fn default_frames() -> usize {
    200
}

fn default_seed() -> u64 {
    1
}

fn default_frame() -> FrameConfig {
    FrameConfig::new(64, 16, 30e3, 16, 5.9e9).expect("default frame is valid")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ReceiverConfig {
    #[serde(default = "default_antennas")]
    pub antennas: usize,
    /// Noise variance per antenna sample; signal energies are scaled to the SNR.
    #[serde(default = "default_sigma2")]
    pub sigma2: f64,
}

fn default_antennas() -> usize {
    32
}

fn default_sigma2() -> f64 {
    1.0
}

impl Default for ReceiverConfig {
    fn default() -> Self {
        Self {
            antennas: default_antennas(),
            sigma2: default_sigma2(),
        }
    }
}

/// Both layouts are always simulated on the same channel and noise draws.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SchemeConfig {
    #[serde(default)]
    pub cross: CrossConfig,
    #[serde(default)]
    pub baseline: BaselineConfig,
}

/// Cross position; the grid centre when unset.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CrossConfig {
    pub m_p: Option<usize>,
    pub n_p: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BaselineConfig {
    /// Lattice size along delay.
    #[serde(default = "default_lattice")]
    pub delay_count: usize,
    /// Lattice size along Doppler.
    #[serde(default = "default_lattice")]
    pub doppler_count: usize,
    /// Explicit pilot cells `[m, n]`, replacing the lattice.
    #[serde(default)]
    pub positions: Option<Vec<(usize, usize)>>,
    /// Integer search window; one lattice period when unset.
    #[serde(default)]
    pub window_delay: Option<usize>,
    #[serde(default)]
    pub window_doppler: Option<usize>,
}

fn default_lattice() -> usize {
    4
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            delay_count: default_lattice(),
            doppler_count: default_lattice(),
            positions: None,
            window_delay: None,
            window_doppler: None,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DetectorConfig {
    #[serde(default = "default_qam")]
    pub qam_order: usize,
}

fn default_qam() -> usize {
    4
}

impl Default for DetectorConfig {
    fn default() -> Self {
        Self {
            qam_order: default_qam(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PaprConfig {
    /// Band-limited interpolation factor applied before measuring PAPR.
    #[serde(default = "default_oversampling")]
    pub oversampling: usize,
}

fn default_oversampling() -> usize {
    1
}

impl Default for PaprConfig {
    fn default() -> Self {
        Self {
            oversampling: default_oversampling(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepConfig {
    /// SNR points for `ber-vs-snr`, at `fixed_pdr_db`.
    #[serde(default = "default_snr_list")]
    pub snr_db: Vec<f64>,
    /// PDR points for `ber-vs-pdr`, at `fixed_snr_db`. `-inf` switches pilots off.
    #[serde(default = "default_pdr_list")]
    pub pdr_db: Vec<f64>,
    /// PDR points for `papr-vs-ber`, at `fixed_snr_db`.
    #[serde(default = "default_papr_list")]
    pub papr_pdr_db: Vec<f64>,
    #[serde(default = "default_fixed_pdr")]
    pub fixed_pdr_db: f64,
    #[serde(default = "default_fixed_snr")]
    pub fixed_snr_db: f64,
}

fn default_snr_list() -> Vec<f64> {
    vec![-6.0, -2.0, 2.0, 6.0]
}

fn default_pdr_list() -> Vec<f64> {
    vec![-20.0, -10.0, -5.0, -2.0, 0.0, 10.0]
}

fn default_papr_list() -> Vec<f64> {
    vec![-20.0, -15.0, -10.0, -5.0, -2.0, 0.0, 5.0, 10.0]
}

fn default_fixed_pdr() -> f64 {
    -5.0
}

fn default_fixed_snr() -> f64 {
    -2.0
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            snr_db: default_snr_list(),
            pdr_db: default_pdr_list(),
            papr_pdr_db: default_papr_list(),
            fixed_pdr_db: default_fixed_pdr(),
            fixed_snr_db: default_fixed_snr(),
        }
    }
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        toml::from_str("").expect("empty config uses defaults")
    }
}

/// A failed check, named by table and key so it can be traced to a line.
struct Problem {
    table: &'static str,
    key: &'static str,
    message: String,
}

impl Problem {
    fn new(table: &'static str, key: &'static str, message: impl fmt::Display) -> Self {
        Self {
            table,
            key,
            message: message.to_string(),
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text, &path.display().to_string())
    }

    /// Parses and validates `text`; `origin` names the source in messages.
    pub fn parse(text: &str, origin: &str) -> Result<Self, ConfigError> {
        let cfg: Self = toml::from_str(text).map_err(|e| ConfigError::Parse {
            origin: origin.to_string(),
            message: e.to_string().trim_end().to_string(),
        })?;
        cfg.check().map_err(|p| locate_problem(p, text, origin))?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        self.check().map_err(|p| ConfigError::InvalidUnlocated {
            origin: "<config>".into(),
            table: p.table.into(),
            key: p.key.into(),
            message: p.message,
        })
    }

    fn check(&self) -> Result<(), Problem> {
        if self.frames == 0 {
            return Err(Problem::new("", "frames", "must be at least 1"));
        }
        self.frame
            .validate()
            .map_err(|e| Problem::new("frame", frame_key(&self.frame), e))?;
        self.channel
            .validate(&self.frame)
            .map_err(|e| Problem::new("channel", channel_key(&e.to_string()), e))?;
        if self.receiver.antennas == 0 {
            return Err(Problem::new("receiver", "antennas", "must be at least 1"));
        }
        if !(self.receiver.sigma2 > 0.0 && self.receiver.sigma2.is_finite()) {
            return Err(Problem::new("receiver", "sigma2", "must be positive and finite"));
        }
        let (m_p, n_p) = self.cross_position();
        if m_p >= self.frame.m {
            return Err(Problem::new("scheme.cross", "m_p", format!("must be below M = {}", self.frame.m)));
        }
        if n_p >= self.frame.n {
            return Err(Problem::new("scheme.cross", "n_p", format!("must be below N = {}", self.frame.n)));
        }
        let base = &self.scheme.baseline;
        match &base.positions {
            Some(_) => {
                self.baseline_scheme()
                    .and_then(|s| s.pilot_matrix(&self.frame).map_err(|e| e.to_string()))
                    .map_err(|e| Problem::new("scheme.baseline", "positions", e))?;
            }
            None => {
                uniform_grid(base.delay_count, base.doppler_count, self.frame.m, self.frame.n)
                    .map_err(|e| Problem::new("scheme.baseline", "delay_count", e))?;
            }
        }
        if base.window_delay == Some(0) {
            return Err(Problem::new("scheme.baseline", "window_delay", "must be at least 1"));
        }
        if base.window_doppler == Some(0) {
            return Err(Problem::new("scheme.baseline", "window_doppler", "must be at least 1"));
        }
        Qam::new(self.detector.qam_order).map_err(|e| Problem::new("detector", "qam_order", e))?;
        self.search
            .validate()
            .map_err(|e| Problem::new("search", "fine_step", e))?;
        if self.papr.oversampling == 0 {
            return Err(Problem::new("papr", "oversampling", "must be at least 1"));
        }
        let s = &self.sweep;
        for (key, list) in [("snr_db", &s.snr_db), ("pdr_db", &s.pdr_db), ("papr_pdr_db", &s.papr_pdr_db)] {
            if list.is_empty() {
                return Err(Problem::new("sweep", key, "list must not be empty"));
            }
        }
        if s.snr_db.iter().any(|v| !v.is_finite()) {
            return Err(Problem::new("sweep", "snr_db", "SNR values must be finite"));
        }
        for (key, list) in [("pdr_db", &s.pdr_db), ("papr_pdr_db", &s.papr_pdr_db)] {
            if list.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
                return Err(Problem::new("sweep", key, "PDR values must be finite or -inf"));
            }
        }
        if !s.fixed_snr_db.is_finite() {
            return Err(Problem::new("sweep", "fixed_snr_db", "must be finite"));
        }
        if s.fixed_pdr_db.is_nan() || s.fixed_pdr_db == f64::INFINITY {
            return Err(Problem::new("sweep", "fixed_pdr_db", "must be finite or -inf"));
        }
        Ok(())
    }

    pub fn cross_position(&self) -> (usize, usize) {
        let c = &self.scheme.cross;
        (c.m_p.unwrap_or(self.frame.m / 2), c.n_p.unwrap_or(self.frame.n / 2))
    }

    pub fn cross_scheme(&self) -> PilotScheme {
        let (m_p, n_p) = self.cross_position();
        PilotScheme::Cross { m_p, n_p }
    }

    pub fn baseline_scheme(&self) -> Result<PilotScheme, String> {
        let base = &self.scheme.baseline;
        match &base.positions {
            Some(p) => Ok(PilotScheme::Multi { positions: p.clone() }),
            None => PilotScheme::uniform_multi(base.delay_count, base.doppler_count, &self.frame)
                .map_err(|e| e.to_string()),
        }
    }

    pub fn baseline_window(&self) -> BaselineWindow {
        let base = &self.scheme.baseline;
        let period = BaselineWindow::for_lattice(base.delay_count, base.doppler_count, &self.frame);
        BaselineWindow {
            delay_span: base.window_delay.unwrap_or(period.delay_span),
            doppler_span: base.window_doppler.unwrap_or(period.doppler_span),
        }
    }

    /// SHA-256 of the canonical serialization, excluding `out` and `workers`.
    pub fn hash(&self) -> String {
        let canonical = toml::to_string(self).expect("config serializes");
        Sha256::digest(canonical.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }
}

fn frame_key(f: &FrameConfig) -> &'static str {
    if f.m < 2 {
        "m"
    } else if f.n < 2 {
        "n"
    } else if !(f.delta_f.is_finite() && f.delta_f > 0.0) {
        "delta_f"
    } else {
        "fc"
    }
}

fn channel_key(message: &str) -> &'static str {
    if message.contains("delay") {
        "tau_s"
    } else if message.contains("DoA") {
        "doa_deg"
    } else if message.contains("v_max") {
        "v_max_mps"
    } else if message.contains("Doppler") {
        "doppler"
    } else {
        "tau_s"
    }
}

fn locate_problem(p: Problem, text: &str, origin: &str) -> ConfigError {
    match find_key_line(text, p.table, p.key) {
        Some(line) => ConfigError::Invalid {
            origin: origin.into(),
            line,
            table: p.table.into(),
            key: p.key.into(),
            message: p.message,
        },
        None => ConfigError::InvalidUnlocated {
            origin: origin.into(),
            table: p.table.into(),
            key: p.key.into(),
            message: p.message,
        },
    }
}

/// 1-based line of `key = ...` inside `[table]` (the root table when empty),
/// falling back to the table header when the key itself is defaulted.
pub fn find_key_line(text: &str, table: &str, key: &str) -> Option<usize> {
    let mut current = String::new();
    let mut header = None;
    for (i, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if let Some(name) = line.strip_prefix('[').and_then(|l| l.strip_suffix(']')) {
            current = name.trim().to_string();
            if current == table {
                header = Some(i + 1);
            }
            continue;
        }
        if current == table {
            if let Some((k, _)) = line.split_once('=') {
                if k.trim() == key {
                    return Some(i + 1);
                }
            }
        }
    }
    header
}
