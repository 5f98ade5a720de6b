//! Doubly-dispersive multipath channel with receive-side ULA.
//!
//! Each path carries a complex gain, a fractional delay `l` and Doppler `k`
//! (in grid bins) and a direction of arrival. The received observation is the
//! `MN x N_r` matrix `R = Σ_p α_p H_p(s) a(θ_p)^T + noise`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::dd::{apply_path_operator, FrameConfig, TimeVector, SPEED_OF_LIGHT};
use crate::error::{shape_err, Error, Result};

/// How per-path Doppler shifts are produced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "kebab-case")]
pub enum DopplerMode {
    /// `ν_p = f_c (v_max/c) cos φ_p` with `φ_p ~ U[0, 2π)`.
    RandomCosine,
    /// Supplied shifts in Hz, one per path.
    Fixed { nu_hz: Vec<f64> },
}

/// Average multipath statistics from which realizations are drawn.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ChannelProfile {
    /// Path delays in seconds.
    pub tau_s: Vec<f64>,
    /// Average path powers in dB (normalized to unit sum when drawing).
    pub power_db: Vec<f64>,
    /// Directions of arrival in degrees.
    pub doa_deg: Vec<f64>,
    /// Maximum speed in m/s.
    pub v_max_mps: f64,
    pub doppler: DopplerMode,
    /// Pairwise DoA separation below which a warning is logged.
    #[serde(default = "default_min_separation")]
    pub min_doa_separation_deg: f64,
}

fn default_min_separation() -> f64 {
    5.0
}

impl ChannelProfile {
    /// The 4-path vehicular profile: delays `[0, 0.9, 2.4, 3] μs`, powers
    /// `[0, -1, -5, -7] dB`, DoAs `[10, 42, -25, 24]°`, 500 km/h.
    pub fn vehicular_4path() -> Self {
        Self {
            tau_s: vec![0.0, 0.9e-6, 2.4e-6, 3.0e-6],
            power_db: vec![0.0, -1.0, -5.0, -7.0],
            doa_deg: vec![10.0, 42.0, -25.0, 24.0],
            v_max_mps: 500.0 / 3.6,
            doppler: DopplerMode::RandomCosine,
            min_doa_separation_deg: default_min_separation(),
        }
    }

    pub fn paths(&self) -> usize {
        self.tau_s.len()
    }

    /// Largest Doppler shift the profile can produce, in Hz.
    pub fn max_doppler(&self, cfg: &FrameConfig) -> f64 {
        match &self.doppler {
            DopplerMode::RandomCosine => cfg.fc * self.v_max_mps / SPEED_OF_LIGHT,
            DopplerMode::Fixed { nu_hz } => nu_hz.iter().fold(0.0, |a, v| a.max(v.abs())),
        }
    }

    pub fn validate(&self, cfg: &FrameConfig) -> Result<()> {
        let p = self.paths();
        if p == 0 {
            return Err(Error::InvalidProfile("at least one path is required".into()));
        }
        if self.power_db.len() != p || self.doa_deg.len() != p {
            return Err(Error::InvalidProfile(format!(
                "tau_s, power_db and doa_deg must have equal lengths ({}, {}, {})",
                p,
                self.power_db.len(),
                self.doa_deg.len()
            )));
        }
        if let DopplerMode::Fixed { nu_hz } = &self.doppler {
            if nu_hz.len() != p {
                return Err(Error::InvalidProfile(format!(
                    "fixed Doppler list has {} entries for {} paths",
                    nu_hz.len(),
                    p
                )));
            }
        }
        let bound = cfg.max_delay();
        for &tau in &self.tau_s {
            if !(tau >= 0.0 && tau < bound) {
                return Err(Error::InvalidProfile(format!(
                    "delay {tau:e} s outside [0, {bound:e}) covered by the cyclic prefix"
                )));
            }
        }
        for &doa in &self.doa_deg {
            if !(doa.abs() < 90.0) {
                return Err(Error::InvalidProfile(format!("DoA {doa}° outside (-90°, 90°)")));
            }
        }
        if !(self.v_max_mps.is_finite() && self.v_max_mps >= 0.0) {
            return Err(Error::InvalidProfile("v_max_mps must be non-negative".into()));
        }
        for i in 0..p {
            for j in i + 1..p {
                let sep = (self.doa_deg[i] - self.doa_deg[j]).abs();
                if sep < self.min_doa_separation_deg {
                    log::warn!(
                        "paths {i} and {j} are only {sep:.2}° apart; angular separation may fail"
                    );
                }
            }
        }
        Ok(())
    }

    /// Path powers in linear scale, normalized to unit sum.
    pub fn normalized_powers(&self) -> Vec<f64> {
        let lin: Vec<f64> = self.power_db.iter().map(|db| 10f64.powf(db / 10.0)).collect();
        let total: f64 = lin.iter().sum();
        lin.into_iter().map(|p| p / total).collect()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathParams {
    pub alpha: Complex64,
    /// Fractional delay in bins, `τ B`.
    pub l: f64,
    /// Fractional Doppler in bins, `ν N T'`.
    pub k: f64,
    /// Direction of arrival in radians.
    pub theta: f64,
}

impl PathParams {
    /// Builds a path from physical delay (s), Doppler (Hz) and DoA (rad).
    pub fn from_physical(alpha: Complex64, tau: f64, nu: f64, theta: f64, cfg: &FrameConfig) -> Self {
        Self {
            alpha,
            l: tau * cfg.bandwidth(),
            k: nu * cfg.n as f64 * cfg.block_period(),
            theta,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ChannelRealization {
    pub paths: Vec<PathParams>,
}

impl ChannelRealization {
    pub fn doas(&self) -> Vec<f64> {
        self.paths.iter().map(|p| p.theta).collect()
    }
}

/// Received samples across the array, `MN x N_r`, stored sample-major.
#[derive(Clone, Debug, PartialEq)]
pub struct SpatialObservation {
    samples: usize,
    antennas: usize,
    data: Vec<Complex64>,
    sigma2: f64,
}

impl SpatialObservation {
    pub fn from_rows(samples: usize, antennas: usize, data: Vec<Complex64>, sigma2: f64) -> Result<Self> {
        if data.len() != samples * antennas {
            return Err(shape_err(samples * antennas, data.len()));
        }
        Ok(Self {
            samples,
            antennas,
            data,
            sigma2,
        })
    }

    pub fn samples(&self) -> usize {
        self.samples
    }

    pub fn antennas(&self) -> usize {
        self.antennas
    }

    pub fn sigma2(&self) -> f64 {
        self.sigma2
    }

    pub fn get(&self, i: usize, a: usize) -> Complex64 {
        self.data[i * self.antennas + a]
    }

    /// Row `i`: the `N_r` antenna outputs for time sample `i`.
    pub fn row(&self, i: usize) -> &[Complex64] {
        &self.data[i * self.antennas..(i + 1) * self.antennas]
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }
}

/// Energy split between data and pilots for a target SNR and PDR.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EnergyAllocation {
    pub es: f64,
    pub ep: f64,
    /// `E_p/E_s`, linear.
    pub pdr: f64,
    /// Frame energy `MN E_s + N_p E_p`.
    pub ef: f64,
    /// `E_f/(MN σ²)`, linear.
    pub snr: f64,
}

pub fn db_to_lin(db: f64) -> f64 {
    10f64.powf(db / 10.0)
}

/// Solves `E_s`, `E_p` from the SNR and PDR targets with fixed `σ²`.
///
/// A PDR of `-inf` dB yields `E_p = 0`.
pub fn solve_energy(snr_db: f64, pdr_db: f64, m: usize, n: usize, pilots: usize, sigma2: f64) -> EnergyAllocation {
    let snr = db_to_lin(snr_db);
    let pdr = db_to_lin(pdr_db);
    let mn = (m * n) as f64;
    let es = snr * mn * sigma2 / (mn + pilots as f64 * pdr);
    let ep = pdr * es;
    let ef = mn * es + pilots as f64 * ep;
    EnergyAllocation {
        es,
        ep,
        pdr,
        ef,
        snr: ef / (mn * sigma2),
    }
}

/// ULA response with half-wavelength spacing: entry `i` is `e^{jπ i sin θ}`.
pub fn steering_vector(theta: f64, antennas: usize) -> Vec<Complex64> {
    let step = PI * theta.sin();
    (0..antennas)
        .map(|i| Complex64::from_polar(1.0, step * i as f64))
        .collect()
}

/// Draws one frame's channel: Rayleigh gains with the profile's normalized
/// powers, Dopplers per the profile's mode.
pub fn draw_channel<R: Rng + ?Sized>(
    profile: &ChannelProfile,
    cfg: &FrameConfig,
    rng: &mut R,
) -> Result<ChannelRealization> {
    profile.validate(cfg)?;
    let powers = profile.normalized_powers();
    let nu_max = cfg.fc * profile.v_max_mps / SPEED_OF_LIGHT;
    let mut paths = Vec::with_capacity(profile.paths());
    for (p, &power) in powers.iter().enumerate() {
        let alpha = complex_gaussian(rng, power);
        let nu = match &profile.doppler {
            DopplerMode::RandomCosine => {
                let phi: f64 = rng.random::<f64>() * 2.0 * PI;
                nu_max * phi.cos()
            }
            DopplerMode::Fixed { nu_hz } => nu_hz[p],
        };
        paths.push(PathParams::from_physical(
            alpha,
            profile.tau_s[p],
            nu,
            profile.doa_deg[p].to_radians(),
            cfg,
        ));
    }
    Ok(ChannelRealization { paths })
}

/// One draw from `CN(0, variance)`.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, variance: f64) -> Complex64 {
    let scale = (variance / 2.0).sqrt();
    let re: f64 = StandardNormal.sample(rng);
    let im: f64 = StandardNormal.sample(rng);
    Complex64::new(re * scale, im * scale)
}

/// Passes `s` through the channel and the array, adding `CN(0, σ²)` noise.
pub fn observe<R: Rng + ?Sized>(
    s: &TimeVector,
    channel: &ChannelRealization,
    antennas: usize,
    sigma2: f64,
    cfg: &FrameConfig,
    rng: &mut R,
) -> Result<SpatialObservation> {
    s.check_len(cfg)?;
    let rows = cfg.cells();
    let mut data = vec![Complex64::new(0.0, 0.0); rows * antennas];
    for path in &channel.paths {
        let h = apply_path_operator(s, path.l, path.k, cfg)?;
        let a = steering_vector(path.theta, antennas);
        for (row, hs) in data.chunks_mut(antennas).zip(h.as_slice()) {
            let scaled = path.alpha * hs;
            for (x, ai) in row.iter_mut().zip(&a) {
                *x += scaled * ai;
            }
        }
    }
    if sigma2 > 0.0 {
        for x in data.iter_mut() {
            *x += complex_gaussian(rng, sigma2);
        }
    }
    SpatialObservation::from_rows(rows, antennas, data, sigma2)
}
