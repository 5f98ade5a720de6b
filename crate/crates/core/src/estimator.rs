//! Per-path fractional delay-Doppler estimation with superimposed cross pilots.
//!
//! For each known DoA the array output is beamformed, taken to the
//! delay-Doppler domain and collapsed into two 1-D profiles: the delay profile
//! `u` (mean over Doppler bins) and the Doppler profile `v` (mean over delay
//! bins). Averaging suppresses the superimposed data by a factor `N` (resp.
//! `M`), while the cross pilot adds up coherently. Doppler is found first by
//! matched filtering `v` against [`template_gv`], then delay by matched
//! filtering `u` against [`template_gu`] at the estimated Doppler, and finally
//! the gain by least squares against the reconstructed pilot waveform.
//!
//! [`baseline_estimate`] is an integer-grid comparator for the multi-pilot
//! layout: correlate the delay-Doppler frame with shifted copies of the pilot
//! lattice, take the strongest integer shift, then the same LS gain.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::{steering_vector, EnergyAllocation, SpatialObservation};
use crate::dd::{apply_path_operator, dzt, ici_phase_ramp, idzt, DdFrame, FrameConfig, TimeVector};
use crate::dd::{delay_phase_ramp, doppler_phase_ramp};
use crate::error::{shape_err, Error, Result};
use crate::fft;
use crate::pilots::PilotScheme;

/// Half-width of the fine search window around the coarse integer peak, in bins.
pub const FINE_HALFWIDTH: f64 = 0.5;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum Refine {
    #[default]
    None,
    /// Three-point parabolic fit of the correlation magnitude around the grid peak.
    Parabolic,
}

/// Normalization of the LS gain estimate.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum GainDivisor {
    /// `N_p √E_p`, unbiased for unit-amplitude pilots.
    #[default]
    Unbiased,
    /// `N_p E_p`, kept for comparison; off by `1/√E_p`.
    Literal,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SearchConfig {
    /// Fine grid step in bins.
    #[serde(default = "default_step")]
    pub fine_step: f64,
    #[serde(default)]
    pub refine: Refine,
    #[serde(default)]
    pub gain_divisor: GainDivisor,
}

fn default_step() -> f64 {
    0.01
}

impl Default for SearchConfig {
    fn default() -> Self {
        Self {
            fine_step: default_step(),
            refine: Refine::None,
            gain_divisor: GainDivisor::Unbiased,
        }
    }
}

impl SearchConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.fine_step > 0.0 && self.fine_step <= FINE_HALFWIDTH) {
            return Err(Error::InvalidSearch(format!(
                "fine_step must lie in (0, 0.5], got {}",
                self.fine_step
            )));
        }
        Ok(())
    }

    fn half_steps(&self) -> i64 {
        (FINE_HALFWIDTH / self.fine_step + 1e-9).floor() as i64
    }
}

/// Integrated delay profile `u` (length `M`) and Doppler profile `v` (length `N`).
#[derive(Clone, Debug, PartialEq)]
pub struct ProfilePair {
    pub u: Vec<Complex64>,
    pub v: Vec<Complex64>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct PathEstimate {
    pub alpha_hat: Complex64,
    /// Delay in bins, in `[0, M)`.
    pub l_hat: f64,
    /// Doppler in bins, in `(-N/2, N/2]`.
    pub k_hat: f64,
    /// DoA used for beamforming (an input, not estimated).
    pub theta: f64,
    pub peak_metric_u: f64,
    pub peak_metric_v: f64,
}

#[derive(Clone, Debug, PartialEq, Default)]
pub struct EstimateSet {
    pub paths: Vec<PathEstimate>,
}

/// Angular matched filter `r = R a*(θ) / N_r`.
pub fn beamform(obs: &SpatialObservation, theta: f64) -> TimeVector {
    let nr = obs.antennas();
    let weights: Vec<Complex64> = steering_vector(theta, nr)
        .into_iter()
        .map(|a| a.conj() / nr as f64)
        .collect();
    TimeVector::new(
        (0..obs.samples())
            .map(|i| obs.row(i).iter().zip(&weights).map(|(r, w)| r * w).sum())
            .collect(),
    )
}

/// Beamforms once per DoA; the outputs feed both estimation and detection.
pub fn beamform_paths(obs: &SpatialObservation, doas: &[f64]) -> Vec<TimeVector> {
    doas.iter().map(|&theta| beamform(obs, theta)).collect()
}

/// Row means (`u = Y 1_N / N`) and column means (`v = Y^T 1_M / M`).
pub fn profiles(yp: &DdFrame) -> ProfilePair {
    let (m, n) = (yp.rows(), yp.cols());
    let mut u = vec![Complex64::new(0.0, 0.0); m];
    let mut v = vec![Complex64::new(0.0, 0.0); n];
    for (col, column) in yp.as_vec().chunks(m).enumerate() {
        for (row, x) in column.iter().enumerate() {
            u[row] += x;
            v[col] += x;
        }
    }
    for x in u.iter_mut() {
        *x /= n as f64;
    }
    for x in v.iter_mut() {
        *x /= m as f64;
    }
    ProfilePair { u, v }
}

/// Delay template `(N-1) D̃_M^k F_M^H([F_M]_{:,m_p} ⊙ d_M^{-l}) + d̃_M^k`.
///
/// Exact pilot response in the delay profile, scaled by `N/(α√E_p)`.
pub fn template_gu(l: f64, k: f64, m_p: usize, cfg: &FrameConfig) -> Vec<Complex64> {
    let m = cfg.m;
    let scale = 1.0 / (m as f64).sqrt();
    let column: Vec<Complex64> = delay_phase_ramp(m, l)
        .into_iter()
        .enumerate()
        .map(|(q, d)| d * Complex64::from_polar(scale, -2.0 * std::f64::consts::PI * ((q * m_p) % m) as f64 / m as f64))
        .collect();
    let shifted = fft::inverse(&column);
    let ici = ici_phase_ramp(cfg, k);
    let weight = (cfg.n - 1) as f64;
    shifted
        .iter()
        .zip(&ici)
        .map(|(s, d)| d * s * weight + d)
        .collect()
}

/// Doppler template `(M-1) F_N([F_N^H]_{:,n_p} ⊙ d_N^k) + 1_N`.
///
/// Pilot response in the Doppler profile with the intra-block phase neglected.
pub fn template_gv(k: f64, n_p: usize, cfg: &FrameConfig) -> Vec<Complex64> {
    let n = cfg.n;
    let scale = 1.0 / (n as f64).sqrt();
    let column: Vec<Complex64> = doppler_phase_ramp(n, k)
        .into_iter()
        .enumerate()
        .map(|(q, d)| d * Complex64::from_polar(scale, 2.0 * std::f64::consts::PI * ((q * n_p) % n) as f64 / n as f64))
        .collect();
    let weight = (cfg.m - 1) as f64;
    fft::forward(&column)
        .into_iter()
        .map(|x| x * weight + 1.0)
        .collect()
}

fn correlate(template: &[Complex64], profile: &[Complex64]) -> f64 {
    template
        .iter()
        .zip(profile)
        .map(|(t, p)| t.conj() * p)
        .sum::<Complex64>()
        .norm()
}

fn wrap_doppler(k: f64, n: usize) -> f64 {
    let n = n as f64;
    let w = k.rem_euclid(n);
    if w > n / 2.0 {
        w - n
    } else {
        w
    }
}

fn wrap_delay(l: f64, m: usize) -> f64 {
    let w = l.rem_euclid(m as f64);
    // rem_euclid can round up to exactly m for tiny negative inputs
    if w >= m as f64 {
        0.0
    } else {
        w
    }
}

/// Ordered candidate search: largest metric wins, ties go to the smaller key.
struct Peak {
    position: f64,
    metric: f64,
    key: f64,
}

impl Peak {
    fn offer(best: &mut Option<Peak>, position: f64, metric: f64, key: f64) {
        let better = match best {
            None => true,
            Some(b) => metric > b.metric || (metric == b.metric && key < b.key),
        };
        if better {
            *best = Some(Peak {
                position,
                metric,
                key,
            });
        }
    }
}

/// Coarse integer scan, then fine grid over `[c-0.5, c+0.5]`, then optional
/// parabolic refinement. `key` orders ties; `metric` is the correlation magnitude.
fn two_stage_search(
    coarse: impl Iterator<Item = f64>,
    search: &SearchConfig,
    metric: impl Fn(f64) -> f64,
    key: impl Fn(f64) -> f64,
) -> (f64, f64) {
    let mut best = None;
    for c in coarse {
        Peak::offer(&mut best, c, metric(c), key(c));
    }
    let center = best.expect("non-empty coarse grid").position;

    let h = search.half_steps();
    let values: Vec<(f64, f64)> = (-h..=h)
        .map(|i| {
            let x = center + i as f64 * search.fine_step;
            (x, metric(x))
        })
        .collect();
    let mut best = None;
    for &(x, m) in &values {
        Peak::offer(&mut best, x, m, key(x));
    }
    let peak = best.expect("non-empty fine grid");
    let idx = values
        .iter()
        .position(|&(x, _)| x == peak.position)
        .expect("peak comes from the grid");

    if search.refine == Refine::Parabolic && idx > 0 && idx + 1 < values.len() {
        let (ym, y0, yp) = (values[idx - 1].1, values[idx].1, values[idx + 1].1);
        let denom = ym - 2.0 * y0 + yp;
        if denom < 0.0 {
            let delta = (0.5 * (ym - yp) / denom).clamp(-0.5, 0.5);
            let x = peak.position + delta * search.fine_step;
            return (x, metric(x));
        }
    }
    (peak.position, peak.metric)
}

fn cross_indices(scheme: &PilotScheme) -> Result<(usize, usize)> {
    match scheme {
        PilotScheme::Cross { m_p, n_p } => Ok((*m_p, *n_p)),
        PilotScheme::Multi { .. } => Err(Error::SchemeMismatch(
            "fractional estimation requires the cross-pilot layout",
        )),
    }
}

fn all_zero(x: &[Complex64]) -> bool {
    x.iter().all(|v| v.norm_sqr() == 0.0)
}

/// Doppler estimate `argmax_k |g_v(k)^H v|` in bins, wrapped to `(-N/2, N/2]`.
///
/// Returns the estimate and the attained correlation magnitude.
pub fn estimate_doppler(
    v: &[Complex64],
    scheme: &PilotScheme,
    search: &SearchConfig,
    cfg: &FrameConfig,
) -> Result<(f64, f64)> {
    let (_, n_p) = cross_indices(scheme)?;
    if v.len() != cfg.n {
        return Err(shape_err(cfg.n, v.len()));
    }
    if all_zero(v) {
        return Err(Error::Degenerate("Doppler profile is identically zero"));
    }
    search.validate()?;
    let half = (cfg.n / 2) as i64;
    let coarse = (-(cfg.n as i64 - 1 - half)..=half).map(|k| k as f64);
    let (k, metric) = two_stage_search(
        coarse,
        search,
        |k| correlate(&template_gv(k, n_p, cfg), v),
        |k| wrap_doppler(k, cfg.n).abs(),
    );
    Ok((wrap_doppler(k, cfg.n), metric))
}

/// Delay estimate `argmax_l |g_u(l, k̂)^H u|` in bins, wrapped to `[0, M)`.
pub fn estimate_delay(
    u: &[Complex64],
    k_hat: f64,
    scheme: &PilotScheme,
    search: &SearchConfig,
    cfg: &FrameConfig,
) -> Result<(f64, f64)> {
    let (m_p, _) = cross_indices(scheme)?;
    if u.len() != cfg.m {
        return Err(shape_err(cfg.m, u.len()));
    }
    if all_zero(u) {
        return Err(Error::Degenerate("delay profile is identically zero"));
    }
    search.validate()?;
    let (l, metric) = two_stage_search(
        (0..cfg.m).map(|l| l as f64),
        search,
        |l| correlate(&template_gu(l, k_hat, m_p, cfg), u),
        |l| wrap_delay(l, cfg.m),
    );
    Ok((wrap_delay(l, cfg.m), metric))
}

/// Time-domain pilot waveform seen through path `(l, k)`.
pub fn pilot_response(pilots: &DdFrame, l: f64, k: f64, cfg: &FrameConfig) -> Result<TimeVector> {
    apply_path_operator(&idzt(pilots, cfg)?, l, k, cfg)
}

/// LS gain `(H(l̂,k̂) x_p)^H r_p / (N_p √E_p)`.
pub fn estimate_gain(
    r_p: &TimeVector,
    scheme: &PilotScheme,
    l_hat: f64,
    k_hat: f64,
    alloc: &EnergyAllocation,
    divisor: GainDivisor,
    cfg: &FrameConfig,
) -> Result<Complex64> {
    if alloc.ep <= 0.0 {
        return Err(Error::ZeroPilotEnergy);
    }
    r_p.check_len(cfg)?;
    let reference = pilot_response(&scheme.pilot_matrix(cfg)?, l_hat, k_hat, cfg)?;
    let n_p = scheme.pilot_count(cfg) as f64;
    let denom = match divisor {
        GainDivisor::Unbiased => n_p * alloc.ep.sqrt(),
        GainDivisor::Literal => n_p * alloc.ep,
    };
    Ok(reference.inner(r_p) / denom)
}

/// Runs the full chain for one beamformed path.
pub fn estimate_path(
    r_p: &TimeVector,
    theta: f64,
    scheme: &PilotScheme,
    alloc: &EnergyAllocation,
    search: &SearchConfig,
    cfg: &FrameConfig,
) -> Result<PathEstimate> {
    let yp = dzt(r_p, cfg)?;
    let prof = profiles(&yp);
    let (k_hat, peak_metric_v) = estimate_doppler(&prof.v, scheme, search, cfg)?;
    let (l_hat, peak_metric_u) = estimate_delay(&prof.u, k_hat, scheme, search, cfg)?;
    let alpha_hat = estimate_gain(r_p, scheme, l_hat, k_hat, alloc, search.gain_divisor, cfg)?;
    Ok(PathEstimate {
        alpha_hat,
        l_hat,
        k_hat,
        theta,
        peak_metric_u,
        peak_metric_v,
    })
}

/// Estimation from already beamformed paths, one per DoA.
pub fn estimate_from_beamformed(
    beamformed: &[TimeVector],
    doas: &[f64],
    scheme: &PilotScheme,
    alloc: &EnergyAllocation,
    search: &SearchConfig,
    cfg: &FrameConfig,
) -> Result<EstimateSet> {
    cross_indices(scheme)?;
    if beamformed.len() != doas.len() {
        return Err(shape_err(doas.len(), beamformed.len()));
    }
    let paths = beamformed
        .iter()
        .zip(doas)
        .map(|(r, &theta)| estimate_path(r, theta, scheme, alloc, search, cfg))
        .collect::<Result<Vec<_>>>()?;
    Ok(EstimateSet { paths })
}

/// Fractional delay-Doppler and gain estimation for every DoA, in input order.
pub fn estimate_channel(
    obs: &SpatialObservation,
    scheme: &PilotScheme,
    doas: &[f64],
    alloc: &EnergyAllocation,
    search: &SearchConfig,
    cfg: &FrameConfig,
) -> Result<EstimateSet> {
    if obs.samples() != cfg.cells() {
        return Err(shape_err(cfg.cells(), obs.samples()));
    }
    estimate_from_beamformed(&beamform_paths(obs, doas), doas, scheme, alloc, search, cfg)
}

/// Integer shift window searched by the multi-pilot comparator.
///
/// Delays `0..delay_span`, Dopplers in `(-doppler_span/2, doppler_span/2]`.
/// For a periodic pilot lattice this should be one lattice period, since the
/// correlation repeats with the lattice.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct BaselineWindow {
    pub delay_span: usize,
    pub doppler_span: usize,
}

impl BaselineWindow {
    /// One period of a `delay_count x doppler_count` uniform lattice.
    pub fn for_lattice(delay_count: usize, doppler_count: usize, cfg: &FrameConfig) -> Self {
        Self {
            delay_span: (cfg.m / delay_count.max(1)).max(1),
            doppler_span: (cfg.n / doppler_count.max(1)).max(1),
        }
    }
}

/// Integer-grid comparator for a single beamformed path.
pub fn baseline_path(
    r_p: &TimeVector,
    theta: f64,
    scheme: &PilotScheme,
    alloc: &EnergyAllocation,
    window: &BaselineWindow,
    cfg: &FrameConfig,
) -> Result<PathEstimate> {
    let positions = match scheme {
        PilotScheme::Multi { positions } => positions,
        PilotScheme::Cross { .. } => {
            return Err(Error::SchemeMismatch("the comparator expects the multi-pilot layout"))
        }
    };
    let yp = dzt(r_p, cfg)?;
    let (m, n) = (cfg.m as i64, cfg.n as i64);
    let half = (window.doppler_span / 2) as i64;
    let k_range = -(window.doppler_span as i64 - 1 - half)..=half;
    let mut best: Option<(f64, i64, i64)> = None;
    for l in 0..window.delay_span.min(cfg.m) as i64 {
        for k in k_range.clone() {
            let metric = positions
                .iter()
                .map(|&(pm, pn)| {
                    yp.get(
                        (pm as i64 + l).rem_euclid(m) as usize,
                        (pn as i64 + k).rem_euclid(n) as usize,
                    )
                })
                .sum::<Complex64>()
                .norm();
            let better = match best {
                None => true,
                Some((bm, bl, bk)) => metric > bm || (metric == bm && (k.abs(), l) < (bk.abs(), bl)),
            };
            if better {
                best = Some((metric, l, k));
            }
        }
    }
    let (metric, l, k) = best.ok_or(Error::Degenerate("empty comparator window"))?;
    let (l_hat, k_hat) = (l as f64, k as f64);
    let alpha_hat = estimate_gain(r_p, scheme, l_hat, k_hat, alloc, GainDivisor::Unbiased, cfg)?;
    Ok(PathEstimate {
        alpha_hat,
        l_hat,
        k_hat,
        theta,
        peak_metric_u: metric,
        peak_metric_v: metric,
    })
}

pub fn baseline_from_beamformed(
    beamformed: &[TimeVector],
    doas: &[f64],
    scheme: &PilotScheme,
    alloc: &EnergyAllocation,
    window: &BaselineWindow,
    cfg: &FrameConfig,
) -> Result<EstimateSet> {
    if beamformed.len() != doas.len() {
        return Err(shape_err(doas.len(), beamformed.len()));
    }
    let paths = beamformed
        .iter()
        .zip(doas)
        .map(|(r, &theta)| baseline_path(r, theta, scheme, alloc, window, cfg))
        .collect::<Result<Vec<_>>>()?;
    Ok(EstimateSet { paths })
}

/// Integer delay-Doppler comparator over a multi-pilot lattice.
pub fn baseline_estimate(
    obs: &SpatialObservation,
    scheme: &PilotScheme,
    doas: &[f64],
    alloc: &EnergyAllocation,
    window: &BaselineWindow,
    cfg: &FrameConfig,
) -> Result<EstimateSet> {
    if obs.samples() != cfg.cells() {
        return Err(shape_err(cfg.cells(), obs.samples()));
    }
    baseline_from_beamformed(&beamform_paths(obs, doas), doas, scheme, alloc, window, cfg)
}
