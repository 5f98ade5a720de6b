//! Superimposed pilot layouts, transmit frame assembly and PAPR.

use std::collections::HashSet;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::channel::EnergyAllocation;
use crate::dd::{DdFrame, FrameConfig, TimeVector};
use crate::error::{Error, Result};
use crate::fft::{self, Direction};
use crate::qam::Qam;

/// Where the unit-amplitude pilots sit on the delay-Doppler grid.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PilotScheme {
    /// Full Doppler row `n_p` plus full delay column `m_p`.
    Cross { m_p: usize, n_p: usize },
    /// Isolated pilots at explicit positions.
    Multi { positions: Vec<(usize, usize)> },
}

impl PilotScheme {
    /// Cross pilots through the grid centre `(⌊M/2⌋, ⌊N/2⌋)`.
    pub fn centered_cross(cfg: &FrameConfig) -> Self {
        PilotScheme::Cross {
            m_p: cfg.m / 2,
            n_p: cfg.n / 2,
        }
    }

    /// `delay_count x doppler_count` pilots on a uniform lattice.
    pub fn uniform_multi(delay_count: usize, doppler_count: usize, cfg: &FrameConfig) -> Result<Self> {
        Ok(PilotScheme::Multi {
            positions: uniform_grid(delay_count, doppler_count, cfg.m, cfg.n)?,
        })
    }

    pub fn pilot_count(&self, cfg: &FrameConfig) -> usize {
        match self {
            PilotScheme::Cross { .. } => cfg.m + cfg.n - 1,
            PilotScheme::Multi { positions } => positions.len(),
        }
    }

    pub fn pilot_matrix(&self, cfg: &FrameConfig) -> Result<DdFrame> {
        match self {
            PilotScheme::Cross { m_p, n_p } => cross_pilot_matrix(*m_p, *n_p, cfg.m, cfg.n),
            PilotScheme::Multi { positions } => multi_pilot_matrix(positions, cfg.m, cfg.n),
        }
    }
}

/// Cross layout: entry `(m, n)` is one iff `m = m_p` or `n = n_p`.
pub fn cross_pilot_matrix(m_p: usize, n_p: usize, rows: usize, cols: usize) -> Result<DdFrame> {
    if m_p >= rows || n_p >= cols {
        return Err(Error::IndexOutOfRange {
            m: m_p,
            n: n_p,
            rows,
            cols,
        });
    }
    Ok(DdFrame::from_fn(rows, cols, |m, n| {
        if m == m_p || n == n_p {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    }))
}

pub fn multi_pilot_matrix(positions: &[(usize, usize)], rows: usize, cols: usize) -> Result<DdFrame> {
    let mut seen = HashSet::new();
    let mut frame = DdFrame::zeros(rows, cols);
    for &(m, n) in positions {
        if m >= rows || n >= cols {
            return Err(Error::IndexOutOfRange { m, n, rows, cols });
        }
        if !seen.insert((m, n)) {
            return Err(Error::DuplicatePosition(m, n));
        }
        frame.set(m, n, Complex64::new(1.0, 0.0));
    }
    Ok(frame)
}

/// Lattice positions with strides `(M/delay_count, N/doppler_count)` starting at the origin.
pub fn uniform_grid(delay_count: usize, doppler_count: usize, rows: usize, cols: usize) -> Result<Vec<(usize, usize)>> {
    if delay_count == 0
        || doppler_count == 0
        || !rows.is_multiple_of(delay_count)
        || !cols.is_multiple_of(doppler_count)
    {
        return Err(Error::InvalidFrame(format!(
            "a {delay_count}x{doppler_count} pilot lattice does not tile a {rows}x{cols} grid"
        )));
    }
    let (sm, sn) = (rows / delay_count, cols / doppler_count);
    let mut out = Vec::with_capacity(delay_count * doppler_count);
    for j in 0..doppler_count {
        for i in 0..delay_count {
            out.push((i * sm, j * sn));
        }
    }
    Ok(out)
}

/// A superimposed transmit frame `X = √Es Xd + √Ep Xp`.
#[derive(Clone, Debug, PartialEq)]
pub struct TxFrame {
    pub x: DdFrame,
    pub data: DdFrame,
    pub pilots: DdFrame,
    pub bits: Vec<u8>,
    pub alloc: EnergyAllocation,
    pub scheme: PilotScheme,
}

/// QAM data on every cell with the pilot pattern added on top.
pub fn build_tx_frame(
    bits: &[u8],
    scheme: &PilotScheme,
    alloc: &EnergyAllocation,
    qam_order: usize,
    cfg: &FrameConfig,
) -> Result<TxFrame> {
    let qam = Qam::new(qam_order)?;
    let expected = cfg.cells() * qam.bits_per_symbol();
    if bits.len() != expected {
        return Err(Error::BitLengthMismatch {
            expected,
            got: bits.len(),
        });
    }
    let data = DdFrame::from_vec(cfg.m, cfg.n, qam.map(bits)?)?;
    let pilots = scheme.pilot_matrix(cfg)?;
    let x = data.combine(alloc.es.sqrt(), &pilots, alloc.ep.sqrt())?;
    Ok(TxFrame {
        x,
        data,
        pilots,
        bits: bits.to_vec(),
        alloc: *alloc,
        scheme: scheme.clone(),
    })
}

/// Peak-to-average power ratio in dB, `10 log10(max|s|² / mean|s|²)`.
pub fn papr_db(s: &[Complex64]) -> Result<f64> {
    let (peak, total) = s.iter().fold((0.0f64, 0.0f64), |(p, t), x| {
        let e = x.norm_sqr();
        (p.max(e), t + e)
    });
    if total == 0.0 {
        return Err(Error::Degenerate("PAPR of an all-zero signal"));
    }
    Ok(10.0 * (peak * s.len() as f64 / total).log10())
}

/// PAPR after band-limited interpolation of each `M`-sample block by `factor`.
///
/// Each block is taken to the frequency domain, zero-padded around Nyquist and
/// brought back at `factor` times the rate. `factor = 1` is [`papr_db`].
pub fn papr_db_oversampled(s: &TimeVector, cfg: &FrameConfig, factor: usize) -> Result<f64> {
    s.check_len(cfg)?;
    if factor <= 1 {
        return papr_db(s.as_slice());
    }
    let m = cfg.m;
    let big = m * factor;
    let half = m / 2;
    let mut out = Vec::with_capacity(big * cfg.n);
    for block in s.as_slice().chunks(m) {
        let spec = fft::forward(block);
        let mut padded = vec![Complex64::new(0.0, 0.0); big];
        padded[..half].copy_from_slice(&spec[..half]);
        padded[big - (m - half)..].copy_from_slice(&spec[half..]);
        fft::unitary_in_place(&mut padded, big, Direction::Inverse);
        out.extend(padded);
    }
    papr_db(&out)
}
