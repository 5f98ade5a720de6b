//! Dense reference matrices for small instances.
//!
//! Everything here is built entry by entry from the defining formulas and
//! multiplied out explicitly, so it shares no code path with the FFT-based
//! operators. Used by the self-test and by unit tests; cost is `O((MN)^2)`.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::dd::FrameConfig;

/// Row-major dense complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct Dense {
    pub rows: usize,
    pub cols: usize,
    pub data: Vec<Complex64>,
}

impl Dense {
    pub fn from_fn(rows: usize, cols: usize, f: impl Fn(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn identity(n: usize) -> Self {
        Self::from_fn(n, n, |r, c| {
            if r == c {
                Complex64::new(1.0, 0.0)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }

    pub fn diag(entries: &[Complex64]) -> Self {
        Self::from_fn(entries.len(), entries.len(), |r, c| {
            if r == c {
                entries[r]
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
    }

    /// Unitary DFT matrix `[F]_{p,q} = e^{-j2πpq/n}/√n`.
    pub fn dft(n: usize) -> Self {
        Self::dft_with_sign(n, -1.0)
    }

    /// DFT matrix with an explicit exponent sign; `+1.0` yields `F^H`.
    pub fn dft_with_sign(n: usize, sign: f64) -> Self {
        let scale = 1.0 / (n as f64).sqrt();
        Self::from_fn(n, n, |p, q| {
            Complex64::from_polar(scale, sign * 2.0 * PI * ((p * q) % n) as f64 / n as f64)
        })
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.data[r * self.cols + c]
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.cols, self.rows, |r, c| self.get(c, r).conj())
    }

    pub fn matmul(&self, other: &Dense) -> Self {
        assert_eq!(self.cols, other.rows);
        Self::from_fn(self.rows, other.cols, |r, c| {
            (0..self.cols).map(|i| self.get(r, i) * other.get(i, c)).sum()
        })
    }

    pub fn kron(&self, other: &Dense) -> Self {
        Self::from_fn(self.rows * other.rows, self.cols * other.cols, |r, c| {
            self.get(r / other.rows, c / other.cols) * other.get(r % other.rows, c % other.cols)
        })
    }

    pub fn apply(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(self.cols, x.len());
        (0..self.rows)
            .map(|r| (0..self.cols).map(|c| self.get(r, c) * x[c]).sum())
            .collect()
    }

    pub fn column(&self, c: usize) -> Vec<Complex64> {
        (0..self.rows).map(|r| self.get(r, c)).collect()
    }

    /// `C_M(l) = F_M^H (D_M^*)^l F_M`.
    pub fn circulant_delay(m: usize, l: f64) -> Self {
        let phases: Vec<_> = (0..m)
            .map(|i| Complex64::from_polar(1.0, -2.0 * PI * i as f64 * l / m as f64))
            .collect();
        Self::dft(m)
            .adjoint()
            .matmul(&Self::diag(&phases))
            .matmul(&Self::dft(m))
    }

    /// `D_N^k`.
    pub fn inter_block_doppler(n: usize, k: f64) -> Self {
        let phases: Vec<_> = (0..n)
            .map(|i| Complex64::from_polar(1.0, 2.0 * PI * i as f64 / n as f64 * k))
            .collect();
        Self::diag(&phases)
    }

    /// `D̃_M^k`, built from the absolute durations `T` and `T'`.
    pub fn intra_block_doppler(cfg: &FrameConfig, k: f64) -> Self {
        let ratio = cfg.symbol_period() / cfg.block_period();
        let mn = (cfg.m * cfg.n) as f64;
        let phases: Vec<_> = (0..cfg.m)
            .map(|i| Complex64::from_polar(1.0, 2.0 * PI / mn * i as f64 * ratio * k))
            .collect();
        Self::diag(&phases)
    }

    /// `Δ(k) = D_N^k ⊗ D̃_M^k`.
    pub fn doppler_operator(cfg: &FrameConfig, k: f64) -> Self {
        Self::inter_block_doppler(cfg.n, k).kron(&Self::intra_block_doppler(cfg, k))
    }

    /// `Δ(k) (I_N ⊗ C_M(l))`.
    pub fn path_operator(cfg: &FrameConfig, l: f64, k: f64) -> Self {
        Self::doppler_operator(cfg, k)
            .matmul(&Self::identity(cfg.n).kron(&Self::circulant_delay(cfg.m, l)))
    }
}
