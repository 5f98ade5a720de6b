//! Delay-Doppler domain primitives.
//!
//! A frame is an `M x N` grid with the delay index `m` on rows and the Doppler
//! index `n` on columns. Frames are stored column-stacked (`vec` index
//! `m + n*M`), which is also the sample order of the time-domain vector: block
//! `n` holds samples `n*M .. (n+1)*M`.
//!
//! The Zak transforms and the per-path channel operator are applied with
//! per-axis FFTs and diagonal phase ramps. No `MN x MN` matrix is ever built.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{shape_err, Error, Result};
use crate::fft::{self, Direction};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Static OTFS grid and timing parameters.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FrameConfig {
    /// Delay bins (subcarriers).
    pub m: usize,
    /// Doppler bins (blocks).
    pub n: usize,
    /// Subcarrier spacing in Hz.
    pub delta_f: f64,
    /// Cyclic prefix length in samples.
    pub cp_samples: usize,
    /// Carrier frequency in Hz.
    pub fc: f64,
}

impl FrameConfig {
    pub fn new(m: usize, n: usize, delta_f: f64, cp_samples: usize, fc: f64) -> Result<Self> {
        let cfg = Self {
            m,
            n,
            delta_f,
            cp_samples,
            fc,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.m < 2 || self.n < 2 {
            return Err(Error::InvalidFrame(format!(
                "grid must be at least 2x2, got {}x{}",
                self.m, self.n
            )));
        }
        if !(self.delta_f.is_finite() && self.delta_f > 0.0) {
            return Err(Error::InvalidFrame(format!(
                "subcarrier spacing must be positive, got {}",
                self.delta_f
            )));
        }
        if !(self.fc.is_finite() && self.fc > 0.0) {
            return Err(Error::InvalidFrame(format!(
                "carrier frequency must be positive, got {}",
                self.fc
            )));
        }
        Ok(())
    }

    /// Number of grid cells (and time samples) per frame.
    pub fn cells(&self) -> usize {
        self.m * self.n
    }

    /// Symbol duration `T = 1/Δf`.
    pub fn symbol_period(&self) -> f64 {
        1.0 / self.delta_f
    }

    /// Bandwidth `B = M Δf`.
    pub fn bandwidth(&self) -> f64 {
        self.m as f64 * self.delta_f
    }

    pub fn cp_duration(&self) -> f64 {
        self.cp_samples as f64 / self.bandwidth()
    }

    /// Block duration including the cyclic prefix, `T' = T + T_cp`.
    pub fn block_period(&self) -> f64 {
        self.symbol_period() + self.cp_duration()
    }

    pub fn frame_duration(&self) -> f64 {
        self.n as f64 * self.block_period()
    }

    /// Delay bin width `1/B`.
    pub fn delay_resolution(&self) -> f64 {
        1.0 / self.bandwidth()
    }

    /// Doppler bin width `1/(N T')`.
    pub fn doppler_resolution(&self) -> f64 {
        1.0 / self.frame_duration()
    }

    pub fn wavelength(&self) -> f64 {
        SPEED_OF_LIGHT / self.fc
    }

    /// `T/T' = M/(M + cp)`, the fraction of a block occupied by the useful symbol.
    pub fn useful_fraction(&self) -> f64 {
        self.m as f64 / (self.m + self.cp_samples) as f64
    }

    /// Longest path delay the cyclic prefix absorbs, in seconds.
    pub fn max_delay(&self) -> f64 {
        self.cp_samples as f64 * self.delay_resolution()
    }
}

/// An `M x N` complex delay-Doppler matrix, stored column-stacked.
#[derive(Clone, Debug, PartialEq)]
pub struct DdFrame {
    rows: usize,
    cols: usize,
    data: Vec<Complex64>,
}

impl DdFrame {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![Complex64::new(0.0, 0.0); rows * cols],
        }
    }

    pub fn for_config(cfg: &FrameConfig) -> Self {
        Self::zeros(cfg.m, cfg.n)
    }

    /// Inverse vectorization: builds the matrix from its column-stacked form.
    pub fn from_vec(rows: usize, cols: usize, data: Vec<Complex64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(shape_err(rows * cols, data.len()));
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for n in 0..cols {
            for m in 0..rows {
                data.push(f(m, n));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, m: usize, n: usize) -> Complex64 {
        self.data[m + n * self.rows]
    }

    pub fn set(&mut self, m: usize, n: usize, value: Complex64) {
        self.data[m + n * self.rows] = value;
    }

    /// Column-stacked view, `vec(X)`.
    pub fn as_vec(&self) -> &[Complex64] {
        &self.data
    }

    pub fn as_vec_mut(&mut self) -> &mut [Complex64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<Complex64> {
        self.data
    }

    /// Squared Frobenius norm.
    pub fn energy(&self) -> f64 {
        self.data.iter().map(|x| x.norm_sqr()).sum()
    }

    pub fn check_shape(&self, cfg: &FrameConfig) -> Result<()> {
        if self.rows != cfg.m || self.cols != cfg.n {
            return Err(shape_err(
                format!("{}x{}", cfg.m, cfg.n),
                format!("{}x{}", self.rows, self.cols),
            ));
        }
        Ok(())
    }

    /// Entrywise `a*self + b*other`.
    pub fn combine(&self, a: f64, other: &DdFrame, b: f64) -> Result<DdFrame> {
        if self.rows != other.rows || self.cols != other.cols {
            return Err(shape_err(
                format!("{}x{}", self.rows, self.cols),
                format!("{}x{}", other.rows, other.cols),
            ));
        }
        let data = self
            .data
            .iter()
            .zip(&other.data)
            .map(|(x, y)| x * a + y * b)
            .collect();
        Ok(DdFrame {
            rows: self.rows,
            cols: self.cols,
            data,
        })
    }
}

/// Time-domain samples of one frame, `M*N` long; block `n` is `samples[nM..(n+1)M]`.
#[derive(Clone, Debug, PartialEq)]
pub struct TimeVector {
    samples: Vec<Complex64>,
}

impl TimeVector {
    pub fn new(samples: Vec<Complex64>) -> Self {
        Self { samples }
    }

    pub fn zeros(len: usize) -> Self {
        Self::new(vec![Complex64::new(0.0, 0.0); len])
    }

    pub fn for_config(samples: Vec<Complex64>, cfg: &FrameConfig) -> Result<Self> {
        let v = Self::new(samples);
        v.check_len(cfg)?;
        Ok(v)
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn as_mut_slice(&mut self) -> &mut [Complex64] {
        &mut self.samples
    }

    pub fn into_inner(self) -> Vec<Complex64> {
        self.samples
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|x| x.norm_sqr()).sum()
    }

    pub fn check_len(&self, cfg: &FrameConfig) -> Result<()> {
        if self.samples.len() != cfg.cells() {
            return Err(shape_err(cfg.cells(), self.samples.len()));
        }
        Ok(())
    }

    /// `self^H other`.
    pub fn inner(&self, other: &TimeVector) -> Complex64 {
        self.samples
            .iter()
            .zip(&other.samples)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }
}

/// Inverse DZT, `s = (F_N^H ⊗ I_M) vec(X)`: a unitary inverse DFT along each delay row.
pub fn idzt(frame: &DdFrame, cfg: &FrameConfig) -> Result<TimeVector> {
    frame.check_shape(cfg)?;
    Ok(TimeVector::new(transform_rows(
        frame.as_vec(),
        cfg.m,
        cfg.n,
        Direction::Inverse,
    )))
}

/// DZT, `vec^{-1}((F_N ⊗ I_M) r)`; the exact inverse of [`idzt`].
pub fn dzt(samples: &TimeVector, cfg: &FrameConfig) -> Result<DdFrame> {
    samples.check_len(cfg)?;
    let data = transform_rows(samples.as_slice(), cfg.m, cfg.n, Direction::Forward);
    DdFrame::from_vec(cfg.m, cfg.n, data)
}

// Row m of the column-stacked matrix lives at stride M; gather each row into a
// contiguous chunk, transform all chunks in one pass, then scatter back.
fn transform_rows(input: &[Complex64], m: usize, n: usize, dir: Direction) -> Vec<Complex64> {
    let mut rows = vec![Complex64::new(0.0, 0.0); m * n];
    for (idx, x) in input.iter().enumerate() {
        let (mi, ni) = (idx % m, idx / m);
        rows[mi * n + ni] = *x;
    }
    fft::unitary_in_place(&mut rows, n, dir);
    let mut out = vec![Complex64::new(0.0, 0.0); m * n];
    for (idx, x) in rows.into_iter().enumerate() {
        let (mi, ni) = (idx / n, idx % n);
        out[mi + ni * m] = x;
    }
    out
}

/// Diagonal of `(D_M^*)^l`: entry `m` is `e^{-j2π m l/M}`.
pub fn delay_phase_ramp(len: usize, l: f64) -> Vec<Complex64> {
    (0..len)
        .map(|i| Complex64::from_polar(1.0, -2.0 * PI * i as f64 * l / len as f64))
        .collect()
}

/// Diagonal of `D_N^k`: entry `n` is `e^{j2π n k/N}`.
pub fn doppler_phase_ramp(len: usize, k: f64) -> Vec<Complex64> {
    (0..len)
        .map(|i| Complex64::from_polar(1.0, 2.0 * PI * i as f64 * k / len as f64))
        .collect()
}

/// Diagonal of the intra-block Doppler matrix raised to `k`:
/// entry `m` is `e^{j2π k m T/(M N T')}`.
pub fn ici_phase_ramp(cfg: &FrameConfig, k: f64) -> Vec<Complex64> {
    let rate = 2.0 * PI * k * cfg.useful_fraction() / (cfg.m * cfg.n) as f64;
    (0..cfg.m)
        .map(|i| Complex64::from_polar(1.0, rate * i as f64))
        .collect()
}

/// Circulant fractional delay `C_M(l) x = F_M^H diag(e^{-j2π m l/M}) F_M x`.
///
/// Integer `l` is an exact cyclic shift down by `l`.
pub fn apply_delay(block: &[Complex64], l: f64) -> Vec<Complex64> {
    let mut buf = block.to_vec();
    delay_in_place(&mut buf, block.len(), l);
    buf
}

fn delay_in_place(buf: &mut [Complex64], block_len: usize, l: f64) {
    if l == 0.0 {
        return;
    }
    let ramp = delay_phase_ramp(block_len, l);
    fft::unitary_in_place(buf, block_len, Direction::Forward);
    for chunk in buf.chunks_mut(block_len) {
        for (x, r) in chunk.iter_mut().zip(&ramp) {
            *x *= r;
        }
    }
    fft::unitary_in_place(buf, block_len, Direction::Inverse);
}

/// Doppler operator `Δ(k) = D_N^k ⊗ D̃_M^k` applied elementwise.
pub fn apply_doppler(samples: &TimeVector, k: f64, cfg: &FrameConfig) -> Result<TimeVector> {
    samples.check_len(cfg)?;
    let mut out = samples.clone();
    doppler_in_place(out.as_mut_slice(), k, cfg);
    Ok(out)
}

fn doppler_in_place(buf: &mut [Complex64], k: f64, cfg: &FrameConfig) {
    if k == 0.0 {
        return;
    }
    let inter = doppler_phase_ramp(cfg.n, k);
    let intra = ici_phase_ramp(cfg, k);
    for (block, b) in buf.chunks_mut(cfg.m).zip(&inter) {
        for (x, a) in block.iter_mut().zip(&intra) {
            *x *= a * b;
        }
    }
}

/// One path of the channel, `Δ(k) (I_N ⊗ C_M(l)) s`.
pub fn apply_path_operator(
    samples: &TimeVector,
    l: f64,
    k: f64,
    cfg: &FrameConfig,
) -> Result<TimeVector> {
    samples.check_len(cfg)?;
    let mut buf = samples.as_slice().to_vec();
    delay_in_place(&mut buf, cfg.m, l);
    doppler_in_place(&mut buf, k, cfg);
    Ok(TimeVector::new(buf))
}

/// Adjoint of [`apply_path_operator`], `(I_N ⊗ C_M(-l)) Δ(-k) r`.
pub fn apply_path_adjoint(
    samples: &TimeVector,
    l: f64,
    k: f64,
    cfg: &FrameConfig,
) -> Result<TimeVector> {
    samples.check_len(cfg)?;
    let mut buf = samples.as_slice().to_vec();
    doppler_in_place(&mut buf, -k, cfg);
    delay_in_place(&mut buf, cfg.m, -l);
    Ok(TimeVector::new(buf))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::oracle::Dense;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn cfg(m: usize, n: usize) -> FrameConfig {
        FrameConfig::new(m, n, 30e3, m / 4, 5.9e9).unwrap()
    }

    fn random_vec(len: usize, seed: u64) -> Vec<Complex64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        (0..len)
            .map(|_| Complex64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5))
            .collect()
    }

    fn max_err(a: &[Complex64], b: &[Complex64]) -> f64 {
        a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
    }

    #[test]
    fn derived_timing() {
        let c = FrameConfig::new(64, 16, 30e3, 16, 5.9e9).unwrap();
        assert!((c.bandwidth() - 1.92e6).abs() < 1e-6);
        assert!((c.block_period() - 41.666_666_666e-6).abs() < 1e-12);
        assert_eq!(c.doppler_resolution(), 1.0 / (16.0 * c.block_period()));
        assert!(c.block_period() >= c.symbol_period());
        assert!((c.max_delay() - 8.333_333e-6).abs() < 1e-11);
    }

    #[test]
    fn rejects_bad_config() {
        assert!(FrameConfig::new(1, 16, 30e3, 0, 1e9).is_err());
        assert!(FrameConfig::new(64, 16, 0.0, 0, 1e9).is_err());
        assert!(FrameConfig::new(64, 16, 30e3, 0, -1.0).is_err());
    }

    #[test]
    fn idzt_of_origin_impulse() {
        let c = cfg(8, 4);
        let mut x = DdFrame::for_config(&c);
        x.set(0, 0, Complex64::new(1.0, 0.0));
        let s = idzt(&x, &c).unwrap();
        for (i, v) in s.as_slice().iter().enumerate() {
            let expect = if i % c.m == 0 { 0.5 } else { 0.0 };
            assert!((v - Complex64::new(expect, 0.0)).norm() < 1e-15);
        }
    }

    #[test]
    fn idzt_of_all_ones() {
        let c = cfg(8, 4);
        let x = DdFrame::from_fn(8, 4, |_, _| Complex64::new(1.0, 0.0));
        let s = idzt(&x, &c).unwrap();
        for (i, v) in s.as_slice().iter().enumerate() {
            let expect = if i < c.m { 2.0 } else { 0.0 };
            assert!((v - Complex64::new(expect, 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn dzt_of_first_stripe() {
        let c = cfg(8, 4);
        let mut s = vec![Complex64::new(0.0, 0.0); 32];
        for n in 0..4 {
            s[n * 8] = Complex64::new(0.5, 0.0);
        }
        let y = dzt(&TimeVector::new(s), &c).unwrap();
        for m in 0..8 {
            for n in 0..4 {
                let expect = if (m, n) == (0, 0) { 1.0 } else { 0.0 };
                assert!((y.get(m, n) - Complex64::new(expect, 0.0)).norm() < 1e-15);
            }
        }
    }

    #[test]
    fn zak_transforms_match_dense_kronecker() {
        let c = cfg(64, 16);
        let x = random_vec(c.cells(), 1);
        let oracle = Dense::dft(16).adjoint().kron(&Dense::identity(64));
        let frame = DdFrame::from_vec(64, 16, x.clone()).unwrap();
        let s = idzt(&frame, &c).unwrap();
        assert!(max_err(s.as_slice(), &oracle.apply(&x)) < 1e-12);

        let fwd = Dense::dft(16).kron(&Dense::identity(64));
        let y = dzt(&TimeVector::new(x.clone()), &c).unwrap();
        assert!(max_err(y.as_vec(), &fwd.apply(&x)) < 1e-12);
    }

    #[test]
    fn shape_errors() {
        let c = cfg(8, 4);
        assert!(idzt(&DdFrame::zeros(4, 8), &c).is_err());
        assert!(dzt(&TimeVector::zeros(31), &c).is_err());
        assert!(apply_doppler(&TimeVector::zeros(3), 0.5, &c).is_err());
    }

    #[test]
    fn integer_delay_is_cyclic_shift() {
        let mut e0 = vec![Complex64::new(0.0, 0.0); 64];
        e0[0] = Complex64::new(1.0, 0.0);
        let out = apply_delay(&e0, 3.0);
        for (i, v) in out.iter().enumerate() {
            let expect = if i == 3 { 1.0 } else { 0.0 };
            assert!((v - Complex64::new(expect, 0.0)).norm() < 1e-14);
        }
        assert_eq!(apply_delay(&e0, 0.0), e0);
    }

    #[test]
    fn fractional_delay_spreads_around_nearest_bin() {
        let mut e0 = vec![Complex64::new(0.0, 0.0); 64];
        e0[0] = Complex64::new(1.0, 0.0);
        let out = apply_delay(&e0, 1.728);
        let peak = (0..64)
            .max_by(|&a, &b| out[a].norm().total_cmp(&out[b].norm()))
            .unwrap();
        assert_eq!(peak, 2);
        let energy: f64 = out.iter().map(|x| x.norm_sqr()).sum();
        assert!((energy - 1.0).abs() < 1e-12);
        // Dirichlet kernel |sin(π(i-l))/(M sin(π(i-l)/M))| evaluated directly
        for (i, v) in out.iter().enumerate() {
            let d = i as f64 - 1.728;
            let dirichlet = ((PI * d).sin() / (64.0 * (PI * d / 64.0).sin())).abs();
            assert!((v.norm() - dirichlet).abs() < 1e-12);
        }
    }

    #[test]
    fn doppler_integer_phases() {
        let c = cfg(8, 4);
        let mut s = vec![Complex64::new(0.0, 0.0); 32];
        for n in 0..4 {
            s[n * 8] = Complex64::new(2.0, 0.0);
        }
        let out = apply_doppler(&TimeVector::new(s), 1.0, &c).unwrap();
        for n in 0..4 {
            let expect = Complex64::from_polar(2.0, 2.0 * PI * n as f64 / 4.0);
            assert!((out.as_slice()[n * 8] - expect).norm() < 1e-14);
        }
    }

    #[test]
    fn doppler_matches_dense_oracle() {
        let c = cfg(8, 4);
        let x = random_vec(32, 3);
        let out = apply_doppler(&TimeVector::new(x.clone()), -0.37, &c).unwrap();
        let dense = Dense::doppler_operator(&c, -0.37);
        assert!(max_err(out.as_slice(), &dense.apply(&x)) < 1e-12);
        assert_eq!(apply_doppler(&TimeVector::new(x.clone()), 0.0, &c).unwrap().as_slice(), &x[..]);
    }

    #[test]
    fn path_operator_matches_dense_oracle() {
        let c = cfg(8, 4);
        let x = random_vec(32, 4);
        let (l, k) = (2.31, 0.77);
        let out = apply_path_operator(&TimeVector::new(x.clone()), l, k, &c).unwrap();
        let dense = Dense::path_operator(&c, l, k);
        assert!(max_err(out.as_slice(), &dense.apply(&x)) < 1e-12);

        let adj = apply_path_adjoint(&TimeVector::new(x.clone()), l, k, &c).unwrap();
        assert!(max_err(adj.as_slice(), &dense.adjoint().apply(&x)) < 1e-12);
    }

    #[test]
    fn path_operator_identity_at_origin() {
        let c = cfg(8, 4);
        let x = TimeVector::new(random_vec(32, 5));
        assert_eq!(apply_path_operator(&x, 0.0, 0.0, &c).unwrap(), x);
    }

    #[test]
    fn channel_sum_is_linear() {
        let c = cfg(16, 8);
        let a = TimeVector::new(random_vec(128, 6));
        let b = TimeVector::new(random_vec(128, 7));
        let sum = TimeVector::new(a.as_slice().iter().zip(b.as_slice()).map(|(x, y)| x + y).collect());
        let lhs = apply_path_operator(&sum, 3.4, -1.2, &c).unwrap();
        let ra = apply_path_operator(&a, 3.4, -1.2, &c).unwrap();
        let rb = apply_path_operator(&b, 3.4, -1.2, &c).unwrap();
        let rhs: Vec<_> = ra.as_slice().iter().zip(rb.as_slice()).map(|(x, y)| x + y).collect();
        assert!(max_err(lhs.as_slice(), &rhs) < 1e-12);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        #[test]
        fn zak_round_trip(seed in any::<u64>(), mexp in 1usize..7, nexp in 1usize..5) {
            let c = cfg(1 << mexp, 1 << nexp);
            let x = random_vec(c.cells(), seed);
            let frame = DdFrame::from_vec(c.m, c.n, x.clone()).unwrap();
            let s = idzt(&frame, &c).unwrap();
            let norm: f64 = x.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
            prop_assert!((s.energy().sqrt() - norm).abs() <= 1e-10 * norm);
            let back = dzt(&s, &c).unwrap();
            let err: f64 = back.as_vec().iter().zip(&x).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
            prop_assert!(err <= 1e-10 * norm);
        }

        #[test]
        fn delay_composes(seed in any::<u64>(), l1 in -8.0f64..8.0, l2 in -8.0f64..8.0) {
            let x = random_vec(32, seed);
            let lhs = apply_delay(&apply_delay(&x, l1), l2);
            let rhs = apply_delay(&x, l1 + l2);
            prop_assert!(max_err(&lhs, &rhs) < 1e-10);
        }

        #[test]
        fn path_operator_preserves_norm(seed in any::<u64>(), l in 0.0f64..16.0, k in -4.0f64..4.0) {
            let c = cfg(16, 8);
            let x = TimeVector::new(random_vec(c.cells(), seed));
            let y = apply_path_operator(&x, l, k, &c).unwrap();
            prop_assert!((y.energy().sqrt() - x.energy().sqrt()).abs() < 1e-10 * x.energy().sqrt());
        }
    }
}
