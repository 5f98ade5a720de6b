//! Path-wise matched filtering, maximal-ratio combining and hard-decision QAM detection.

use num_complex::Complex64;

use crate::channel::EnergyAllocation;
use crate::dd::{apply_path_adjoint, dzt, DdFrame, FrameConfig, TimeVector};
use crate::error::{shape_err, Error, Result};
use crate::estimator::EstimateSet;
use crate::qam::{bit_errors, Qam};

#[derive(Clone, Debug, PartialEq)]
pub struct DetectionResult {
    pub bits_hat: Vec<u8>,
    /// Combined data-symbol estimates before slicing.
    pub symbol_estimates: DdFrame,
    pub bit_errors: usize,
    pub ber: f64,
}

/// Combines the beamformed paths and slices the data symbols.
///
/// Each path is matched-filtered with the adjoint of its estimated operator,
/// `ŷ_p = dzt(α̂_p^* H_p^H r_p)`, the branches are summed and normalized by
/// `Σ|α̂_p|²`, the known pilot `√E_p X_p` is removed and the result is scaled
/// by `1/√E_s` before nearest-point slicing.
pub fn mf_mrc_detect(
    beamformed: &[TimeVector],
    estimates: &EstimateSet,
    pilots: &DdFrame,
    alloc: &EnergyAllocation,
    qam_order: usize,
    reference_bits: &[u8],
    cfg: &FrameConfig,
) -> Result<DetectionResult> {
    if beamformed.len() != estimates.paths.len() {
        return Err(shape_err(estimates.paths.len(), beamformed.len()));
    }
    pilots.check_shape(cfg)?;
    let qam = Qam::new(qam_order)?;
    let gain: f64 = estimates.paths.iter().map(|p| p.alpha_hat.norm_sqr()).sum();
    if !(gain > 0.0) {
        return Err(Error::ZeroChannelEstimate);
    }
    if alloc.es <= 0.0 {
        return Err(Error::ZeroDataEnergy);
    }

    let mut combined = vec![Complex64::new(0.0, 0.0); cfg.cells()];
    for (r, est) in beamformed.iter().zip(&estimates.paths) {
        let matched = apply_path_adjoint(r, est.l_hat, est.k_hat, cfg)?;
        let weight = est.alpha_hat.conj();
        for (acc, x) in combined.iter_mut().zip(matched.as_slice()) {
            *acc += weight * x;
        }
    }
    let mut symbols = dzt(&TimeVector::new(combined), cfg)?;
    let (sqrt_ep, inv_es) = (alloc.ep.sqrt(), 1.0 / alloc.es.sqrt());
    for (x, p) in symbols.as_vec_mut().iter_mut().zip(pilots.as_vec()) {
        *x = (*x / gain - p * sqrt_ep) * inv_es;
    }
    let bits_hat = qam.demap(symbols.as_vec());
    if bits_hat.len() != reference_bits.len() {
        return Err(Error::BitLengthMismatch {
            expected: bits_hat.len(),
            got: reference_bits.len(),
        });
    }
    let errors = bit_errors(&bits_hat, reference_bits);
    Ok(DetectionResult {
        ber: errors as f64 / bits_hat.len() as f64,
        bit_errors: errors,
        bits_hat,
        symbol_estimates: symbols,
    })
}
