//! Gray-mapped square QAM with unit average energy.
//!
//! A symbol of order `Q = L^2` takes `2 log2 L` bits: the first half selects
//! the in-phase level, the second half the quadrature level. On each axis the
//! Gray-coded bits select level index `i` and amplitude `L - 1 - 2i`, so the
//! all-zero pattern maps to the top-right corner. For 4-QAM:
//!
//! | bits | symbol        |
//! |------|---------------|
//! | 00   | (+1 + j)/√2   |
//! | 01   | (+1 - j)/√2   |
//! | 10   | (-1 + j)/√2   |
//! | 11   | (-1 - j)/√2   |

use num_complex::Complex64;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Qam {
    order: usize,
    levels: usize,
    bits_per_axis: usize,
    scale: f64,
}

impl Qam {
    pub fn new(order: usize) -> Result<Self> {
        let levels = (order as f64).sqrt().round() as usize;
        if order < 4 || levels * levels != order || !levels.is_power_of_two() {
            return Err(Error::UnsupportedQamOrder(order));
        }
        let l = levels as f64;
        Ok(Self {
            order,
            levels,
            bits_per_axis: levels.trailing_zeros() as usize,
            scale: 1.0 / (2.0 * (l * l - 1.0) / 3.0).sqrt(),
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn bits_per_symbol(&self) -> usize {
        2 * self.bits_per_axis
    }

    fn level(&self, bits: &[u8]) -> f64 {
        let gray = bits.iter().fold(0usize, |acc, &b| (acc << 1) | (b & 1) as usize);
        let mut idx = gray;
        let mut shift = gray >> 1;
        while shift != 0 {
            idx ^= shift;
            shift >>= 1;
        }
        (self.levels as f64 - 1.0 - 2.0 * idx as f64) * self.scale
    }

    fn slice_axis(&self, x: f64, out: &mut Vec<u8>) {
        let l = self.levels as f64;
        let idx = ((l - 1.0 - x / self.scale) / 2.0).round().clamp(0.0, l - 1.0) as usize;
        let gray = idx ^ (idx >> 1);
        for b in (0..self.bits_per_axis).rev() {
            out.push(((gray >> b) & 1) as u8);
        }
    }

    pub fn map(&self, bits: &[u8]) -> Result<Vec<Complex64>> {
        let bps = self.bits_per_symbol();
        if !bits.len().is_multiple_of(bps) {
            return Err(Error::BitLengthMismatch {
                expected: bits.len().next_multiple_of(bps),
                got: bits.len(),
            });
        }
        Ok(bits
            .chunks(bps)
            .map(|c| {
                let (i, q) = c.split_at(self.bits_per_axis);
                Complex64::new(self.level(i), self.level(q))
            })
            .collect())
    }

    /// Nearest-point hard decision followed by Gray demapping.
    pub fn demap(&self, symbols: &[Complex64]) -> Vec<u8> {
        let mut out = Vec::with_capacity(symbols.len() * self.bits_per_symbol());
        for s in symbols {
            self.slice_axis(s.re, &mut out);
            self.slice_axis(s.im, &mut out);
        }
        out
    }

    /// Every constellation point, indexed by the integer value of its bits.
    pub fn constellation(&self) -> Vec<Complex64> {
        let bps = self.bits_per_symbol();
        (0..self.order)
            .map(|v| {
                let bits: Vec<u8> = (0..bps).rev().map(|b| ((v >> b) & 1) as u8).collect();
                self.map(&bits).expect("whole symbol")[0]
            })
            .collect()
    }
}

pub fn qam_map(bits: &[u8], order: usize) -> Result<Vec<Complex64>> {
    Qam::new(order)?.map(bits)
}

pub fn qam_demap(symbols: &[Complex64], order: usize) -> Result<Vec<u8>> {
    Ok(Qam::new(order)?.demap(symbols))
}

/// Bit error ratio, Hamming distance over length.
pub fn ber(detected: &[u8], reference: &[u8]) -> Result<f64> {
    if detected.len() != reference.len() {
        return Err(Error::BitLengthMismatch {
            expected: reference.len(),
            got: detected.len(),
        });
    }
    if reference.is_empty() {
        return Ok(0.0);
    }
    Ok(bit_errors(detected, reference) as f64 / reference.len() as f64)
}

pub fn bit_errors(detected: &[u8], reference: &[u8]) -> usize {
    detected.iter().zip(reference).filter(|(a, b)| a != b).count()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::f64::consts::FRAC_1_SQRT_2;

    #[test]
    fn qpsk_table() {
        let s = qam_map(&[0, 0, 0, 1, 1, 0, 1, 1], 4).unwrap();
        let h = FRAC_1_SQRT_2;
        let expect = [
            Complex64::new(h, h),
            Complex64::new(h, -h),
            Complex64::new(-h, h),
            Complex64::new(-h, -h),
        ];
        for (a, b) in s.iter().zip(expect) {
            assert!((a - b).norm() < 1e-15);
        }
    }

    #[test]
    fn unit_average_energy() {
        for order in [4, 16, 64] {
            let pts = Qam::new(order).unwrap().constellation();
            let e = pts.iter().map(|p| p.norm_sqr()).sum::<f64>() / order as f64;
            assert!((e - 1.0).abs() < 1e-12, "order {order}: {e}");
        }
    }

    #[test]
    fn sixteen_qam_neighbours_differ_by_one_bit() {
        let q = Qam::new(16).unwrap();
        let pts = q.constellation();
        let min_d = 2.0 * q.scale;
        for (a, pa) in pts.iter().enumerate() {
            for (b, pb) in pts.iter().enumerate() {
                if ((pa - pb).norm() - min_d).abs() < 1e-9 {
                    assert_eq!((a ^ b).count_ones(), 1);
                }
            }
        }
    }

    #[test]
    fn rejects_bad_order_and_length() {
        assert!(matches!(Qam::new(8), Err(Error::UnsupportedQamOrder(8))));
        assert!(Qam::new(2).is_err());
        assert!(qam_map(&[0, 1, 1], 4).is_err());
    }

    #[test]
    fn ber_cases() {
        let a = vec![0u8, 1, 1, 0];
        assert_eq!(ber(&a, &a).unwrap(), 0.0);
        let c: Vec<u8> = a.iter().map(|b| 1 - b).collect();
        assert_eq!(ber(&c, &a).unwrap(), 1.0);
        assert_eq!(ber(&[1, 0, 1, 0], &a).unwrap(), 0.5);
        assert!(ber(&[0], &a).is_err());
    }

    proptest! {
        #[test]
        fn map_demap_round_trip(order_exp in 1usize..4, bits in proptest::collection::vec(0u8..2, 0..240)) {
            let order = 1 << (2 * order_exp);
            let q = Qam::new(order).unwrap();
            let n = bits.len() - bits.len() % q.bits_per_symbol();
            let bits = &bits[..n];
            let symbols = q.map(bits).unwrap();
            prop_assert_eq!(q.demap(&symbols), bits.to_vec());
        }
    }
}
