//! Unitary DFT helpers on top of `rustfft`.
//!
//! Forward means `F_n` with `[F_n]_{p,q} = e^{-j2πpq/n}/√n`; inverse is `F_n^H`.
//! Plans are cached in a per-thread planner, so concurrent callers never
//! contend and every thread produces bit-identical results.

use std::cell::RefCell;

use num_complex::Complex64;
use rustfft::FftPlanner;

thread_local! {
    static PLANNER: RefCell<FftPlanner<f64>> = RefCell::new(FftPlanner::new());
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub(crate) enum Direction {
    Forward,
    Inverse,
}

/// Applies the unitary DFT of length `len` to every consecutive chunk of `buf`.
pub(crate) fn unitary_in_place(buf: &mut [Complex64], len: usize, dir: Direction) {
    debug_assert!(len > 0 && buf.len().is_multiple_of(len));
    let plan = PLANNER.with(|p| {
        let mut p = p.borrow_mut();
        match dir {
            Direction::Forward => p.plan_fft_forward(len),
            Direction::Inverse => p.plan_fft_inverse(len),
        }
    });
    plan.process(buf);
    let scale = 1.0 / (len as f64).sqrt();
    for x in buf.iter_mut() {
        *x *= scale;
    }
}

pub(crate) fn forward(input: &[Complex64]) -> Vec<Complex64> {
    let mut out = input.to_vec();
    unitary_in_place(&mut out, input.len(), Direction::Forward);
    out
}

pub(crate) fn inverse(input: &[Complex64]) -> Vec<Complex64> {
    let mut out = input.to_vec();
    unitary_in_place(&mut out, input.len(), Direction::Inverse);
    out
}
