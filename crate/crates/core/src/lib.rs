//! Link-level building blocks for DoA-aided multi-antenna OTFS receivers with
//! superimposed cross pilots.
//!
//! - [`dd`]: delay-Doppler grid, Zak transforms and the per-path channel operator
//! - [`channel`]: multipath realizations, the ULA observation model and energy split
//! - [`pilots`]: cross and multi-pilot layouts, transmit frames, PAPR
//! - [`estimator`]: profile-based fractional delay-Doppler and gain estimation,
//!   plus the integer-grid multi-pilot comparator
//! - [`detector`]: matched filtering, MRC and QAM slicing
//! - [`oracle`]: dense reference operators for verification

pub mod channel;
pub mod dd;
pub mod detector;
pub mod error;
pub mod estimator;
mod fft;
pub mod oracle;
pub mod pilots;
pub mod qam;

pub use error::{Error, Result};
