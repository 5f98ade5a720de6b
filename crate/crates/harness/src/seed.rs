//! Stable seed derivation.
//!
//! `point = derive(master, sweep_index)` and `frame = derive(point, frame_index)`,
//! where `derive(parent, i) = splitmix64(parent ^ splitmix64(i))` and
//! `splitmix64` is the finalizer of Vigna's SplitMix64 generator. Within a frame,
//! a ChaCha8 generator seeded with the frame seed supplies independent streams
//! for the channel, the data bits and the noise. Results therefore depend only
//! on the indices, never on scheduling.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

const GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(GAMMA);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

pub fn derive(parent: u64, index: u64) -> u64 {
    splitmix64(parent ^ splitmix64(index))
}

pub fn point_seed(master: u64, sweep_index: usize) -> u64 {
    derive(master, sweep_index as u64)
}

pub fn frame_seed(point: u64, frame_index: usize) -> u64 {
    derive(point, frame_index as u64)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Stream {
    Channel = 0,
    Data = 1,
    Noise = 2,
}

pub fn stream(frame_seed: u64, which: Stream) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(frame_seed);
    rng.set_stream(which as u64);
    rng
}
