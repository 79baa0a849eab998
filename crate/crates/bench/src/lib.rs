//! Inputs shared by the benchmarks.

pub use tfdeform;

use tfdeform::{synth_stationary, PowerSpectrum, Signal};

/// Unit-variance stationary noise, flat on `[len / 64, len / 8]`.
pub fn band_noise(len: usize, seed: u64) -> Signal {
    let spectrum = PowerSpectrum::flat(len, len / 64, len / 8, 1.0).expect("valid band");
    synth_stationary(&spectrum, len, seed).expect("matching length")
}
