//! Estimation of modulations and time warpings of stationary signals from
//! their Gabor and wavelet transforms.

pub mod covariance;
pub mod error;
pub mod estimators;
pub mod fft;
pub mod gabor;
pub mod interp;
pub mod rng;
pub mod signal;
pub mod wavelet;

pub use error::{Error, Result};
pub use signal::{
    analytic_signal, apply_modulation, apply_warp, invert_deformation, synth_stationary,
    DeformationFunction, DeformationKind, Interpolation, NoiseSpec, PowerSpectrum, Signal,
    SpectralDensity,
};
