//! Maximum-likelihood estimation of modulations and time warpings.
//!
//! Both estimators alternate between a deformation estimate and a sample
//! covariance of the transform of the compensated ("stationarized") signal,
//! starting from the local frequency or local scale.

mod integrate;
mod modulation;
mod search;
mod warping;
mod welch;

pub use integrate::{
    anchor_shifts, integrate_deformation, normalized_error, Anchor, Integrated, ShiftUnit,
};
pub use modulation::{choose_gabor_stride, demodulate, estimate_modulation, observation_band};
pub use search::{
    ml_shift_search, subgrid_refine, subgrid_search, ShiftGrid, SubgridChoice, SubgridLayout,
};
pub use warping::{choose_wavelet_stride, estimate_warping, local_scale_shifts};
pub use welch::{welch_spectrum, WelchSpectrum};

use crate::error::{Error, Result};
use crate::signal::DeformationFunction;

/// How the noise variance is obtained. It is only reported: the sample
/// covariance of the compensated transform already contains the noise.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub enum NoiseVariance {
    /// Median level of the Welch spectrum of the compensated signal.
    #[default]
    Estimate,
    Known(f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct GaborParams {
    /// Time step.
    pub a: usize,
    /// Fine frequency step in bins.
    pub b_fine: usize,
    /// Window standard deviation in samples; `None` uses `a`.
    pub window_std: Option<f64>,
    /// Coarse stride in fine channels; `None` picks it from `K_g`.
    pub stride: Option<usize>,
    /// Largest shift in bins; `None` means a quarter of the frequency axis.
    pub max_shift_bins: Option<usize>,
}

impl Default for GaborParams {
    fn default() -> Self {
        Self {
            a: 32,
            b_fine: 2,
            window_std: None,
            stride: None,
            max_shift_bins: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WaveletParams {
    pub degree: u32,
    /// Voices per octave of the fine grid (`q = 2^{1/voices}`).
    pub voices: u32,
    /// Time step.
    pub a: usize,
    /// Fine rows computed, starting at `m = 0`.
    pub rows: usize,
    /// Observed rows `[window_start, window_start + window_len)`.
    pub window_start: usize,
    pub window_len: usize,
    /// Largest shift in fine rows.
    pub max_shift: usize,
    /// Coarse stride in fine rows; `None` picks it from `K_psi`.
    pub stride: Option<usize>,
}

impl Default for WaveletParams {
    fn default() -> Self {
        Self {
            degree: 70,
            voices: 70,
            a: 64,
            rows: 420,
            window_start: 70,
            window_len: 280,
            max_shift: 70,
            stride: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct EstimatorConfig {
    pub epsilon: f64,
    pub max_iters: usize,
    pub noise: NoiseVariance,
    /// Treat the signal as periodic (synthetic data) rather than a finite
    /// recording.
    pub periodic: bool,
    pub gabor: GaborParams,
    pub wavelet: WaveletParams,
}

impl Default for EstimatorConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.02,
            max_iters: 20,
            noise: NoiseVariance::Estimate,
            periodic: true,
            gabor: GaborParams::default(),
            wavelet: WaveletParams::default(),
        }
    }
}

impl EstimatorConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidParameter(format!("epsilon {}", self.epsilon)));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be at least 1".into()));
        }
        if let NoiseVariance::Known(v) = self.noise {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidParameter(format!("noise variance {v}")));
            }
        }
        Ok(())
    }
}

/// One pass of the alternating algorithm.
#[derive(Debug, Clone, PartialEq)]
pub struct Iteration {
    /// Anchored shifts produced by this pass.
    pub delta: Vec<f64>,
    /// `|delta_prev - delta| / |delta|`.
    pub criterion: f64,
    /// Candidate covariances that needed a ridge.
    pub ridged: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DeformationEstimate {
    /// Anchored per-frame shifts of the returned iterate.
    pub delta: Vec<f64>,
    pub gamma_hat: DeformationFunction,
    pub anchor: Anchor,
    pub iterations: Vec<Iteration>,
    pub converged: bool,
    /// Samples of `gamma_hat'` raised to the monotonicity floor.
    pub slope_floored: usize,
    /// Anchored shifts of the local frequency / local scale initialization.
    pub baseline_delta: Vec<f64>,
    /// Baseline `gamma'` on the frame grid.
    pub baseline_prime: Vec<f64>,
    pub noise_variance: f64,
    /// Coarse stride used by the subgrid search.
    pub stride: usize,
    /// Time step of the frames.
    pub hop: usize,
}

impl DeformationEstimate {
    /// `gamma_hat'` sampled at the frame times `n * hop`.
    pub fn prime_on_frames(&self) -> Vec<f64> {
        frame_samples(self.gamma_hat.gamma_prime(), self.hop)
    }
}

pub(crate) fn frame_samples(values: &[f64], hop: usize) -> Vec<f64> {
    values.iter().step_by(hop).copied().collect()
}

/// Relative change used as the stopping criterion.
pub(crate) fn relative_change(previous: &[f64], current: &[f64]) -> f64 {
    let diff: f64 = previous
        .iter()
        .zip(current)
        .map(|(a, b)| (a - b).powi(2))
        .sum::<f64>()
        .sqrt();
    let norm = current.iter().map(|v| v * v).sum::<f64>().sqrt();
    if diff == 0.0 {
        0.0
    } else {
        diff / norm.max(f64::MIN_POSITIVE)
    }
}
