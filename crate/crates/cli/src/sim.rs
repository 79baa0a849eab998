//! Synthetic realizations and single trials.

use std::f64::consts::PI;

use anyhow::{bail, Context, Result};
use tfdeform::estimators::{
    choose_wavelet_stride, estimate_modulation, estimate_warping, normalized_error, DeformationEstimate,
};
use tfdeform::rng::derive_seed;
use tfdeform::wavelet::design_wavelet;
use tfdeform::{
    apply_modulation, apply_warp, synth_stationary, DeformationFunction, DeformationKind, Interpolation, NoiseSpec,
    PowerSpectrum, Signal,
};

use crate::config::ExperimentConfig;

/// Number of sine periods over the signal in simulation `sim`.
pub fn periods(sim: u32) -> Result<f64> {
    Ok(match sim {
        1 => 1.0,
        2 => 2.0,
        3 => 4.0,
        _ => bail!("no simulation {sim}"),
    })
}

/// Unit-variance spectrum, flat on `[lo, hi]` cycles per sample.
pub fn band_spectrum(len: usize, lo: f64, hi: f64) -> Result<PowerSpectrum> {
    let l = len as f64;
    let (a, b) = ((lo * l).ceil() as usize, (hi * l).floor() as usize);
    Ok(PowerSpectrum::flat(len, a.max(1), b, 1.0)?)
}

/// `gamma'(t) = 1 + amp sin(2 pi p t / L)`, `gamma(0) = 0`, periodic.
pub fn sine_warp(len: usize, amp: f64, p: f64) -> Result<DeformationFunction> {
    let l = len as f64;
    let c = amp * l / (2.0 * PI * p);
    Ok(DeformationFunction::from_fn(
        len,
        DeformationKind::Warp,
        |t| t + c - c * (2.0 * PI * p * t / l).cos(),
        |t| 1.0 + amp * (2.0 * PI * p * t / l).sin(),
    )?
    .with_wrap(l))
}

/// `gamma'(t) = amp sin(2 pi t / L)` bins.
pub fn sine_modulation(len: usize, amp: f64) -> Result<DeformationFunction> {
    let l = len as f64;
    Ok(DeformationFunction::from_fn(
        len,
        DeformationKind::Modulation,
        |t| amp * l / (2.0 * PI) * (1.0 - (2.0 * PI * t / l).cos()),
        |t| amp * (2.0 * PI * t / l).sin(),
    )?)
}

pub fn noise(cfg: &ExperimentConfig, signal_variance: f64) -> Result<NoiseSpec> {
    Ok(match cfg.sigma0_sq {
        Some(s) => NoiseSpec::new(s)?,
        None => NoiseSpec::from_snr_db(signal_variance, cfg.snr_db)?,
    })
}

/// Seed of realization `run`. Signal and noise draw from two substreams.
pub fn run_seed(master: u64, run: usize) -> u64 {
    derive_seed(master, run as u64)
}

pub struct Realization {
    pub observed: Signal,
    pub truth: DeformationFunction,
    pub sigma0_sq: f64,
}

pub fn warp_realization(cfg: &ExperimentConfig, sim: u32, seed: u64) -> Result<Realization> {
    let spectrum = band_spectrum(cfg.len, cfg.band_lo, cfg.band_hi)?;
    let truth = sine_warp(cfg.len, cfg.warp_amplitude, periods(sim)?)?;
    let noise = noise(cfg, spectrum.variance())?;
    let x = synth_stationary(&spectrum, cfg.len, derive_seed(seed, 0))?;
    let observed = apply_warp(&x, &truth, noise, derive_seed(seed, 1), Interpolation::BandLimited)?;
    Ok(Realization {
        observed,
        truth,
        sigma0_sq: noise.sigma0_sq,
    })
}

pub fn modulation_realization(cfg: &ExperimentConfig, seed: u64) -> Result<Realization> {
    let spectrum = band_spectrum(cfg.mod_len, cfg.mod_band_lo, cfg.mod_band_hi)?;
    let truth = if cfg.mod_amplitude == 0.0 {
        DeformationFunction::zero_modulation(cfg.mod_len)?
    } else {
        sine_modulation(cfg.mod_len, cfg.mod_amplitude)?
    };
    let noise = noise(cfg, spectrum.variance())?;
    let z = synth_stationary(&spectrum, cfg.mod_len, derive_seed(seed, 0))?;
    let observed = apply_modulation(&z, &truth, noise, derive_seed(seed, 1))?;
    Ok(Realization {
        observed,
        truth,
        sigma0_sq: noise.sigma0_sq,
    })
}

/// Errors of one trial against the truth.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TrialErrors {
    pub proposed: f64,
    pub baseline: f64,
    pub iterations: usize,
    pub converged: bool,
}

fn errors(truth: &DeformationFunction, est: &DeformationEstimate) -> Result<TrialErrors> {
    let on_frames: Vec<f64> = truth.gamma_prime().iter().step_by(est.hop).copied().collect();
    Ok(TrialErrors {
        proposed: normalized_error(&on_frames, &est.prime_on_frames(), truth.kind())?,
        baseline: normalized_error(&on_frames, &est.baseline_prime, truth.kind())?,
        iterations: est.iterations.len(),
        converged: est.converged,
    })
}

/// Coarse stride of the wavelet search for `degree`, unless configured.
pub fn wavelet_stride(cfg: &ExperimentConfig, degree: u32) -> Result<usize> {
    if let Some(s) = cfg.wavelet_stride {
        return Ok(s);
    }
    let wavelet = design_wavelet(degree, 1.0)?;
    let q = 2f64.powf(1.0 / cfg.voices as f64);
    Ok(choose_wavelet_stride(&wavelet, q, cfg.voices as usize)?)
}

pub fn warp_trial(
    cfg: &ExperimentConfig,
    sim: u32,
    degree: u32,
    stride: usize,
    seed: u64,
) -> Result<(TrialErrors, DeformationEstimate, Realization)> {
    let r = warp_realization(cfg, sim, seed)?;
    let mut est_cfg = cfg.estimator(degree, true);
    est_cfg.wavelet.stride = Some(stride);
    let est = estimate_warping(&r.observed, &est_cfg).context("warping estimate")?;
    Ok((errors(&r.truth, &est)?, est, r))
}

pub fn modulation_trial(
    cfg: &ExperimentConfig,
    seed: u64,
) -> Result<(TrialErrors, DeformationEstimate, Realization)> {
    let r = modulation_realization(cfg, seed)?;
    let est = estimate_modulation(&r.observed, &cfg.estimator(70, true)).context("modulation estimate")?;
    let errs = if cfg.mod_amplitude == 0.0 {
        // the error is normalized by |gamma'|, undefined for no modulation
        TrialErrors {
            proposed: f64::NAN,
            baseline: f64::NAN,
            iterations: est.iterations.len(),
            converged: est.converged,
        }
    } else {
        errors(&r.truth, &est)?
    };
    Ok((errs, est, r))
}
