//! Averaged windowed periodogram.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::fft;
use crate::signal::{PowerSpectrum, Signal, SpectralDensity};

/// Welch estimate on `segment` equally spaced frequencies `k / segment`.
///
/// Values are a density in the sense that white noise of variance `s2`
/// gives the level `s2` everywhere.
#[derive(Debug, Clone, PartialEq)]
pub struct WelchSpectrum {
    density: Vec<f64>,
    segments: usize,
}

impl WelchSpectrum {
    pub fn density_values(&self) -> &[f64] {
        &self.density
    }

    pub fn segments(&self) -> usize {
        self.segments
    }

    /// Median level over all frequencies, used as the noise floor.
    pub fn noise_floor(&self) -> f64 {
        let mut v = self.density.clone();
        v.sort_by(f64::total_cmp);
        let n = v.len();
        if n % 2 == 1 {
            v[n / 2]
        } else {
            0.5 * (v[n / 2 - 1] + v[n / 2])
        }
    }

    /// Value at `nu` in cycles per sample, linear between the estimate's
    /// frequencies.
    pub fn at(&self, nu: f64) -> f64 {
        let n = self.density.len();
        let x = nu.rem_euclid(1.0) * n as f64;
        let i = x.floor() as usize % n;
        let frac = x - x.floor();
        (1.0 - frac) * self.density[i] + frac * self.density[(i + 1) % n]
    }

    /// Power spectrum on `len` bins of the positive frequencies, with the
    /// conventions of [`PowerSpectrum`].
    pub fn to_power_spectrum(&self, len: usize) -> Result<PowerSpectrum> {
        PowerSpectrum::from_density(len, |nu| self.at(nu))
    }
}

impl SpectralDensity for WelchSpectrum {
    fn density(&self, nu: f64) -> f64 {
        self.at(nu)
    }
}

/// Welch periodogram with a Hann window.
pub fn welch_spectrum(u: &Signal, segment: usize, overlap: f64) -> Result<WelchSpectrum> {
    let len = u.len();
    if segment < 2 || segment > len {
        return Err(Error::InvalidParameter(format!(
            "segment {segment} for a signal of length {len}"
        )));
    }
    if !(0.0..1.0).contains(&overlap) {
        return Err(Error::InvalidParameter(format!("overlap {overlap}")));
    }
    let hop = (((1.0 - overlap) * segment as f64).round() as usize).max(1);
    let count = (len - segment) / hop + 1;
    let window: Vec<f64> = (0..segment)
        .map(|t| 0.5 - 0.5 * (2.0 * PI * t as f64 / segment as f64).cos())
        .collect();
    let power: f64 = window.iter().map(|w| w * w).sum();
    let plan = fft::plan_forward(segment);
    let mut density = vec![0.0; segment];
    let mut buf = vec![Complex64::new(0.0, 0.0); segment];
    for s in 0..count {
        let chunk = &u.samples()[s * hop..s * hop + segment];
        for ((b, x), w) in buf.iter_mut().zip(chunk).zip(&window) {
            *b = x * w;
        }
        plan.process(&mut buf);
        for (d, b) in density.iter_mut().zip(&buf) {
            *d += b.norm_sqr();
        }
    }
    let scale = 1.0 / (power * count as f64);
    density.iter_mut().for_each(|d| *d *= scale);
    Ok(WelchSpectrum {
        density,
        segments: count,
    })
}
