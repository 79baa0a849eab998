//! Finite Gabor analysis with a periodic window, the local-frequency
//! baseline, and the theoretical covariances of Gabor slices.
//!
//! Window offsets `t - na` are taken modulo `L`. Where the phase is not
//! `L`-periodic (off-grid frequencies) the centered representative in
//! `(-L/2, L/2]` is used, matching a window concentrated around the origin.

use std::f64::consts::{E, PI};
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::covariance::hermitize;
use crate::error::{Error, Result};
use crate::fft;
use crate::signal::{DeformationFunction, PowerSpectrum, Signal};

const ZERO: Complex64 = Complex64::new(0.0, 0.0);

/// Window, hop `a` and frequency step `b` on signals of length `L`.
#[derive(Debug, Clone, PartialEq)]
pub struct GaborFrame {
    window: Arc<Vec<Complex64>>,
    a: usize,
    b: usize,
}

impl GaborFrame {
    pub fn new(window: Vec<Complex64>, a: usize, b: usize) -> Result<Self> {
        let len = window.len();
        if len < 2 {
            return Err(Error::TooShort(len));
        }
        check_divisor("a", a, len)?;
        check_divisor("b", b, len)?;
        if window.iter().all(|g| g.norm_sqr() == 0.0) {
            return Err(Error::InvalidParameter("window has zero norm".into()));
        }
        Ok(Self {
            window: Arc::new(window),
            a,
            b,
        })
    }

    /// Periodized Gaussian `g[t] ~ exp(-t^2 / (2 std^2))`, unit `l2` norm.
    pub fn gaussian(len: usize, a: usize, b: usize, std: f64) -> Result<Self> {
        Self::new(periodized_gaussian(len, std), a, b)
    }

    /// Periodized Gaussian with standard deviation equal to the hop.
    pub fn default_gaussian(len: usize, a: usize, b: usize) -> Result<Self> {
        Self::gaussian(len, a, b, a as f64)
    }

    /// Same window with a different hop and frequency step.
    pub fn with_steps(&self, a: usize, b: usize) -> Result<Self> {
        check_divisor("a", a, self.len())?;
        check_divisor("b", b, self.len())?;
        Ok(Self {
            window: Arc::clone(&self.window),
            a,
            b,
        })
    }

    pub fn window(&self) -> &[Complex64] {
        &self.window
    }

    pub fn len(&self) -> usize {
        self.window.len()
    }

    pub fn is_empty(&self) -> bool {
        self.window.is_empty()
    }

    pub fn a(&self) -> usize {
        self.a
    }

    pub fn b(&self) -> usize {
        self.b
    }

    /// Number of frequency channels `M = L / b`.
    pub fn m_count(&self) -> usize {
        self.len() / self.b
    }

    /// Number of time frames `N = L / a`.
    pub fn n_count(&self) -> usize {
        self.len() / self.a
    }

    /// Unnormalized DFT of the window.
    pub fn window_hat(&self) -> Vec<Complex64> {
        fft::forward(&self.window)
    }

    /// DTFT of the window at the bin offsets `j + frac`, `j = 0..L`, with
    /// time taken on the centered interval.
    pub fn window_hat_offset(&self, frac: f64) -> Vec<Complex64> {
        let len = self.len();
        if frac == 0.0 {
            return self.window_hat();
        }
        let shifted: Vec<Complex64> = self
            .window
            .iter()
            .enumerate()
            .map(|(t, &g)| {
                let tc = fft::centered_index(t as i64, len) as f64;
                g * Complex64::from_polar(1.0, -2.0 * PI * frac * tc / len as f64)
            })
            .collect();
        fft::forward(&shifted)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.window.iter().map(|g| g.norm_sqr()).sum()
    }
}

fn check_divisor(name: &'static str, value: usize, len: usize) -> Result<()> {
    if value == 0 || len % value != 0 {
        Err(Error::NotDivisor { name, value, len })
    } else {
        Ok(())
    }
}

pub fn periodized_gaussian(len: usize, std: f64) -> Vec<Complex64> {
    let l = len as f64;
    // enough images to cover 12 standard deviations on each side
    let images = ((12.0 * std) / l).ceil() as i64 + 1;
    let mut g: Vec<f64> = (0..len)
        .map(|t| {
            (-images..=images)
                .map(|p| {
                    let u = t as f64 + p as f64 * l;
                    (-0.5 * (u / std).powi(2)).exp()
                })
                .sum()
        })
        .collect();
    let norm = g.iter().map(|v| v * v).sum::<f64>().sqrt();
    for v in &mut g {
        *v /= norm;
    }
    g.into_iter().map(|v| Complex64::new(v, 0.0)).collect()
}

/// An `M x N` Gabor coefficient array, rows indexed by frequency channel.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeFreqTransform {
    pub coeffs: DMatrix<Complex64>,
    pub frame: GaborFrame,
}

impl TimeFreqTransform {
    pub fn m_count(&self) -> usize {
        self.coeffs.nrows()
    }

    pub fn n_count(&self) -> usize {
        self.coeffs.ncols()
    }

    /// Column `n` as a vector over frequency channels.
    pub fn slice(&self, n: usize) -> &[Complex64] {
        let m = self.coeffs.nrows();
        &self.coeffs.as_slice()[n * m..(n + 1) * m]
    }

    /// Squared magnitudes, same layout as the coefficients.
    pub fn magnitude_sqr(&self) -> DMatrix<f64> {
        self.coeffs.map(|z| z.norm_sqr())
    }
}

fn check_len(x: &Signal, frame: &GaborFrame) -> Result<()> {
    if x.len() != frame.len() {
        Err(Error::LengthMismatch {
            expected: frame.len(),
            found: x.len(),
        })
    } else {
        Ok(())
    }
}

/// `G[m, n] = sum_t x[t] e^{-2i pi m b (t - na) / L} conj(g[t - na])`.
pub fn dgt(x: &Signal, frame: &GaborFrame) -> Result<TimeFreqTransform> {
    check_len(x, frame)?;
    let (m_count, n_count) = (frame.m_count(), frame.n_count());
    let plan = fft::plan_forward(m_count);
    let columns: Vec<Vec<Complex64>> = (0..n_count)
        .into_par_iter()
        .map(|n| {
            let mut col = fold_frame(x.samples(), frame, n, 0.0);
            plan.process(&mut col);
            col
        })
        .collect();
    let coeffs = DMatrix::from_iterator(m_count, n_count, columns.into_iter().flatten());
    Ok(TimeFreqTransform {
        coeffs,
        frame: frame.clone(),
    })
}

/// Frame `n` of `x` against the window, modulated by `e^{2i pi shift u / L}`
/// on the centered offset `u`, folded modulo `M`.
fn fold_frame(x: &[Complex64], frame: &GaborFrame, n: usize, shift: f64) -> Vec<Complex64> {
    let len = frame.len();
    let m_count = frame.m_count();
    let start = n * frame.a();
    let g = frame.window();
    let mut out = vec![ZERO; m_count];
    for (u, gu) in g.iter().enumerate() {
        if gu.re == 0.0 && gu.im == 0.0 {
            continue;
        }
        let mut p = x[(u + start) % len] * gu.conj();
        if shift != 0.0 {
            let uc = fft::centered_index(u as i64, len) as f64;
            p *= Complex64::from_polar(1.0, 2.0 * PI * shift * uc / len as f64);
        }
        out[u % m_count] += p;
    }
    out
}

/// All channels of frame `n` evaluated at the off-grid frequencies
/// `m b - shift` (in bins), `m = 0..M`.
pub fn dgt_column_shifted(
    x: &Signal,
    frame: &GaborFrame,
    n: usize,
    shift: f64,
) -> Result<Vec<Complex64>> {
    check_len(x, frame)?;
    if n >= frame.n_count() {
        return Err(Error::InvalidParameter(format!("frame index {n}")));
    }
    let mut col = fold_frame(x.samples(), frame, n, shift);
    fft::plan_forward(frame.m_count()).process(&mut col);
    Ok(col)
}

/// Semi-continuous Gabor coefficient at real frequency `nu` (in bins) and
/// frame `n`.
pub fn dgt_semicontinuous(x: &Signal, frame: &GaborFrame, nu: f64, n: usize) -> Result<Complex64> {
    check_len(x, frame)?;
    let len = frame.len();
    let start = n * frame.a();
    let g = frame.window();
    let mut acc = ZERO;
    for (u, gu) in g.iter().enumerate() {
        let uc = fft::centered_index(u as i64, len) as f64;
        let phase = Complex64::from_polar(1.0, -2.0 * PI * nu * uc / len as f64);
        acc += x.samples()[(u + start) % len] * gu.conj() * phase;
    }
    Ok(acc)
}

/// Energy-weighted mean frequency (in bins) of each frame. Frames with no
/// energy are `None`.
pub fn local_frequency(transform: &TimeFreqTransform) -> Result<Vec<Option<f64>>> {
    let b = transform.frame.b() as f64;
    centroid(&transform.coeffs, |m| m as f64 * b)
}

pub(crate) fn centroid(
    coeffs: &DMatrix<Complex64>,
    coordinate: impl Fn(usize) -> f64,
) -> Result<Vec<Option<f64>>> {
    let out: Vec<Option<f64>> = coeffs
        .column_iter()
        .map(|col| {
            let (mut num, mut den) = (0.0, 0.0);
            for (m, z) in col.iter().enumerate() {
                let p = z.norm_sqr();
                num += coordinate(m) * p;
                den += p;
            }
            (den > 0.0).then(|| num / den)
        })
        .collect();
    if out.iter().all(Option::is_none) {
        return Err(Error::ZeroTransform);
    }
    Ok(out)
}

/// Replaces missing entries by linear interpolation between their present
/// neighbours (constant extrapolation at the ends).
pub fn fill_missing(values: &[Option<f64>]) -> Result<Vec<f64>> {
    let known: Vec<(usize, f64)> = values
        .iter()
        .enumerate()
        .filter_map(|(i, v)| v.map(|v| (i, v)))
        .collect();
    if known.is_empty() {
        return Err(Error::Empty("no present values to interpolate from"));
    }
    let mut out = Vec::with_capacity(values.len());
    let mut next = 0;
    for i in 0..values.len() {
        while next < known.len() && known[next].0 < i {
            next += 1;
        }
        let v = if next < known.len() && known[next].0 == i {
            known[next].1
        } else if next == 0 {
            known[0].1
        } else if next == known.len() {
            known[known.len() - 1].1
        } else {
            let (i0, v0) = known[next - 1];
            let (i1, v1) = known[next];
            v0 + (v1 - v0) * (i - i0) as f64 / (i1 - i0) as f64
        };
        out.push(v);
    }
    Ok(out)
}

/// Covariance of a Gabor slice of white noise with variance `sigma0_sq`:
/// `C[m, m'] = sigma0^2 sum_t |g[t]|^2 e^{2i pi (m' - m) b t / L}`, equal to
/// `(sigma0^2 / L) sum_k conj(g^[k]) g^[k - (m' - m) b]`.
pub fn noise_cov(frame: &GaborFrame, sigma0_sq: f64) -> DMatrix<Complex64> {
    let m_count = frame.m_count();
    let len = frame.len();
    let power: Vec<Complex64> = frame
        .window()
        .iter()
        .map(|g| Complex64::new(g.norm_sqr(), 0.0))
        .collect();
    // L * ifft(|g|^2)[j] = sum_t |g[t]|^2 e^{2i pi j t / L}
    let r_full = fft::inverse(&power);
    let lag = |d: usize| r_full[(d * frame.b()) % len] * (len as f64 * sigma0_sq);
    let r: Vec<Complex64> = (0..m_count).map(lag).collect();
    let mut c = DMatrix::from_fn(m_count, m_count, |m, mp| r[(mp + m_count - m) % m_count]);
    hermitize(&mut c);
    c
}

/// Signal part of the slice covariance for a stationary source with
/// spectrum `S`, shifted by `delta` channels:
/// `C[m, m'] = sum_{k in I+} S[k] conj(g^(k - (m - delta) b)) g^(k - (m' - delta) b)`.
pub fn analytic_cov_shifted(
    spectrum: &PowerSpectrum,
    frame: &GaborFrame,
    delta: f64,
) -> Result<DMatrix<Complex64>> {
    if spectrum.len() != frame.len() {
        return Err(Error::LengthMismatch {
            expected: frame.len(),
            found: spectrum.len(),
        });
    }
    let len = frame.len();
    let m_count = frame.m_count();
    let b = frame.b();
    let offset = delta * b as f64;
    let whole = offset.floor();
    let frac = offset - whole;
    let ghat = frame.window_hat_offset(frac);
    let positive = spectrum.positive_part();
    let support: Vec<(usize, f64)> = positive
        .values()
        .iter()
        .enumerate()
        .filter(|(_, s)| **s > 0.0)
        .map(|(k, &s)| (k, s))
        .collect();
    let whole = whole as i64;
    // rows of v: v[k, m] = sqrt(S[k]) g^(k - m b + offset)
    let v = DMatrix::from_fn(support.len(), m_count, |i, m| {
        let (k, s) = support[i];
        let j = (k as i64 - (m * b) as i64 + whole).rem_euclid(len as i64) as usize;
        ghat[j] * s.sqrt()
    });
    let mut c = v.adjoint() * v;
    hermitize(&mut c);
    Ok(c)
}

pub fn analytic_cov(spectrum: &PowerSpectrum, frame: &GaborFrame) -> Result<DMatrix<Complex64>> {
    analytic_cov_shifted(spectrum, frame, 0.0)
}

/// Signal and noise parts of the shifted slice covariance.
#[derive(Debug, Clone, PartialEq)]
pub struct GaborSliceCovariance {
    pub signal: DMatrix<Complex64>,
    pub noise: DMatrix<Complex64>,
    pub delta: f64,
}

impl GaborSliceCovariance {
    pub fn combined(&self) -> DMatrix<Complex64> {
        &self.signal + &self.noise
    }
}

pub fn shifted_cov(
    spectrum: &PowerSpectrum,
    frame: &GaborFrame,
    sigma0_sq: f64,
    delta: f64,
) -> Result<GaborSliceCovariance> {
    Ok(GaborSliceCovariance {
        signal: analytic_cov_shifted(spectrum, frame, delta)?,
        noise: noise_cov(frame, sigma0_sq),
        delta,
    })
}

/// `K_g = (1/b) min_{t < M} sum_{k < b} |g[t + kM]|^2`.
pub fn window_condition_kg(frame: &GaborFrame) -> f64 {
    let m_count = frame.m_count();
    let g = frame.window();
    let min = (0..m_count)
        .map(|t| (0..frame.b()).map(|k| g[t + k * m_count].norm_sqr()).sum::<f64>())
        .fold(f64::INFINITY, f64::min);
    min / frame.b() as f64
}

/// Bound on `E|R[m]|^2` for the shifted-slice approximation of a modulated
/// signal: `sigma_Z^2 (2 mu1 + (pi e / L) |gamma''| mu2)^2`, with `mu1` the
/// window mass outside `[-T, T]`, `mu2` its second moment inside, and
/// `T = sqrt(L / (pi |gamma''|))`.
pub fn approximation_bound(frame: &GaborFrame, gamma: &DeformationFunction, sigma_z_sq: f64) -> Result<f64> {
    let curvature = gamma.max_curvature();
    let len = frame.len();
    if curvature == 0.0 {
        return Ok(0.0);
    }
    let l = len as f64;
    if l <= 4.0 / (PI * curvature) {
        return Err(Error::Hypothesis(format!(
            "L = {len} must exceed 4 / (pi |gamma''|) = {:.3}",
            4.0 / (PI * curvature)
        )));
    }
    let t_max = (l / (PI * curvature)).sqrt();
    let (mut mu1, mut mu2) = (0.0, 0.0);
    for (t, g) in frame.window().iter().enumerate() {
        let tc = fft::centered_index(t as i64, len) as f64;
        if tc.abs() <= t_max {
            mu2 += tc * tc * g.norm();
        } else {
            mu1 += g.norm();
        }
    }
    let inner = 2.0 * mu1 + PI * E / l * curvature * mu2;
    Ok(sigma_z_sq * inner * inner)
}
