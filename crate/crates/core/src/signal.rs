//! Discrete signals, power spectra, deformation functions, and the two
//! deformation operators (modulation and time warping).

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{check_finite_real, Error, Result};
use crate::fft;
use crate::interp::{hermite, hermite_slope, BandLimited, ComplexSpline};
use crate::rng::{circular_gaussian, rng_from_seed};

/// Complex discrete signal with its sampling rate.
#[derive(Debug, Clone, PartialEq)]
pub struct Signal {
    samples: Vec<Complex64>,
    fs: f64,
}

impl Signal {
    pub fn new(samples: Vec<Complex64>, fs: f64) -> Result<Self> {
        if samples.len() < 2 {
            return Err(Error::TooShort(samples.len()));
        }
        if let Some(i) = samples.iter().position(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::NonFinite(i));
        }
        if !(fs > 0.0) {
            return Err(Error::InvalidParameter(format!("sampling rate {fs}")));
        }
        Ok(Self { samples, fs })
    }

    pub fn from_real(values: &[f64], fs: f64) -> Result<Self> {
        Self::new(values.iter().map(|&v| Complex64::new(v, 0.0)).collect(), fs)
    }

    pub fn zeros(len: usize, fs: f64) -> Result<Self> {
        Self::new(vec![Complex64::new(0.0, 0.0); len], fs)
    }

    pub fn samples(&self) -> &[Complex64] {
        &self.samples
    }

    pub fn into_samples(self) -> Vec<Complex64> {
        self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|z| z.norm_sqr()).sum()
    }

    pub fn is_real(&self) -> bool {
        self.samples.iter().all(|z| z.im == 0.0)
    }

    pub fn real_part(&self) -> Vec<f64> {
        self.samples.iter().map(|z| z.re).collect()
    }
}

/// Power spectrum over DFT bins `k = 0..L` (bins above `L/2` are negative
/// frequencies).
///
/// The covariance of the associated stationary signal is
/// `C[t, s] = sum_k S[k] e^{2i pi k (t - s) / L}`, so `sum_k S[k]` is the
/// sample variance. Bin 0 and, for even `L`, bin `L/2` must vanish.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerSpectrum {
    values: Vec<f64>,
}

impl PowerSpectrum {
    pub fn new(values: Vec<f64>) -> Result<Self> {
        let len = values.len();
        if len < 2 {
            return Err(Error::TooShort(len));
        }
        check_finite_real(&values)?;
        if let Some((bin, &value)) = values.iter().enumerate().find(|(_, v)| **v < 0.0) {
            return Err(Error::NegativeSpectrum { bin, value });
        }
        if values[0] != 0.0 || (len % 2 == 0 && values[len / 2] != 0.0) {
            return Err(Error::InvalidParameter(
                "power spectrum must vanish at bin 0 and at the Nyquist bin".into(),
            ));
        }
        Ok(Self { values })
    }

    pub fn zeros(len: usize) -> Result<Self> {
        Self::new(vec![0.0; len])
    }

    /// Spectrum sampled from a one-sided density `f(nu)` in cycles/sample:
    /// `S[k] = f(k/L) / L` for `0 < k < L/2`, zero elsewhere.
    pub fn from_density<F: Fn(f64) -> f64>(len: usize, density: F) -> Result<Self> {
        let mut values = vec![0.0; len];
        for (k, v) in values.iter_mut().enumerate().take(len.div_ceil(2)).skip(1) {
            if 2 * k == len {
                continue;
            }
            *v = density(k as f64 / len as f64).max(0.0) / len as f64;
        }
        Self::new(values)
    }

    /// Flat spectrum of total variance `variance` on bins `lo..=hi`.
    pub fn flat(len: usize, lo: usize, hi: usize, variance: f64) -> Result<Self> {
        if lo == 0 || hi < lo || hi >= len {
            return Err(Error::InvalidParameter(format!("flat band {lo}..={hi}")));
        }
        let level = variance / (hi - lo + 1) as f64;
        let mut values = vec![0.0; len];
        for v in &mut values[lo..=hi] {
            *v = level;
        }
        Self::new(values)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn variance(&self) -> f64 {
        self.values.iter().sum()
    }

    /// Theoretical covariance `C[t, s]` of the stationary signal.
    pub fn covariance(&self, lag: i64) -> Complex64 {
        let len = self.len() as f64;
        self.values
            .iter()
            .enumerate()
            .filter(|(_, s)| **s > 0.0)
            .map(|(k, &s)| Complex64::from_polar(s, 2.0 * PI * k as f64 * lag as f64 / len))
            .sum()
    }

    /// Restriction to positive frequencies `0 < k < L/2`.
    pub fn positive_part(&self) -> PowerSpectrum {
        let len = self.len();
        let values = (0..len)
            .map(|k| if k > 0 && 2 * k < len { self.values[k] } else { 0.0 })
            .collect();
        PowerSpectrum { values }
    }
}

/// A spectral density in cycles per sample, for wavelet-domain integrals.
pub trait SpectralDensity: Sync {
    fn density(&self, nu: f64) -> f64;
}

impl<F: Fn(f64) -> f64 + Sync> SpectralDensity for F {
    fn density(&self, nu: f64) -> f64 {
        self(nu)
    }
}

impl SpectralDensity for PowerSpectrum {
    /// Piecewise-linear density with `L * S[k]` at `nu = k/L`, on `[0, 1/2]`.
    fn density(&self, nu: f64) -> f64 {
        let len = self.len();
        if !(0.0..=0.5).contains(&nu) {
            return 0.0;
        }
        let pos = nu * len as f64;
        let k = pos.floor() as usize;
        let frac = pos - k as f64;
        let at = |i: usize| if i < len { self.values[i] } else { 0.0 };
        len as f64 * ((1.0 - frac) * at(k) + frac * at(k + 1))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum DeformationKind {
    Modulation,
    Warp,
}

impl DeformationKind {
    pub fn name(self) -> &'static str {
        match self {
            DeformationKind::Modulation => "modulation",
            DeformationKind::Warp => "warp",
        }
    }
}

/// A deformation function sampled on the integer grid `t = 0..L`.
///
/// For modulations `gamma` is in the phase units of `e^{2i pi gamma(t) / L}`,
/// so `gamma_prime` is a frequency offset in DFT bins. For warps `gamma` maps
/// observation time to source time.
#[derive(Debug, Clone, PartialEq)]
pub struct DeformationFunction {
    gamma: Vec<f64>,
    gamma_prime: Vec<f64>,
    kind: DeformationKind,
    /// `Some(p)` when `gamma(t + L) = gamma(t) + p`.
    wrap: Option<f64>,
}

impl DeformationFunction {
    pub fn new(gamma: Vec<f64>, gamma_prime: Vec<f64>, kind: DeformationKind) -> Result<Self> {
        if gamma.len() != gamma_prime.len() {
            return Err(Error::LengthMismatch {
                expected: gamma.len(),
                found: gamma_prime.len(),
            });
        }
        if gamma.len() < 2 {
            return Err(Error::TooShort(gamma.len()));
        }
        check_finite_real(&gamma)?;
        check_finite_real(&gamma_prime)?;
        if kind == DeformationKind::Warp {
            if let Some(i) = gamma_prime.iter().position(|&d| d <= 0.0) {
                return Err(Error::NonMonotone(i));
            }
            if let Some(i) = gamma.windows(2).position(|w| w[1] <= w[0]) {
                return Err(Error::NonMonotone(i + 1));
            }
        }
        Ok(Self {
            gamma,
            gamma_prime,
            kind,
            wrap: None,
        })
    }

    /// Samples an analytic deformation and its derivative on `0..len`.
    pub fn from_fn(
        len: usize,
        kind: DeformationKind,
        gamma: impl Fn(f64) -> f64,
        gamma_prime: impl Fn(f64) -> f64,
    ) -> Result<Self> {
        let g = (0..len).map(|t| gamma(t as f64)).collect();
        let d = (0..len).map(|t| gamma_prime(t as f64)).collect();
        Self::new(g, d, kind)
    }

    pub fn identity(len: usize) -> Result<Self> {
        Ok(Self::from_fn(len, DeformationKind::Warp, |t| t, |_| 1.0)?.with_wrap(len as f64))
    }

    pub fn zero_modulation(len: usize) -> Result<Self> {
        Self::from_fn(len, DeformationKind::Modulation, |_| 0.0, |_| 0.0)
    }

    /// Declares the quasi-periodicity `gamma(t + L) = gamma(t) + period`.
    pub fn with_wrap(mut self, period: f64) -> Self {
        self.wrap = Some(period);
        self
    }

    pub fn wrap(&self) -> Option<f64> {
        self.wrap
    }

    pub fn gamma(&self) -> &[f64] {
        &self.gamma
    }

    pub fn gamma_prime(&self) -> &[f64] {
        &self.gamma_prime
    }

    pub fn kind(&self) -> DeformationKind {
        self.kind
    }

    pub fn len(&self) -> usize {
        self.gamma.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gamma.is_empty()
    }

    /// `(min gamma', max gamma')`, the control constants of a warp.
    pub fn slope_bounds(&self) -> (f64, f64) {
        self.gamma_prime
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &d| (lo.min(d), hi.max(d)))
    }

    /// `max |gamma''|` from central differences of `gamma'`.
    pub fn max_curvature(&self) -> f64 {
        let n = self.len();
        let d = &self.gamma_prime;
        let mut best: f64 = 0.0;
        for t in 0..n {
            let second = if t > 0 && t + 1 < n {
                0.5 * (d[t + 1] - d[t - 1])
            } else if self.wrap.is_some() {
                0.5 * (d[(t + 1) % n] - d[(t + n - 1) % n])
            } else if t == 0 {
                d[1] - d[0]
            } else {
                d[n - 1] - d[n - 2]
            };
            best = best.max(second.abs());
        }
        best
    }

    fn segment(&self, t: f64) -> Option<(usize, f64, f64, f64, f64)> {
        let n = self.len();
        let i = t.floor();
        if i < 0.0 || i >= n as f64 {
            return None;
        }
        let i = i as usize;
        let frac = t - i as f64;
        if i + 1 < n {
            return Some((i, self.gamma[i], self.gamma[i + 1], self.gamma_prime[i], self.gamma_prime[i + 1]));
        }
        let p = self.wrap?;
        debug_assert!(frac >= 0.0);
        Some((i, self.gamma[i], self.gamma[0] + p, self.gamma_prime[i], self.gamma_prime[0]))
    }

    fn reduce(&self, t: f64) -> (f64, f64) {
        match self.wrap {
            Some(p) => {
                let n = self.len() as f64;
                let k = (t / n).floor();
                (t - k * n, k * p)
            }
            None => (t, 0.0),
        }
    }

    /// `gamma(t)` for real `t`, cubic Hermite between samples.
    pub fn eval(&self, t: f64) -> f64 {
        let (local, offset) = self.reduce(t);
        match self.segment(local) {
            Some((i, y0, y1, d0, d1)) => offset + hermite(y0, y1, d0, d1, local - i as f64),
            None => {
                let n = self.len();
                if local < 0.0 {
                    self.gamma[0] + local * self.gamma_prime[0]
                } else {
                    self.gamma[n - 1] + (local - (n - 1) as f64) * self.gamma_prime[n - 1]
                }
            }
        }
    }

    /// `gamma'(t)` for real `t`.
    pub fn eval_prime(&self, t: f64) -> f64 {
        let (local, _) = self.reduce(t);
        match self.segment(local) {
            Some((i, y0, y1, d0, d1)) => hermite_slope(y0, y1, d0, d1, local - i as f64),
            None => {
                if local < 0.0 {
                    self.gamma_prime[0]
                } else {
                    self.gamma_prime[self.len() - 1]
                }
            }
        }
    }

    /// `outer o self`, i.e. `t -> outer(self(t))`.
    pub fn then(&self, outer: &DeformationFunction) -> Result<DeformationFunction> {
        let gamma = self.gamma.iter().map(|&g| outer.eval(g)).collect();
        let gamma_prime = self
            .gamma
            .iter()
            .zip(&self.gamma_prime)
            .map(|(&g, &d)| outer.eval_prime(g) * d)
            .collect();
        let mut out = DeformationFunction::new(gamma, gamma_prime, self.kind)?;
        if let (Some(_), Some(p)) = (self.wrap, outer.wrap) {
            out.wrap = Some(p);
        }
        Ok(out)
    }

    pub(crate) fn expect_kind(&self, kind: DeformationKind) -> Result<()> {
        if self.kind == kind {
            Ok(())
        } else {
            Err(Error::KindMismatch {
                expected: kind.name(),
                found: self.kind.name(),
            })
        }
    }
}

/// Variance of the circular complex white noise added to an observation.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NoiseSpec {
    pub sigma0_sq: f64,
}

impl NoiseSpec {
    pub fn none() -> Self {
        Self { sigma0_sq: 0.0 }
    }

    pub fn new(sigma0_sq: f64) -> Result<Self> {
        if !(sigma0_sq >= 0.0) || !sigma0_sq.is_finite() {
            return Err(Error::InvalidParameter(format!("noise variance {sigma0_sq}")));
        }
        Ok(Self { sigma0_sq })
    }

    /// Noise variance giving `snr_db` relative to a source of variance `signal_variance`.
    pub fn from_snr_db(signal_variance: f64, snr_db: f64) -> Result<Self> {
        Self::new(signal_variance * 10f64.powf(-snr_db / 10.0))
    }

    fn add_to(&self, samples: &mut [Complex64], seed: u64) {
        if self.sigma0_sq == 0.0 {
            return;
        }
        let mut rng = rng_from_seed(seed);
        for z in samples.iter_mut() {
            *z += circular_gaussian(&mut rng, self.sigma0_sq);
        }
    }
}

/// How a warped signal is evaluated between its samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Interpolation {
    /// Periodic trigonometric interpolation; for synthetic periodic signals.
    BandLimited,
    /// Natural cubic spline with no wrap-around; for recorded audio.
    CubicSpline,
}

/// One realization of the circular stationary signal with spectrum `spectrum`.
pub fn synth_stationary(spectrum: &PowerSpectrum, len: usize, seed: u64) -> Result<Signal> {
    if spectrum.len() != len {
        return Err(Error::LengthMismatch {
            expected: len,
            found: spectrum.len(),
        });
    }
    let mut rng = rng_from_seed(seed);
    let mut coeffs: Vec<Complex64> = spectrum
        .values()
        .iter()
        .map(|&s| {
            let xi = circular_gaussian(&mut rng, 1.0);
            xi * (s.sqrt() * len as f64)
        })
        .collect();
    fft::inverse_in_place(&mut coeffs);
    Signal::new(coeffs, 1.0)
}

/// Analytic signal: positive DFT bins doubled, bin 0 and bins `>= L/2` zeroed.
pub fn analytic_signal(x: &Signal) -> Result<Signal> {
    if let Some(i) = x.samples().iter().position(|z| z.im != 0.0) {
        return Err(Error::ComplexInput(i));
    }
    Ok(positive_frequency_projection(x, 2.0))
}

/// Keeps bins `0 < k < L/2`, scaled by `gain`.
pub(crate) fn positive_frequency_projection(x: &Signal, gain: f64) -> Signal {
    let len = x.len();
    let mut spec = fft::forward(x.samples());
    for (k, c) in spec.iter_mut().enumerate() {
        if k == 0 || 2 * k >= len {
            *c = Complex64::new(0.0, 0.0);
        } else {
            *c *= gain;
        }
    }
    fft::inverse_in_place(&mut spec);
    Signal {
        samples: spec,
        fs: x.fs(),
    }
}

/// `Y[t] = Z[t] e^{2i pi gamma(t) / L} + N[t]`.
pub fn apply_modulation(
    z: &Signal,
    gamma: &DeformationFunction,
    noise: NoiseSpec,
    seed: u64,
) -> Result<Signal> {
    gamma.expect_kind(DeformationKind::Modulation)?;
    if gamma.len() != z.len() {
        return Err(Error::LengthMismatch {
            expected: z.len(),
            found: gamma.len(),
        });
    }
    let len = z.len() as f64;
    let mut out: Vec<Complex64> = z
        .samples()
        .iter()
        .zip(gamma.gamma())
        .map(|(&s, &g)| s * Complex64::from_polar(1.0, 2.0 * PI * g / len))
        .collect();
    noise.add_to(&mut out, seed);
    Signal::new(out, z.fs())
}

/// `Y[t] = sqrt(gamma'(t)) x(gamma(t)) + N[t]` on the grid of `gamma`.
pub fn apply_warp(
    x: &Signal,
    gamma: &DeformationFunction,
    noise: NoiseSpec,
    seed: u64,
    interpolation: Interpolation,
) -> Result<Signal> {
    gamma.expect_kind(DeformationKind::Warp)?;
    let mut out = match interpolation {
        Interpolation::BandLimited => {
            let eval = BandLimited::new(x.samples());
            warp_samples(gamma, |u| eval.eval(u))
        }
        Interpolation::CubicSpline => {
            let (lo, hi) = (gamma.gamma()[0], gamma.gamma()[gamma.len() - 1]);
            let max = (x.len() - 1) as f64;
            let slack = 1e-9 * max.max(1.0);
            if lo < -slack || hi > max + slack {
                return Err(Error::RangeExceeded { lo, hi, max });
            }
            let spline = ComplexSpline::new(x.samples());
            warp_samples(gamma, |u| spline.eval(u.clamp(0.0, max)))
        }
    };
    noise.add_to(&mut out, seed);
    Signal::new(out, x.fs())
}

fn warp_samples(gamma: &DeformationFunction, eval: impl Fn(f64) -> Complex64) -> Vec<Complex64> {
    gamma
        .gamma()
        .iter()
        .zip(gamma.gamma_prime())
        .map(|(&g, &d)| eval(g) * d.sqrt())
        .collect()
}

/// Reciprocal warp `gamma^{-1}` sampled on the same grid.
pub fn invert_deformation(gamma: &DeformationFunction) -> Result<DeformationFunction> {
    gamma.expect_kind(DeformationKind::Warp)?;
    let n = gamma.len();
    let mut inv = Vec::with_capacity(n);
    let mut inv_prime = Vec::with_capacity(n);
    let g = gamma.gamma();
    let mut seg = 0usize;
    for s in 0..n {
        let target = s as f64;
        let t = match gamma.wrap() {
            Some(p) => {
                // gamma^{-1}(s + p) = gamma^{-1}(s) + L
                let shift = ((target - g[0]) / p).floor();
                let base = target - shift * p;
                solve_increasing(gamma, base, &mut seg) + shift * n as f64
            }
            None => {
                if target < g[0] {
                    (target - g[0]) / gamma.gamma_prime()[0]
                } else if target > g[n - 1] {
                    (n - 1) as f64 + (target - g[n - 1]) / gamma.gamma_prime()[n - 1]
                } else {
                    solve_increasing(gamma, target, &mut seg)
                }
            }
        };
        inv.push(t);
        inv_prime.push(1.0 / gamma.eval_prime(t));
    }
    let out = DeformationFunction::new(inv, inv_prime, DeformationKind::Warp)?;
    Ok(match gamma.wrap() {
        Some(_) => out.with_wrap(n as f64),
        None => out,
    })
}

/// Solves `gamma(t) = target` for `t` in the sampled range (plus the wrap
/// interval), by bracketing and bisection-safeguarded Newton steps.
fn solve_increasing(gamma: &DeformationFunction, target: f64, hint: &mut usize) -> f64 {
    let n = gamma.len();
    let last = if gamma.wrap().is_some() { n } else { n - 1 };
    let value_at = |i: usize| {
        if i < n {
            gamma.gamma()[i]
        } else {
            gamma.gamma()[0] + gamma.wrap().unwrap_or(0.0)
        }
    };
    let mut i = (*hint).min(last - 1);
    while i > 0 && value_at(i) > target {
        i -= 1;
    }
    while i + 1 < last && value_at(i + 1) <= target {
        i += 1;
    }
    *hint = i;
    let (mut lo, mut hi) = (i as f64, (i + 1) as f64);
    let mut t = lo + (target - value_at(i)) / (value_at(i + 1) - value_at(i)).max(f64::MIN_POSITIVE);
    for _ in 0..60 {
        let f = gamma.eval(t) - target;
        if f.abs() < 1e-13 * (1.0 + target.abs()) {
            break;
        }
        if f > 0.0 {
            hi = t;
        } else {
            lo = t;
        }
        let d = gamma.eval_prime(t);
        let newton = t - f / d;
        t = if d > 0.0 && newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
    }
    t
}
