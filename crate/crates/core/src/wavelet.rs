//! Analytic derivative-of-Gaussian wavelets, the sampled continuous wavelet
//! transform on a geometric scale grid, and the covariance of its time
//! slices for stationary sources.
//!
//! Frequencies passed to spectral densities are in cycles per sample.

use std::f64::consts::PI;
use std::sync::Arc;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::fft;
use crate::gabor::centroid;
use crate::interp::BandLimited;
use crate::signal::{
    apply_warp, invert_deformation, DeformationFunction, Interpolation, NoiseSpec, PowerSpectrum,
    Signal, SpectralDensity,
};

/// Values of the wavelet spectrum below this fraction of the peak are
/// treated as zero.
pub const SUPPORT_TOL: f64 = 1e-12;
/// Rows leaking more than this fraction of their energy above Nyquist are
/// flagged as aliased.
pub const ALIAS_TOL: f64 = 1e-3;
/// Quadrature nodes per log-bandwidth of the wavelet.
const NODES_PER_WIDTH: f64 = 32.0;
/// Relative cut-off of the periodization sum in the Mellin condition.
const MELLIN_SUM_TOL: f64 = 1e-10;

/// `psi^(nu) = (nu / nu0)^k exp(-alpha (nu^2 - nu0^2))` for `nu > 0`, zero
/// otherwise, with its mode `nu0` at `fs / 4` and peak value 1.
#[derive(Debug, Clone)]
pub struct Wavelet {
    degree: u32,
    alpha: f64,
    fs: f64,
    tail: Arc<EnergyTail>,
}

impl PartialEq for Wavelet {
    fn eq(&self, other: &Self) -> bool {
        self.degree == other.degree && self.alpha == other.alpha && self.fs == other.fs
    }
}

pub fn design_wavelet(degree: u32, fs: f64) -> Result<Wavelet> {
    if degree == 0 {
        return Err(Error::InvalidParameter("wavelet degree must be at least 1".into()));
    }
    if !(fs > 0.0) {
        return Err(Error::InvalidParameter(format!("sampling rate {fs}")));
    }
    let alpha = 8.0 * degree as f64 / (fs * fs);
    let mut w = Wavelet {
        degree,
        alpha,
        fs,
        tail: Arc::new(EnergyTail::default()),
    };
    w.tail = Arc::new(EnergyTail::new(&w));
    Ok(w)
}

impl Wavelet {
    pub fn degree(&self) -> u32 {
        self.degree
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn fs(&self) -> f64 {
        self.fs
    }

    /// Mode of the spectrum, in Hz.
    pub fn mode(&self) -> f64 {
        self.fs / 4.0
    }

    /// Spectrum at `nu` Hz.
    pub fn hat(&self, nu: f64) -> f64 {
        if nu <= 0.0 {
            return 0.0;
        }
        self.log_hat(nu).exp()
    }

    fn log_hat(&self, nu: f64) -> f64 {
        let nu0 = self.mode();
        self.degree as f64 * (nu / nu0).ln() - self.alpha * (nu * nu - nu0 * nu0)
    }

    /// Spectrum at `nu` cycles per sample.
    pub fn hat_normalized(&self, nu: f64) -> f64 {
        self.hat(nu * self.fs)
    }

    /// Standard deviation of `log psi^(e^u)` around the mode.
    pub fn log_bandwidth(&self) -> f64 {
        1.0 / (2.0 * self.degree as f64).sqrt()
    }

    /// Frequencies (cycles per sample) bounding the region where the
    /// spectrum exceeds `tol` times its peak.
    pub fn support(&self, tol: f64) -> (f64, f64) {
        let level = tol.ln();
        let nu0 = 0.25;
        let f = |nu: f64| self.log_hat(nu * self.fs) - level;
        let lo = bisect(|nu| f(nu), nu0 * 1e-6, nu0);
        let hi = bisect(|nu| -f(nu), nu0, nu0 * 64.0);
        (lo, hi)
    }

    /// Fraction of `int psi^(s nu)^2 d nu` lying above Nyquist.
    pub fn alias_fraction(&self, scale: f64) -> f64 {
        self.tail.above(scale * 0.5)
    }

    /// Time-domain samples of the atom at `scale` centered at `center`, on a
    /// periodic grid of length `len`, defined through its DFT
    /// `sqrt(scale) psi^(scale k / L) e^{-2i pi k center / L}` on `0 < k < L/2`.
    pub fn atom(&self, len: usize, scale: f64, center: usize) -> Vec<Complex64> {
        let mut spec = vec![Complex64::new(0.0, 0.0); len];
        for (k, s) in spec.iter_mut().enumerate().take(len.div_ceil(2)).skip(1) {
            if 2 * k == len {
                continue;
            }
            let h = scale.sqrt() * self.hat_normalized(scale * k as f64 / len as f64);
            let phase = -2.0 * PI * (k * center) as f64 / len as f64;
            *s = Complex64::from_polar(h, phase);
        }
        fft::inverse_in_place(&mut spec);
        spec
    }
}

fn bisect(f: impl Fn(f64) -> f64, mut lo: f64, mut hi: f64) -> f64 {
    // f(lo) < 0 <= f(hi)
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if f(mid) < 0.0 {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Cumulative energy of `psi^(xi)^2` (xi in cycles per sample), tabulated.
#[derive(Debug, Clone, Default)]
struct EnergyTail {
    step: f64,
    cumulative: Vec<f64>,
}

impl EnergyTail {
    fn new(w: &Wavelet) -> Self {
        let (_, hi) = w.support(SUPPORT_TOL);
        let count = 8192;
        let step = hi / count as f64;
        let mut cumulative = Vec::with_capacity(count + 1);
        let mut acc = 0.0;
        let mut prev = 0.0;
        cumulative.push(0.0);
        for i in 1..=count {
            let v = w.hat_normalized(i as f64 * step).powi(2);
            acc += 0.5 * (v + prev) * step;
            prev = v;
            cumulative.push(acc);
        }
        Self { step, cumulative }
    }

    fn above(&self, xi: f64) -> f64 {
        let total = *self.cumulative.last().unwrap_or(&0.0);
        if total == 0.0 {
            return 0.0;
        }
        let pos = xi / self.step;
        if pos >= (self.cumulative.len() - 1) as f64 {
            return 0.0;
        }
        if pos <= 0.0 {
            return 1.0;
        }
        let i = pos.floor() as usize;
        let frac = pos - i as f64;
        let below = self.cumulative[i] * (1.0 - frac) + self.cumulative[i + 1] * frac;
        (total - below) / total
    }
}

/// Geometric scale grid `q^m`, `m = m_start .. m_start + m_count`, sampled
/// in time with hop `a`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScaleGrid {
    pub q: f64,
    pub a: usize,
    pub m_start: i64,
    pub m_count: usize,
}

impl ScaleGrid {
    pub fn new(q: f64, a: usize, m_start: i64, m_count: usize) -> Result<Self> {
        if !(q > 1.0) || !q.is_finite() {
            return Err(Error::InvalidParameter(format!("scale ratio q = {q} must exceed 1")));
        }
        if a == 0 {
            return Err(Error::InvalidParameter("hop must be positive".into()));
        }
        if m_count == 0 {
            return Err(Error::Empty("scale grid"));
        }
        Ok(Self {
            q,
            a,
            m_start,
            m_count,
        })
    }

    /// `voices` scales per octave.
    pub fn voices(voices: u32, a: usize, m_start: i64, m_count: usize) -> Result<Self> {
        Self::new(2f64.powf(1.0 / voices as f64), a, m_start, m_count)
    }

    pub fn scale(&self, m: f64) -> f64 {
        self.q.powf(m)
    }

    /// Scale index of row `row`.
    pub fn index(&self, row: usize) -> i64 {
        self.m_start + row as i64
    }

    pub fn ln_q(&self) -> f64 {
        self.q.ln()
    }
}

/// Wavelet coefficients, one row per scale index of the grid.
#[derive(Debug, Clone, PartialEq)]
pub struct TimeScaleTransform {
    pub coeffs: DMatrix<Complex64>,
    pub grid: ScaleGrid,
    pub wavelet: Wavelet,
    /// Scale indices whose atoms leak more than [`ALIAS_TOL`] above Nyquist.
    pub aliased: Vec<i64>,
}

impl TimeScaleTransform {
    pub fn n_count(&self) -> usize {
        self.coeffs.ncols()
    }

    pub fn slice(&self, n: usize) -> &[Complex64] {
        let m = self.coeffs.nrows();
        &self.coeffs.as_slice()[n * m..(n + 1) * m]
    }

    pub fn magnitude_sqr(&self) -> DMatrix<f64> {
        self.coeffs.map(|z| z.norm_sqr())
    }
}

/// `W[m, n] = <x, psi_mn>` with `psi_mn(t) = q^{-m/2} psi(q^{-m}(t - na))`,
/// computed per scale by spectral multiplication.
pub fn cwt(x: &Signal, wavelet: &Wavelet, grid: &ScaleGrid) -> Result<TimeScaleTransform> {
    let len = x.len();
    if len % grid.a != 0 {
        return Err(Error::NotDivisor {
            name: "a",
            value: grid.a,
            len,
        });
    }
    let spectrum = fft::forward(x.samples());
    Ok(cwt_from_spectrum(&spectrum, wavelet, grid))
}

pub(crate) fn cwt_from_spectrum(
    spectrum: &[Complex64],
    wavelet: &Wavelet,
    grid: &ScaleGrid,
) -> TimeScaleTransform {
    let len = spectrum.len();
    let n_count = len / grid.a;
    let plan = fft::plan_inverse(n_count);
    let (lo, hi) = wavelet.support(SUPPORT_TOL);
    let rows: Vec<Vec<Complex64>> = (0..grid.m_count)
        .into_par_iter()
        .map(|row| {
            let s = grid.scale(grid.index(row) as f64);
            let k_lo = ((lo / s) * len as f64).floor().max(1.0) as usize;
            let k_hi = ((hi / s) * len as f64).ceil().min(((len - 1) / 2) as f64) as usize;
            let mut buf = vec![Complex64::new(0.0, 0.0); n_count];
            let gain = s.sqrt();
            for k in k_lo..=k_hi {
                if 2 * k >= len {
                    break;
                }
                let h = gain * wavelet.hat_normalized(s * k as f64 / len as f64);
                buf[k % n_count] += spectrum[k] * h;
            }
            plan.process(&mut buf);
            let scale = 1.0 / len as f64;
            buf.iter_mut().for_each(|v| *v *= scale);
            buf
        })
        .collect();
    let coeffs = DMatrix::from_fn(grid.m_count, n_count, |m, n| rows[m][n]);
    let aliased = (0..grid.m_count)
        .map(|row| grid.index(row))
        .filter(|&m| wavelet.alias_fraction(grid.scale(m as f64)) > ALIAS_TOL)
        .collect();
    TimeScaleTransform {
        coeffs,
        grid: *grid,
        wavelet: wavelet.clone(),
        aliased,
    }
}

/// Energy-weighted mean scale `sum_m q^m |W|^2 / sum_m |W|^2` per frame.
pub fn local_scale(transform: &TimeScaleTransform) -> Result<Vec<Option<f64>>> {
    let grid = transform.grid;
    centroid(&transform.coeffs, |row| grid.scale(grid.index(row) as f64))
}

/// Signal and noise parts of the covariance of a wavelet time slice.
#[derive(Debug, Clone, PartialEq)]
pub struct WaveletSliceCovariance {
    pub signal: DMatrix<Complex64>,
    pub noise: DMatrix<Complex64>,
    pub delta: f64,
}

impl WaveletSliceCovariance {
    pub fn combined(&self) -> DMatrix<Complex64> {
        &self.signal + &self.noise
    }
}

/// `C[m, m'] = q^{(m+m')/2} int_0^inf S(nu) psi^(q^m nu) psi^(q^m' nu) d nu`
/// on the rows of `grid` shifted by `delta`, by the trapezoidal rule on a
/// logarithmic frequency grid.
pub fn slice_cov_quadrature(
    density: &dyn SpectralDensity,
    wavelet: &Wavelet,
    grid: &ScaleGrid,
    delta: f64,
) -> Result<DMatrix<Complex64>> {
    let (lo, hi) = wavelet.support(SUPPORT_TOL);
    let ln_q = grid.ln_q();
    let first = (grid.m_start as f64 + delta) * ln_q;
    let last = (grid.m_start as f64 + (grid.m_count - 1) as f64 + delta) * ln_q;
    // nu ranges over [lo / q^{m_max}, hi / q^{m_min}]
    let v_lo = lo.ln() - last;
    let v_hi = hi.ln() - first;
    let du = wavelet.log_bandwidth() / NODES_PER_WIDTH;
    let nodes = ((v_hi - v_lo) / du).ceil() as usize + 1;
    let mut a = DMatrix::<f64>::zeros(nodes, grid.m_count);
    for i in 0..nodes {
        let v = v_lo + i as f64 * du;
        let nu = v.exp();
        let s = density.density(nu);
        if !s.is_finite() {
            return Err(Error::Quadrature(format!("density is not finite at {nu}")));
        }
        if s <= 0.0 {
            continue;
        }
        let weight = (s * nu * du).sqrt();
        for row in 0..grid.m_count {
            let m = grid.index(row) as f64 + delta;
            let scale = (m * ln_q).exp();
            a[(i, row)] = weight * scale.sqrt() * wavelet.hat_normalized(scale * nu);
        }
    }
    let c = a.transpose() * a;
    if c.iter().any(|v| !v.is_finite()) {
        return Err(Error::Quadrature("non-finite covariance entry".into()));
    }
    Ok(c.map(|v| Complex64::new(v, 0.0)))
}

/// Signal covariance at rows shifted by `delta`, and the white-noise
/// covariance (flat density `sigma0_sq` up to Nyquist) at the unshifted rows.
pub fn wavelet_cov(
    density: &dyn SpectralDensity,
    wavelet: &Wavelet,
    grid: &ScaleGrid,
    delta: f64,
    sigma0_sq: f64,
) -> Result<WaveletSliceCovariance> {
    let signal = slice_cov_quadrature(density, wavelet, grid, delta)?;
    let white = move |nu: f64| if nu <= 0.5 { sigma0_sq } else { 0.0 };
    let noise = slice_cov_quadrature(&white, wavelet, grid, 0.0)?;
    Ok(WaveletSliceCovariance {
        signal,
        noise,
        delta,
    })
}

/// Exact slice covariance of the sampled transform of a stationary signal
/// with discrete spectrum `S`:
/// `C[m, m'] = sum_{0<k<L/2} S[k] q^{(m+m')/2} psi^(q^m k/L) psi^(q^m' k/L)`.
pub fn wavelet_cov_discrete(
    spectrum: &PowerSpectrum,
    wavelet: &Wavelet,
    grid: &ScaleGrid,
    delta: f64,
) -> DMatrix<Complex64> {
    let len = spectrum.len();
    let support: Vec<usize> = (1..len.div_ceil(2))
        .filter(|&k| 2 * k != len && spectrum.values()[k] > 0.0)
        .collect();
    let a = DMatrix::from_fn(support.len(), grid.m_count, |i, row| {
        let k = support[i];
        let s = grid.scale(grid.index(row) as f64 + delta);
        spectrum.values()[k].sqrt() * s.sqrt() * wavelet.hat_normalized(s * k as f64 / len as f64)
    });
    (a.transpose() * a).map(|v| Complex64::new(v, 0.0))
}

/// Samples of `Psi(u) = psi^(e^u) e^{u/2}` on a uniform grid in `u`.
#[derive(Debug, Clone)]
pub struct MellinProfile {
    u0: f64,
    du: f64,
    values: Vec<f64>,
}

impl MellinProfile {
    pub fn new(wavelet: &Wavelet) -> Self {
        let (lo, hi) = wavelet.support(SUPPORT_TOL);
        Self::from_fn(|nu| wavelet.hat_normalized(nu), lo, hi, wavelet.log_bandwidth())
    }

    /// Profile of an arbitrary one-sided spectrum supported in `[lo, hi]`.
    pub fn from_fn(hat: impl Fn(f64) -> f64, lo: f64, hi: f64, width: f64) -> Self {
        let (u0, u1) = (lo.ln(), hi.ln());
        let du = width / NODES_PER_WIDTH;
        let count = ((u1 - u0) / du).ceil() as usize + 1;
        let values = (0..count)
            .map(|i| {
                let u = u0 + i as f64 * du;
                hat(u.exp()) * (0.5 * u).exp()
            })
            .collect();
        Self { u0, du, values }
    }

    /// `int_0^inf psi^(nu) nu^{-2i pi s} d nu / sqrt(nu)`.
    pub fn transform(&self, s: f64) -> Complex64 {
        self.values
            .iter()
            .enumerate()
            .map(|(i, &v)| {
                let u = self.u0 + i as f64 * self.du;
                Complex64::from_polar(v, -2.0 * PI * s * u)
            })
            .sum::<Complex64>()
            * self.du
    }

    /// `sum_l |transform(s + l / h)|^2`, truncated once terms are
    /// negligible against the running sum.
    pub fn periodized(&self, s: f64, h: f64) -> f64 {
        let period = 1.0 / h;
        let mut total = self.transform(s).norm_sqr();
        for dir in [1.0, -1.0] {
            let mut l = 1.0;
            loop {
                let term = self.transform(s + dir * l * period).norm_sqr();
                total += term;
                if term <= MELLIN_SUM_TOL * total || l > 1e4 {
                    break;
                }
                l += 1.0;
            }
        }
        total
    }

    /// `(1/ln q) inf_{s in [0, 1/ln q]} periodized(s)`.
    pub fn condition(&self, q: f64) -> Result<f64> {
        if !(q > 1.0) {
            return Err(Error::InvalidParameter(format!("coarse ratio q = {q} must exceed 1")));
        }
        let h = q.ln();
        let period = 1.0 / h;
        let scan = 256;
        let f = |s: f64| self.periodized(s, h);
        let (mut best_i, mut best) = (0, f64::INFINITY);
        for i in 0..scan {
            let v = f(period * i as f64 / scan as f64);
            if v < best {
                best = v;
                best_i = i;
            }
        }
        // golden-section refinement around the best scan point
        let step = period / scan as f64;
        let (mut a, mut b) = ((best_i as f64 - 1.0) * step, (best_i as f64 + 1.0) * step);
        let ratio = 0.5 * (5f64.sqrt() - 1.0);
        let mut c = b - ratio * (b - a);
        let mut d = a + ratio * (b - a);
        let (mut fc, mut fd) = (f(c), f(d));
        for _ in 0..60 {
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - ratio * (b - a);
                fc = f(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + ratio * (b - a);
                fd = f(d);
            }
        }
        let inf = best.min(fc).min(fd);
        if !inf.is_finite() {
            return Err(Error::Quadrature("Mellin periodization is not finite".into()));
        }
        Ok(inf / h)
    }
}

/// Lower bound `K_psi` of the noise covariance on the grid of ratio `q_coarse`.
pub fn mellin_condition_kpsi(wavelet: &Wavelet, q_coarse: f64) -> Result<f64> {
    MellinProfile::new(wavelet).condition(q_coarse)
}

/// Transform of the unwarped signal `D_{gamma^{-1}} y`, which equals
/// `<y, D_gamma psi_mn>` by unitarity of the warping operator.
pub fn warped_wavelet_transform(
    y: &Signal,
    gamma_hat: &DeformationFunction,
    wavelet: &Wavelet,
    grid: &ScaleGrid,
) -> Result<TimeScaleTransform> {
    let u = unwarp(y, gamma_hat)?;
    cwt(&u, wavelet, grid)
}

/// `D_{gamma^{-1}} y`, band-limited for periodic warps, spline otherwise.
pub fn unwarp(y: &Signal, gamma_hat: &DeformationFunction) -> Result<Signal> {
    let inverse = invert_deformation(gamma_hat)?;
    let interpolation = if gamma_hat.wrap().is_some() {
        Interpolation::BandLimited
    } else {
        Interpolation::CubicSpline
    };
    apply_warp(y, &inverse, NoiseSpec::none(), 0, interpolation)
}

/// Literal evaluation of `<y, D_gamma psi_mn>` against warped atoms. Each
/// atom is evaluated by band-limited interpolation and truncated to eight
/// effective widths around its warped center. Quadratic cost; meant for
/// checking [`warped_wavelet_transform`] on short signals.
pub fn warped_wavelet_transform_atoms(
    y: &Signal,
    gamma_hat: &DeformationFunction,
    wavelet: &Wavelet,
    grid: &ScaleGrid,
) -> Result<TimeScaleTransform> {
    let len = y.len();
    if gamma_hat.len() != len {
        return Err(Error::LengthMismatch {
            expected: len,
            found: gamma_hat.len(),
        });
    }
    if len % grid.a != 0 {
        return Err(Error::NotDivisor {
            name: "a",
            value: grid.a,
            len,
        });
    }
    let n_count = len / grid.a;
    let rows: Vec<Vec<Complex64>> = (0..grid.m_count)
        .into_par_iter()
        .map(|row| {
            let s = grid.scale(grid.index(row) as f64);
            let atom = BandLimited::new(&wavelet.atom(len, s, 0));
            // envelope std in samples of the atom at this scale
            let width = 8.0 * s / (2.0 * PI * 0.25 * wavelet.log_bandwidth());
            (0..n_count)
                .map(|n| {
                    let center = (n * grid.a) as f64;
                    let mut acc = Complex64::new(0.0, 0.0);
                    for (t, yt) in y.samples().iter().enumerate() {
                        let g = gamma_hat.gamma()[t];
                        let mut off = g - center;
                        if gamma_hat.wrap().is_some() {
                            off -= (off / len as f64).round() * len as f64;
                        }
                        if off.abs() > width {
                            continue;
                        }
                        let value = atom.eval(off) * gamma_hat.gamma_prime()[t].sqrt();
                        acc += yt * value.conj();
                    }
                    acc
                })
                .collect()
        })
        .collect();
    let coeffs = DMatrix::from_fn(grid.m_count, n_count, |m, n| rows[m][n]);
    let aliased = (0..grid.m_count)
        .map(|row| grid.index(row))
        .filter(|&m| wavelet.alias_fraction(grid.scale(m as f64)) > ALIAS_TOL)
        .collect();
    Ok(TimeScaleTransform {
        coeffs,
        grid: *grid,
        wavelet: wavelet.clone(),
        aliased,
    })
}

/// `rho_X(alpha) = int |nu|^{2 - 6/(alpha+2)} S(nu) d nu` over `(0, 1/2]`.
pub fn rho_x(density: &dyn SpectralDensity, alpha: f64) -> f64 {
    let count = 8192;
    let step = 0.5 / count as f64;
    let p = 2.0 - 6.0 / (alpha + 2.0);
    (1..=count)
        .map(|i| {
            let nu = i as f64 * step;
            let w = if i == count { 0.5 } else { 1.0 };
            w * nu.powf(p) * density.density(nu) * step
        })
        .sum()
}
