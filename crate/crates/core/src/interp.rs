//! Interpolators used to evaluate sampled signals and deformation functions
//! off the integer grid.

use num_complex::Complex64;

use crate::fft;

/// Oversampling factor of the band-limited evaluator.
const OVERSAMPLE: usize = 8;
/// Half-width of the Lagrange stencil on the oversampled grid.
const STENCIL_HALF: usize = 3;

/// Band-limited evaluator of a periodic discrete signal.
///
/// The signal is first upsampled exactly by spectral zero padding, then
/// evaluated with a 6-point Lagrange stencil on the dense grid. The relative
/// error is below 1e-5 for content under a quarter of the sampling rate.
#[derive(Debug, Clone)]
pub struct BandLimited {
    len: usize,
    dense: Vec<Complex64>,
}

impl BandLimited {
    pub fn new(samples: &[Complex64]) -> Self {
        let len = samples.len();
        let spec = fft::forward(samples);
        let dense_len = len * OVERSAMPLE;
        let mut padded = vec![Complex64::new(0.0, 0.0); dense_len];
        let half = len / 2;
        for k in 0..len {
            if len % 2 == 0 && k == half {
                // split the Nyquist bin so the dense signal stays consistent
                padded[half] = spec[k] * 0.5;
                padded[dense_len - half] = spec[k] * 0.5;
            } else if k < half || (len % 2 == 1 && k == half) {
                padded[k] = spec[k];
            } else {
                padded[dense_len - (len - k)] = spec[k];
            }
        }
        let mut dense = fft::inverse(&padded);
        for v in dense.iter_mut() {
            *v *= OVERSAMPLE as f64;
        }
        Self { len, dense }
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    /// Value at real (periodic) position `u`, in original sample units.
    pub fn eval(&self, u: f64) -> Complex64 {
        let n = self.dense.len() as i64;
        let pos = u * OVERSAMPLE as f64;
        let base = pos.floor();
        let frac = pos - base;
        let base = base as i64;
        let h = STENCIL_HALF as i64;
        let mut acc = Complex64::new(0.0, 0.0);
        // nodes base-h+1 ..= base+h, offsets j - frac
        for j in (1 - h)..=h {
            let mut w = 1.0;
            for i in (1 - h)..=h {
                if i != j {
                    w *= (frac - i as f64) / (j - i) as f64;
                }
            }
            acc += self.dense[(base + j).rem_euclid(n) as usize] * w;
        }
        acc
    }
}

/// Exact trigonometric interpolation of a periodic signal at `u`.
///
/// O(L) per evaluation; intended for tests and short signals.
pub fn bandlimited_exact(samples: &[Complex64], u: f64) -> Complex64 {
    let len = samples.len();
    let spec = fft::forward(samples);
    let mut acc = Complex64::new(0.0, 0.0);
    for (k, &c) in spec.iter().enumerate() {
        if len % 2 == 0 && 2 * k == len {
            // symmetric Nyquist: real cosine
            let phase = std::f64::consts::PI * u;
            acc += c * phase.cos();
        } else {
            let f = fft::signed_bin(k, len);
            let phase = 2.0 * std::f64::consts::PI * f * u / len as f64;
            acc += c * Complex64::from_polar(1.0, phase);
        }
    }
    acc / len as f64
}

/// Natural cubic spline through `(i, y[i])`, `i = 0..n`.
#[derive(Debug, Clone)]
pub struct CubicSpline {
    y: Vec<f64>,
    m: Vec<f64>,
}

impl CubicSpline {
    pub fn natural(y: &[f64]) -> Self {
        let n = y.len();
        let mut m = vec![0.0; n];
        if n > 2 {
            // tridiagonal system for interior second derivatives, unit spacing
            let k = n - 2;
            let mut c = vec![0.0; k];
            let mut d = vec![0.0; k];
            for i in 0..k {
                let rhs = 6.0 * (y[i + 2] - 2.0 * y[i + 1] + y[i]);
                if i == 0 {
                    c[i] = 1.0 / 4.0;
                    d[i] = rhs / 4.0;
                } else {
                    let denom = 4.0 - c[i - 1];
                    c[i] = 1.0 / denom;
                    d[i] = (rhs - d[i - 1]) / denom;
                }
            }
            for i in (0..k).rev() {
                let next = if i + 1 < k { m[i + 2] } else { 0.0 };
                m[i + 1] = d[i] - c[i] * next;
            }
        }
        Self { y: y.to_vec(), m }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.y.len();
        if n == 1 {
            return self.y[0];
        }
        if x <= 0.0 {
            return self.y[0] + x * self.slope(0, 0.0);
        }
        if x >= (n - 1) as f64 {
            return self.y[n - 1] + (x - (n - 1) as f64) * self.slope(n - 2, 1.0);
        }
        let i = (x.floor() as usize).min(n - 2);
        let t = x - i as f64;
        let (a, b) = (1.0 - t, t);
        a * self.y[i]
            + b * self.y[i + 1]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[i + 1]) / 6.0
    }

    fn slope(&self, i: usize, t: f64) -> f64 {
        let (a, b) = (1.0 - t, t);
        self.y[i + 1] - self.y[i]
            + (-(3.0 * a * a - 1.0) * self.m[i] + (3.0 * b * b - 1.0) * self.m[i + 1]) / 6.0
    }
}

/// Complex-valued natural spline, component-wise.
#[derive(Debug, Clone)]
pub struct ComplexSpline {
    re: CubicSpline,
    im: CubicSpline,
}

impl ComplexSpline {
    pub fn new(samples: &[Complex64]) -> Self {
        let re: Vec<f64> = samples.iter().map(|z| z.re).collect();
        let im: Vec<f64> = samples.iter().map(|z| z.im).collect();
        Self {
            re: CubicSpline::natural(&re),
            im: CubicSpline::natural(&im),
        }
    }

    pub fn eval(&self, x: f64) -> Complex64 {
        Complex64::new(self.re.eval(x), self.im.eval(x))
    }
}

/// Periodic cubic spline through `(x0 + i*h, y[i])` with period `n*h`.
#[derive(Debug, Clone)]
pub struct PeriodicSpline {
    x0: f64,
    h: f64,
    y: Vec<f64>,
    m: Vec<f64>,
}

impl PeriodicSpline {
    pub fn new(x0: f64, h: f64, y: &[f64]) -> Self {
        let n = y.len();
        let mut m = vec![0.0; n];
        if n >= 3 {
            // cyclic tridiagonal [1 4 1] m = 6 (second difference) / h^2,
            // solved by Sherman-Morrison
            let rhs: Vec<f64> = (0..n)
                .map(|i| 6.0 * (y[(i + 1) % n] - 2.0 * y[i] + y[(i + n - 1) % n]) / (h * h))
                .collect();
            let gamma = -4.0;
            let mut diag = vec![4.0; n];
            diag[0] -= gamma;
            diag[n - 1] -= 1.0 / gamma;
            let solve = |r: &[f64]| -> Vec<f64> {
                let mut c = vec![0.0; n];
                let mut d = vec![0.0; n];
                c[0] = 1.0 / diag[0];
                d[0] = r[0] / diag[0];
                for i in 1..n {
                    let denom = diag[i] - c[i - 1];
                    c[i] = 1.0 / denom;
                    d[i] = (r[i] - d[i - 1]) / denom;
                }
                let mut out = vec![0.0; n];
                out[n - 1] = d[n - 1];
                for i in (0..n - 1).rev() {
                    out[i] = d[i] - c[i] * out[i + 1];
                }
                out
            };
            let x = solve(&rhs);
            let mut u = vec![0.0; n];
            u[0] = gamma;
            u[n - 1] = 1.0;
            let z = solve(&u);
            let factor = (x[0] + x[n - 1] / gamma) / (1.0 + z[0] + z[n - 1] / gamma);
            for i in 0..n {
                m[i] = x[i] - factor * z[i];
            }
        }
        Self {
            x0,
            h,
            y: y.to_vec(),
            m,
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        let n = self.y.len();
        if n == 1 {
            return self.y[0];
        }
        let pos = ((x - self.x0) / self.h).rem_euclid(n as f64);
        let i = (pos.floor() as usize).min(n - 1);
        let j = (i + 1) % n;
        let t = pos - i as f64;
        let (a, b) = (1.0 - t, t);
        let h2 = self.h * self.h;
        a * self.y[i]
            + b * self.y[j]
            + ((a * a * a - a) * self.m[i] + (b * b * b - b) * self.m[j]) * h2 / 6.0
    }
}

/// Cubic Hermite interpolation on a unit interval.
pub(crate) fn hermite(y0: f64, y1: f64, d0: f64, d1: f64, t: f64) -> f64 {
    let t2 = t * t;
    let t3 = t2 * t;
    (2.0 * t3 - 3.0 * t2 + 1.0) * y0
        + (t3 - 2.0 * t2 + t) * d0
        + (-2.0 * t3 + 3.0 * t2) * y1
        + (t3 - t2) * d1
}

/// Derivative of [`hermite`] with respect to `t`.
pub(crate) fn hermite_slope(y0: f64, y1: f64, d0: f64, d1: f64, t: f64) -> f64 {
    let t2 = t * t;
    (6.0 * t2 - 6.0 * t) * y0
        + (3.0 * t2 - 4.0 * t + 1.0) * d0
        + (-6.0 * t2 + 6.0 * t) * y1
        + (3.0 * t2 - 2.0 * t) * d1
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn tone(len: usize, k: f64) -> Vec<Complex64> {
        (0..len)
            .map(|t| Complex64::from_polar(1.0, 2.0 * PI * k * t as f64 / len as f64))
            .collect()
    }

    #[test]
    fn bandlimited_reproduces_grid() {
        let x = tone(64, 5.0);
        let bl = BandLimited::new(&x);
        for t in 0..64 {
            assert!((bl.eval(t as f64) - x[t]).norm() < 1e-12);
        }
    }

    #[test]
    fn bandlimited_matches_exact_off_grid() {
        let len = 128;
        let x: Vec<Complex64> = (0..len)
            .map(|t| {
                let t = t as f64;
                Complex64::new((0.3 * t).sin() + (0.11 * t).cos(), (0.05 * t).sin())
            })
            .collect();
        let bl = BandLimited::new(&x);
        for &u in &[0.25, 10.5, 63.7, 127.9, -3.3] {
            let a = bl.eval(u);
            let b = bandlimited_exact(&x, u);
            assert!((a - b).norm() < 1e-5 * b.norm().max(1.0), "u={u}: {a} vs {b}");
        }
    }

    #[test]
    fn natural_spline_reproduces_cubic_interior() {
        let y: Vec<f64> = (0..20).map(|i| 2.0 * i as f64 + 1.0).collect();
        let s = CubicSpline::natural(&y);
        assert!((s.eval(7.3) - 15.6).abs() < 1e-12);
        assert!((s.eval(-1.0) - (-1.0)).abs() < 1e-12);
    }

    #[test]
    fn periodic_spline_tracks_sine() {
        let n = 64;
        let h = 4.0;
        let y: Vec<f64> = (0..n)
            .map(|i| (2.0 * PI * i as f64 / n as f64).sin())
            .collect();
        let s = PeriodicSpline::new(0.0, h, &y);
        for &x in &[1.0, 17.5, 200.2, 255.9] {
            let exact = (2.0 * PI * x / (n as f64 * h)).sin();
            assert!((s.eval(x) - exact).abs() < 1e-5);
        }
    }

    #[test]
    fn hermite_endpoints() {
        assert_eq!(hermite(1.0, 3.0, 0.5, 0.7, 0.0), 1.0);
        assert!((hermite(1.0, 3.0, 0.5, 0.7, 1.0) - 3.0).abs() < 1e-15);
        assert!((hermite_slope(1.0, 3.0, 0.5, 0.7, 0.0) - 0.5).abs() < 1e-15);
        assert!((hermite_slope(1.0, 3.0, 0.5, 0.7, 1.0) - 0.7).abs() < 1e-15);
    }
}
