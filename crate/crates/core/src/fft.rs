//! Thin wrappers over `rustfft` with the unnormalized forward convention
//! `X[k] = sum_t x[t] e^{-2i pi k t / L}` and inverse `x[t] = (1/L) sum_k X[k] e^{2i pi k t / L}`.

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

pub fn forward(x: &[Complex64]) -> Vec<Complex64> {
    let mut buf = x.to_vec();
    plan_forward(buf.len()).process(&mut buf);
    buf
}

pub fn inverse(x: &[Complex64]) -> Vec<Complex64> {
    let mut buf = x.to_vec();
    inverse_in_place(&mut buf);
    buf
}

pub fn inverse_in_place(buf: &mut [Complex64]) {
    let n = buf.len();
    plan_inverse(n).process(buf);
    let scale = 1.0 / n as f64;
    for v in buf.iter_mut() {
        *v *= scale;
    }
}

pub fn plan_forward(n: usize) -> Arc<dyn Fft<f64>> {
    FftPlanner::new().plan_fft_forward(n)
}

pub fn plan_inverse(n: usize) -> Arc<dyn Fft<f64>> {
    FftPlanner::new().plan_fft_inverse(n)
}

/// Signed frequency of DFT bin `k` on `len` points, in bins.
pub fn signed_bin(k: usize, len: usize) -> f64 {
    if 2 * k <= len {
        k as f64
    } else {
        k as f64 - len as f64
    }
}

/// Centered representative of `t` modulo `len`, in `(-len/2, len/2]`.
pub fn centered_index(t: i64, len: usize) -> i64 {
    let l = len as i64;
    let mut r = t.rem_euclid(l);
    if 2 * r > l {
        r -= l;
    }
    r
}
