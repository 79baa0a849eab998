//! Joint estimation of a modulation and the Gabor covariance of the
//! underlying stationary signal.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::integrate::{anchor_shifts, integrate_deformation, ShiftUnit};
use super::search::SubgridLayout;
use super::warping::{alternate, search_frames};
use super::welch::welch_spectrum;
use super::{DeformationEstimate, EstimatorConfig, NoiseVariance};
use crate::covariance::sample_covariance_of_columns;
use crate::error::{Error, Result};
use crate::gabor::{centroid, dgt, fill_missing, window_condition_kg, GaborFrame, TimeFreqTransform};
use crate::signal::{DeformationFunction, DeformationKind, Signal};

/// `U[t] = Y[t] exp(-2 i pi gamma(t) / L)`.
pub fn demodulate(y: &Signal, gamma_hat: &DeformationFunction) -> Result<Signal> {
    gamma_hat.expect_kind(DeformationKind::Modulation)?;
    if gamma_hat.len() != y.len() {
        return Err(Error::LengthMismatch {
            expected: y.len(),
            found: gamma_hat.len(),
        });
    }
    let len = y.len() as f64;
    let out = y
        .samples()
        .iter()
        .zip(gamma_hat.gamma())
        .map(|(&s, &g)| s * Complex64::from_polar(1.0, -2.0 * PI * g / len))
        .collect();
    Signal::new(out, y.fs())
}

/// Smallest divisor `j` of the fine channel count, up to `max_stride`, for
/// which the frame with frequency step `j * b` has `K_g` at least `1e-3` of
/// the largest value over the candidates.
pub fn choose_gabor_stride(fine: &GaborFrame, max_stride: usize) -> Result<usize> {
    let m = fine.m_count();
    let candidates: Vec<usize> = (1..=max_stride.min(m)).filter(|j| m % j == 0).collect();
    let k = candidates
        .iter()
        .map(|&j| Ok(window_condition_kg(&fine.with_steps(fine.a(), fine.b() * j)?)))
        .collect::<Result<Vec<f64>>>()?;
    let best = k.iter().cloned().fold(0.0, f64::max);
    if best <= 0.0 {
        return Err(Error::Hypothesis(format!(
            "K_g vanishes for every stride up to {max_stride}"
        )));
    }
    Ok(candidates[k.iter().position(|&v| v >= 1e-3 * best).unwrap()])
}

/// Channels `[start, start + len)` (wrapping) that hold the signal: every
/// channel whose energy exceeds four times the median, the circular span
/// between them, and `pad` channels on each side.
pub fn observation_band(transform: &TimeFreqTransform, pad: usize) -> (usize, usize) {
    let rows = transform.m_count();
    let energy: Vec<f64> = transform
        .coeffs
        .row_iter()
        .map(|r| r.iter().map(|z| z.norm_sqr()).sum())
        .collect();
    let mut sorted = energy.clone();
    sorted.sort_by(f64::total_cmp);
    let threshold = 4.0 * sorted[rows / 2];
    let hot: Vec<usize> = (0..rows).filter(|&m| energy[m] > threshold).collect();
    if hot.is_empty() {
        return (0, rows);
    }
    // the band is the complement of the widest gap between hot channels
    let mut gap = (0, hot[0] + rows - hot[hot.len() - 1]);
    for w in 0..hot.len() - 1 {
        let g = hot[w + 1] - hot[w];
        if g > gap.1 {
            gap = (w + 1, g);
        }
    }
    let first = hot[gap.0];
    let span = rows - gap.1 + 1;
    let len = (span + 2 * pad).min(rows);
    let start = (first + rows - pad.min(rows)) % rows;
    (start, len)
}

/// Alternates subgrid maximum-likelihood frequency shifts with the sample
/// covariance of the demodulated signal's Gabor transform, starting from
/// the local frequency.
pub fn estimate_modulation(y: &Signal, config: &EstimatorConfig) -> Result<DeformationEstimate> {
    config.validate()?;
    let p = &config.gabor;
    let len = y.len();
    let std = p.window_std.unwrap_or(p.a as f64);
    let fine = GaborFrame::gaussian(len, p.a, p.b_fine, std)?;
    let rows = fine.m_count();
    let stride = match p.stride {
        Some(j) => j,
        None => choose_gabor_stride(&fine, rows / 4)?,
    };
    if stride == 0 || rows % stride != 0 {
        return Err(Error::NotDivisor {
            name: "stride",
            value: stride,
            len: rows,
        });
    }
    let coarse = fine.with_steps(p.a, p.b_fine * stride)?;
    let observed = dgt(y, &fine)?;

    // pad by two frequency standard deviations of the window
    let pad = (2.0 * len as f64 / (2.0 * PI * std) / p.b_fine as f64).ceil() as usize;
    let (start, band) = observation_band(&observed, pad);
    let window_len = (stride * band.div_ceil(stride)).min(rows);
    let max_shift = (p.max_shift_bins.unwrap_or(len / 4) / p.b_fine) as i64;
    let layout = SubgridLayout {
        rows,
        periodic: true,
        start,
        len: window_len,
        stride,
        direction: -1,
        shifts: (-max_shift..=max_shift).collect(),
    };
    layout.validate()?;
    let unit = ShiftUnit::Bins(p.b_fine as f64);

    let band_rows = nalgebra::DMatrix::from_fn(window_len, observed.n_count(), |r, n| {
        observed.coeffs[((start + r) % rows, n)]
    });
    let freq = fill_missing(&centroid(&band_rows, |r| (start + r) as f64)?)?;
    let (baseline, _) = anchor_shifts(&freq);

    let (delta, iterations, converged) = alternate(&baseline, config, |delta| {
        let g = integrate_deformation(delta, p.a, len, unit, config.periodic)?;
        let u = demodulate(y, &g.gamma)?;
        let reference = sample_covariance_of_columns(&dgt(&u, &coarse)?.coeffs);
        search_frames(&layout, &observed.coeffs, &reference)
    })?;

    let integrated = integrate_deformation(&delta, p.a, len, unit, config.periodic)?;
    let noise_variance = match config.noise {
        NoiseVariance::Known(v) => v,
        NoiseVariance::Estimate => {
            let u = demodulate(y, &integrated.gamma)?;
            welch_spectrum(&u, 256.min(len), 0.5)?.noise_floor()
        }
    };
    let baseline_prime = baseline.iter().map(|d| unit.slope(*d)).collect();
    Ok(DeformationEstimate {
        delta,
        gamma_hat: integrated.gamma,
        anchor: integrated.anchor,
        iterations,
        converged,
        slope_floored: integrated.floored,
        baseline_delta: baseline,
        baseline_prime,
        noise_variance,
        stride,
        hop: p.a,
    })
}
