//! Joint estimation of a time warping and the wavelet covariance of the
//! underlying stationary signal.

use nalgebra::DMatrix;

use super::integrate::{anchor_shifts, integrate_deformation, ShiftUnit};
use super::search::{subgrid_search, SubgridLayout};
use super::welch::welch_spectrum;
use super::{relative_change, DeformationEstimate, EstimatorConfig, Iteration, NoiseVariance};
use crate::covariance::sample_covariance_of_columns;
use crate::error::{Error, Result};
use crate::gabor::{centroid, fill_missing};
use crate::signal::Signal;
use crate::wavelet::{
    cwt, design_wavelet, mellin_condition_kpsi, unwarp, warped_wavelet_transform, ScaleGrid,
    TimeScaleTransform, Wavelet,
};

/// Smallest stride `j <= max_stride` whose coarse ratio `q^j` has `K_psi`
/// at least `1e-3` of the largest value over the candidates.
pub fn choose_wavelet_stride(wavelet: &Wavelet, q: f64, max_stride: usize) -> Result<usize> {
    if max_stride == 0 {
        return Err(Error::InvalidParameter("max_stride must be positive".into()));
    }
    let k = (1..=max_stride)
        .map(|j| mellin_condition_kpsi(wavelet, q.powi(j as i32)))
        .collect::<Result<Vec<f64>>>()?;
    let best = k.iter().cloned().fold(0.0, f64::max);
    if best <= 0.0 {
        return Err(Error::Hypothesis(format!(
            "K_psi vanishes for every stride up to {max_stride}"
        )));
    }
    Ok(k.iter().position(|&v| v >= 1e-3 * best).unwrap() + 1)
}

/// Unanchored initial shifts `-log_q sigma[n]` from the local scale over the
/// rows `[start, start + len)`.
pub fn local_scale_shifts(transform: &TimeScaleTransform, start: usize, len: usize) -> Result<Vec<f64>> {
    let grid = transform.grid;
    let rows = transform.coeffs.rows(start, len).into_owned();
    let scales = centroid(&rows, |r| grid.scale(grid.index(start + r) as f64))?;
    let filled = fill_missing(&scales)?;
    Ok(filled.iter().map(|s| -s.ln() / grid.ln_q()).collect())
}

/// Alternates subgrid maximum-likelihood scale shifts with the sample
/// covariance of the unwarped signal's wavelet transform, starting from the
/// local scale.
pub fn estimate_warping(y: &Signal, config: &EstimatorConfig) -> Result<DeformationEstimate> {
    config.validate()?;
    let p = &config.wavelet;
    let len = y.len();
    if p.a == 0 || len % p.a != 0 {
        return Err(Error::NotDivisor {
            name: "a",
            value: p.a,
            len,
        });
    }
    let wavelet = design_wavelet(p.degree, y.fs())?;
    let grid = ScaleGrid::voices(p.voices, p.a, 0, p.rows)?;
    let stride = match p.stride {
        Some(j) => j,
        None => choose_wavelet_stride(&wavelet, grid.q, p.voices as usize)?,
    };
    let window_len = stride * (p.window_len / stride.max(1));
    let max_shift = p.max_shift as i64;
    let layout = SubgridLayout {
        rows: p.rows,
        periodic: false,
        start: p.window_start,
        len: window_len,
        stride,
        direction: 1,
        shifts: (-max_shift..=max_shift).collect(),
    };
    layout.validate()?;
    let lattice = ScaleGrid::new(grid.q.powi(stride as i32), p.a, 0, layout.lattice_len())?;
    let unit = ShiftUnit::LogScale(grid.q);

    let observed = cwt(y, &wavelet, &grid)?;
    let (baseline, _) = anchor_shifts(&local_scale_shifts(&observed, p.window_start, window_len)?);

    let (delta, iterations, converged) = alternate(&baseline, config, |delta| {
        let g = integrate_deformation(delta, p.a, len, unit, config.periodic)?;
        let u = warped_wavelet_transform(y, &g.gamma, &wavelet, &lattice)?;
        let reference = sample_covariance_of_columns(&u.coeffs);
        search_frames(&layout, &observed.coeffs, &reference)
    })?;

    let integrated = integrate_deformation(&delta, p.a, len, unit, config.periodic)?;
    let noise_variance = match config.noise {
        NoiseVariance::Known(v) => v,
        NoiseVariance::Estimate => {
            let u = unwarp(y, &integrated.gamma)?;
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

/// Runs one subgrid search for every frame; returns anchored shifts and the
/// number of ridged candidates.
pub(crate) fn search_frames(
    layout: &SubgridLayout,
    observed: &DMatrix<num_complex::Complex64>,
    reference: &crate::covariance::HermitianCov,
) -> Result<(Vec<f64>, usize)> {
    let (choices, ridged) = subgrid_search(layout, observed, reference)?;
    let raw: Vec<f64> = choices.iter().map(|c| c.delta as f64).collect();
    Ok((anchor_shifts(&raw).0, ridged))
}

/// The shared outer loop: `step` maps the current shifts to new anchored
/// shifts. Stops when the relative change drops below epsilon; otherwise
/// returns the iterate with the smallest change.
pub(crate) fn alternate(
    initial: &[f64],
    config: &EstimatorConfig,
    mut step: impl FnMut(&[f64]) -> Result<(Vec<f64>, usize)>,
) -> Result<(Vec<f64>, Vec<Iteration>, bool)> {
    let mut current = initial.to_vec();
    let mut iterations: Vec<Iteration> = Vec::new();
    let mut best: Option<usize> = None;
    for _ in 0..config.max_iters {
        let (next, ridged) = step(&current)?;
        let criterion = relative_change(&current, &next);
        iterations.push(Iteration {
            delta: next.clone(),
            criterion,
            ridged,
        });
        let k = iterations.len() - 1;
        if best.is_none_or(|b| criterion < iterations[b].criterion) {
            best = Some(k);
        }
        current = next;
        if criterion < config.epsilon {
            return Ok((current, iterations, true));
        }
    }
    let b = best.expect("max_iters is at least one");
    Ok((iterations[b].delta.clone(), iterations, false))
}

