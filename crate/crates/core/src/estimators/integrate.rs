//! From per-frame shifts to a deformation function on the signal grid, and
//! the error measure used to compare estimates with the truth.

use crate::error::{check_finite_real, Error, Result};
use crate::interp::{CubicSpline, PeriodicSpline};
use crate::signal::{DeformationFunction, DeformationKind};

/// Meaning of one unit of shift.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ShiftUnit {
    /// Frequency shift of this many DFT bins (modulation).
    Bins(f64),
    /// Scale shift by this ratio (warping): `gamma' = q^delta`.
    LogScale(f64),
}

impl ShiftUnit {
    pub fn kind(self) -> DeformationKind {
        match self {
            ShiftUnit::Bins(_) => DeformationKind::Modulation,
            ShiftUnit::LogScale(_) => DeformationKind::Warp,
        }
    }

    /// Derivative of the deformation implied by a shift.
    pub fn slope(self, delta: f64) -> f64 {
        match self {
            ShiftUnit::Bins(b) => delta * b,
            ShiftUnit::LogScale(q) => q.powf(delta),
        }
    }
}

/// Affine normalization applied to an estimate.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Anchor {
    /// Mean removed from the per-frame shifts.
    pub removed_mean: f64,
    /// Factor applied to a periodic warp so that `gamma(L) = L`.
    pub rescale: f64,
}

/// Subtracts the mean; returns the anchored shifts and the mean.
pub fn anchor_shifts(delta: &[f64]) -> (Vec<f64>, f64) {
    let mean = delta.iter().sum::<f64>() / delta.len().max(1) as f64;
    (delta.iter().map(|d| d - mean).collect(), mean)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Integrated {
    pub gamma: DeformationFunction,
    pub anchor: Anchor,
    /// Samples whose slope was raised to the monotonicity floor.
    pub floored: usize,
}

/// Integrates per-frame shifts `delta[n]` (frames at `t = n * hop`) into a
/// deformation on `0..len` with `gamma(0) = 0`.
///
/// The shifts are anchored to zero mean and interpolated by a cubic spline
/// (periodic when `periodic`). Warps get `gamma' = q^delta`, floored at a
/// tenth of its median, and periodic warps are rescaled so that
/// `gamma(t + L) = gamma(t) + L`.
pub fn integrate_deformation(
    delta: &[f64],
    hop: usize,
    len: usize,
    unit: ShiftUnit,
    periodic: bool,
) -> Result<Integrated> {
    if delta.is_empty() {
        return Err(Error::Empty("shift sequence"));
    }
    if hop == 0 || len < 2 {
        return Err(Error::InvalidParameter(format!("hop {hop}, length {len}")));
    }
    check_finite_real(delta)?;
    let (anchored, mean) = anchor_shifts(delta);
    let sampled: Vec<f64> = if anchored.len() == 1 {
        vec![anchored[0]; len]
    } else if periodic {
        let s = PeriodicSpline::new(0.0, hop as f64, &anchored);
        (0..len).map(|t| s.eval(t as f64)).collect()
    } else {
        let s = CubicSpline::natural(&anchored);
        (0..len).map(|t| s.eval(t as f64 / hop as f64)).collect()
    };
    let mut slope: Vec<f64> = sampled.iter().map(|&d| unit.slope(d)).collect();
    let mut floored = 0;
    if let ShiftUnit::LogScale(_) = unit {
        let mut sorted = slope.clone();
        sorted.sort_by(f64::total_cmp);
        let floor = 0.1 * sorted[sorted.len() / 2];
        for s in &mut slope {
            if *s < floor {
                *s = floor;
                floored += 1;
            }
        }
    }
    let mut gamma = Vec::with_capacity(len);
    let mut acc = 0.0;
    gamma.push(0.0);
    for t in 1..len {
        acc += 0.5 * (slope[t - 1] + slope[t]);
        gamma.push(acc);
    }
    let mut anchor = Anchor {
        removed_mean: mean,
        rescale: 1.0,
    };
    let kind = unit.kind();
    let mut wrap = None;
    if periodic {
        let total = acc + 0.5 * (slope[len - 1] + slope[0]);
        wrap = Some(match kind {
            DeformationKind::Warp => len as f64,
            DeformationKind::Modulation => total,
        });
        if kind == DeformationKind::Warp {
            anchor.rescale = len as f64 / total;
        }
    } else if kind == DeformationKind::Warp {
        // keep the endpoints fixed so that the inverse maps the signal
        // support onto itself
        anchor.rescale = (len - 1) as f64 / acc;
    }
    if anchor.rescale != 1.0 {
        let c = anchor.rescale;
        gamma.iter_mut().for_each(|g| *g *= c);
        slope.iter_mut().for_each(|s| *s *= c);
    }
    let mut out = DeformationFunction::new(gamma, slope, kind)?;
    if let Some(p) = wrap {
        out = out.with_wrap(p);
    }
    Ok(Integrated {
        gamma: out,
        anchor,
        floored,
    })
}

/// `|gamma' - c gamma~'| / |gamma'|` after the best alignment allowed by
/// the indeterminacy of `kind`: a scale factor `c` for warps, an additive
/// constant for modulations.
pub fn normalized_error(truth: &[f64], estimate: &[f64], kind: DeformationKind) -> Result<f64> {
    if truth.len() != estimate.len() {
        return Err(Error::LengthMismatch {
            expected: truth.len(),
            found: estimate.len(),
        });
    }
    check_finite_real(truth)?;
    check_finite_real(estimate)?;
    let norm = truth.iter().map(|v| v * v).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::InvalidParameter("truth has zero norm".into()));
    }
    let residual: f64 = match kind {
        DeformationKind::Warp => {
            let dot: f64 = truth.iter().zip(estimate).map(|(a, b)| a * b).sum();
            let est_sq: f64 = estimate.iter().map(|v| v * v).sum();
            let c = if est_sq > 0.0 { dot / est_sq } else { 0.0 };
            truth
                .iter()
                .zip(estimate)
                .map(|(a, b)| (a - c * b).powi(2))
                .sum()
        }
        DeformationKind::Modulation => {
            let n = truth.len() as f64;
            let shift = (truth.iter().sum::<f64>() - estimate.iter().sum::<f64>()) / n;
            truth
                .iter()
                .zip(estimate)
                .map(|(a, b)| (a - b - shift).powi(2))
                .sum()
        }
    };
    Ok(residual.sqrt() / norm)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn zero_shifts_give_identity_and_zero() {
        let w = integrate_deformation(&[0.0; 16], 8, 128, ShiftUnit::LogScale(2f64.powf(1.0 / 70.0)), true)
            .unwrap();
        for (t, g) in w.gamma.gamma().iter().enumerate() {
            assert!((g - t as f64).abs() < 1e-12);
        }
        let m = integrate_deformation(&[0.0; 16], 8, 128, ShiftUnit::Bins(2.0), false).unwrap();
        assert!(m.gamma.gamma().iter().all(|g| *g == 0.0));
    }

    #[test]
    fn sine_warp_round_trip() {
        let (len, hop) = (4096, 16);
        let q = 2f64.powf(1.0 / 70.0);
        let truth = |t: f64| 1.0 + 0.3 * (2.0 * PI * t / len as f64).sin();
        let delta: Vec<f64> = (0..len / hop)
            .map(|n| truth((n * hop) as f64).ln() / q.ln())
            .collect();
        let w = integrate_deformation(&delta, hop, len, ShiftUnit::LogScale(q), true).unwrap();
        // compare slopes after multiplicative alignment
        let t: Vec<f64> = (0..len).map(|t| truth(t as f64)).collect();
        let err = normalized_error(&t, w.gamma.gamma_prime(), DeformationKind::Warp).unwrap();
        assert!(err < 0.01, "{err}");
        assert_eq!(w.floored, 0);
        assert!((w.gamma.gamma()[len - 1] + w.gamma.gamma_prime()[len - 1] * 0.5 - len as f64).abs() < 1.0);
    }

    #[test]
    fn piecewise_constant_modulation_is_piecewise_affine() {
        let delta = [1.0, 1.0, 1.0, 1.0, -1.0, -1.0, -1.0, -1.0];
        let m = integrate_deformation(&delta, 1, 8, ShiftUnit::Bins(3.0), false).unwrap();
        // anchored mean is already zero; slopes at the frames are +-3 bins
        assert!((m.gamma.gamma_prime()[0] - 3.0).abs() < 0.5);
        assert!((m.gamma.gamma_prime()[7] + 3.0).abs() < 0.5);
        assert_eq!(m.anchor.removed_mean, 0.0);
    }

    #[test]
    fn anchoring_is_idempotent() {
        let (a, _) = anchor_shifts(&[1.0, 2.0, 6.0]);
        let (b, mean) = anchor_shifts(&a);
        assert!(mean.abs() < 1e-15);
        assert_eq!(a, b);
    }

    #[test]
    fn error_examples() {
        let truth: Vec<f64> = (0..64).map(|t| 1.0 + 0.3 * (t as f64 / 10.0).sin()).collect();
        assert_eq!(normalized_error(&truth, &truth, DeformationKind::Warp).unwrap(), 0.0);
        let scaled: Vec<f64> = truth.iter().map(|v| 2.5 * v).collect();
        assert!(normalized_error(&truth, &scaled, DeformationKind::Warp).unwrap() < 1e-14);

        // zero-mean truth with an orthogonal zero-mean perturbation
        let n = 64;
        let truth: Vec<f64> = (0..n).map(|t| (2.0 * PI * t as f64 / n as f64).sin()).collect();
        let norm = (n as f64 / 2.0).sqrt();
        let perturbation: Vec<f64> = (0..n)
            .map(|t| 0.2 * norm * (2.0 * PI * 3.0 * t as f64 / n as f64).cos() / norm)
            .collect();
        let est: Vec<f64> = truth.iter().zip(&perturbation).map(|(a, b)| a + b).collect();
        let err = normalized_error(&truth, &est, DeformationKind::Modulation).unwrap();
        assert!((err - 0.2).abs() < 1e-12, "{err}");
        assert!(normalized_error(&[0.0; 4], &[1.0; 4], DeformationKind::Warp).is_err());
    }
}
