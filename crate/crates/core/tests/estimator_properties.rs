use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;
use tfdeform::covariance::{sample_covariance, HermitianCov};
use tfdeform::estimators::{
    anchor_shifts, demodulate, estimate_modulation, estimate_warping, ml_shift_search, subgrid_refine,
    welch_spectrum, EstimatorConfig, GaborParams, ShiftGrid, SubgridLayout, WaveletParams,
};
use tfdeform::gabor::{analytic_cov, dgt, noise_cov, shifted_cov, GaborFrame};
use tfdeform::rng::{circular_gaussian, rng_from_seed, SignalRng};
use tfdeform::{
    apply_modulation, synth_stationary, DeformationFunction, DeformationKind, NoiseSpec, PowerSpectrum,
    SpectralDensity,
};

fn draw(c: &DMatrix<Complex64>, rng: &mut SignalRng) -> Vec<Complex64> {
    let l = c.clone().cholesky().expect("positive definite").l();
    let xi = DMatrix::from_fn(c.nrows(), 1, |_, _| circular_gaussian(rng, 1.0));
    (l * xi).iter().copied().collect()
}

fn gabor_family(len: usize, b: usize) -> (PowerSpectrum, GaborFrame) {
    let frame = GaborFrame::gaussian(len, 8, b, 3.0).unwrap();
    let spectrum = PowerSpectrum::flat(len, len / 16, len / 8, 1.0).unwrap();
    (spectrum, frame)
}

fn cov_at(spectrum: &PowerSpectrum, frame: &GaborFrame, delta: f64) -> tfdeform::Result<HermitianCov> {
    HermitianCov::new(shifted_cov(spectrum, frame, 0.01, delta)?.combined())
}

proptest! {
    #[test]
    fn anchoring_is_idempotent(delta in prop::collection::vec(-50.0f64..50.0, 1..64)) {
        let (once, _) = anchor_shifts(&delta);
        let (twice, mean) = anchor_shifts(&once);
        prop_assert!(mean.abs() < 1e-9);
        for (a, b) in once.iter().zip(&twice) {
            prop_assert!((a - b).abs() < 1e-9);
        }
    }
}

#[test]
fn unshifted_slices_give_zero_as_the_mode() {
    let (spectrum, frame) = gabor_family(64, 8);
    let grid = ShiftGrid::new((-3..=4).map(|d| d as f64).collect()).unwrap();
    let truth = cov_at(&spectrum, &frame, 0.0).unwrap();
    let mut rng = rng_from_seed(1);
    let mut counts = std::collections::BTreeMap::new();
    for _ in 0..500 {
        let v = draw(truth.matrix(), &mut rng);
        let (d, _) = ml_shift_search(&v, |d| cov_at(&spectrum, &frame, d), &grid).unwrap();
        *counts.entry(d as i64).or_insert(0) += 1;
    }
    let mode = counts.iter().max_by_key(|(_, c)| **c).unwrap().0;
    assert_eq!(*mode, 0, "{counts:?}");
}

#[test]
fn likelihood_identifies_the_true_shift() {
    for (len, b, shift, lo, hi) in [(64usize, 8usize, 2.0, -3, 4), (128, 8, 5.0, -7, 8)] {
        let (spectrum, frame) = gabor_family(len, b);
        let grid = ShiftGrid::new((lo..=hi).map(|d| d as f64).collect()).unwrap();
        let truth = cov_at(&spectrum, &frame, shift).unwrap();
        let mut rng = rng_from_seed(2);
        let hits = (0..500)
            .filter(|_| {
                let v = draw(truth.matrix(), &mut rng);
                ml_shift_search(&v, |d| cov_at(&spectrum, &frame, d), &grid).unwrap().0 == shift
            })
            .count();
        assert!(hits >= 450, "M = {}: {hits}/500", frame.m_count());
    }
}

#[test]
fn winning_coset_carries_the_fine_offset() {
    // fine rows of a Gabor slice with one-bin channels; the observation is
    // the reference slice moved by three channels
    let len = 128;
    // long window, so the band edges are sharp across channels
    let frame = GaborFrame::gaussian(len, 8, 1, 32.0).unwrap();
    let spectrum = PowerSpectrum::flat(len, 30, 50, 1.0).unwrap();
    let reference = analytic_cov(&spectrum, &frame).unwrap() + noise_cov(&frame, 0.01);
    let layout = SubgridLayout {
        rows: len,
        periodic: true,
        start: 24,
        len: 32,
        stride: 4,
        direction: -1,
        shifts: (-8..=8).collect(),
    };
    let shift = 3i64;
    let expected = layout.coset_of(shift);
    let mut rng = rng_from_seed(3);
    let mut hits = 0;
    for _ in 0..200 {
        let z = draw(&reference, &mut rng);
        let observed: Vec<Complex64> = (0..len).map(|m| z[(m + len - shift as usize) % len]).collect();
        let choice = subgrid_refine(&observed, &layout, |d| {
            let rows: Vec<usize> = layout
                .coset_rows(layout.coset_of(d))
                .iter()
                .map(|&r| (r as i64 - d).rem_euclid(len as i64) as usize)
                .collect();
            HermitianCov::new(DMatrix::from_fn(rows.len(), rows.len(), |i, j| reference[(rows[i], rows[j])]))
        })
        .unwrap();
        hits += (choice.offset == expected) as usize;
    }
    assert!(hits >= 160, "{hits}/200");
}

#[test]
fn welch_recovers_a_known_spectrum_shape() {
    let len = 1024;
    let shape = |nu: f64| {
        let x = (nu - 0.15) / 0.08;
        if x.abs() < 1.0 { 0.5 + 0.5 * (PI * x).cos() } else { 0.0 }
    };
    let spectrum = PowerSpectrum::from_density(len, shape).unwrap();
    let reps = 1000;
    let segment = 128;
    let mut mean = vec![0.0; segment];
    for r in 0..reps {
        let x = synth_stationary(&spectrum, len, r).unwrap();
        let w = welch_spectrum(&x, segment, 0.5).unwrap();
        for (m, v) in mean.iter_mut().zip(w.density_values()) {
            *m += v / reps as f64;
        }
    }
    let (mut num, mut den) = (0.0, 0.0);
    for (k, m) in mean.iter().enumerate() {
        let nu = k as f64 / segment as f64;
        if (0.07..=0.23).contains(&nu) {
            let truth = spectrum.density(nu);
            num += (m - truth).powi(2);
            den += truth * truth;
        }
    }
    assert!((num / den).sqrt() <= 0.1, "{}", (num / den).sqrt());
}

fn small_warp_config() -> EstimatorConfig {
    EstimatorConfig {
        wavelet: WaveletParams {
            degree: 25,
            voices: 16,
            a: 32,
            rows: 96,
            window_start: 16,
            window_len: 64,
            max_shift: 16,
            stride: None,
        },
        ..Default::default()
    }
}

#[test]
fn stationary_input_gives_a_flat_warp() {
    let len = 4096;
    let spectrum = PowerSpectrum::flat(len, 160, 480, 1.0).unwrap();
    let x = synth_stationary(&spectrum, len, 8).unwrap();
    let est = estimate_warping(&x, &small_warp_config()).unwrap();
    let prime = est.prime_on_frames();
    let rms = (prime.iter().map(|g| (g - 1.0).powi(2)).sum::<f64>() / prime.len() as f64).sqrt();
    // one fine step of the scale grid is a 4.4% change of slope
    assert!(rms < 2f64.powf(1.0 / 16.0) - 1.0, "{rms}");
    assert!(est.gamma_hat.gamma_prime().iter().all(|g| *g > 0.0));
    assert!(est.iterations.len() <= 20);
}

#[test]
fn huge_epsilon_stops_after_one_pass_and_max_iters_is_respected() {
    let len = 2048;
    let x = synth_stationary(&PowerSpectrum::flat(len, 80, 240, 1.0).unwrap(), len, 4).unwrap();
    let mut cfg = small_warp_config();
    cfg.epsilon = 1e9;
    let est = estimate_warping(&x, &cfg).unwrap();
    assert_eq!(est.iterations.len(), 1);
    assert!(est.converged);
    cfg.epsilon = 1e-12;
    cfg.max_iters = 2;
    let est = estimate_warping(&x, &cfg).unwrap();
    assert!(est.iterations.len() <= 2);
}

fn small_modulation_config() -> EstimatorConfig {
    EstimatorConfig {
        gabor: GaborParams {
            a: 16,
            b_fine: 2,
            window_std: Some(16.0),
            stride: None,
            max_shift_bins: None,
        },
        ..Default::default()
    }
}

#[test]
fn stationary_input_gives_no_modulation() {
    let len = 2048;
    let spectrum = PowerSpectrum::flat(len, 200, 300, 1.0).unwrap();
    let x = synth_stationary(&spectrum, len, 5).unwrap();
    let y = apply_modulation(&x, &DeformationFunction::zero_modulation(len).unwrap(), NoiseSpec::new(0.001).unwrap(), 6)
        .unwrap();
    let est = estimate_modulation(&y, &small_modulation_config()).unwrap();
    let prime = est.prime_on_frames();
    let rms = (prime.iter().map(|g| g * g).sum::<f64>() / prime.len() as f64).sqrt();
    // the reference covariance is only known every b_fine * stride bins
    let quantum = 2.0 * est.stride as f64;
    assert!(rms <= quantum / 4.0, "{rms} vs lattice spacing {quantum}");
}

#[test]
fn demodulated_slices_follow_the_stationary_model() {
    let len = 2048;
    let l = len as f64;
    let amp = 60.0;
    let gamma = DeformationFunction::from_fn(
        len,
        DeformationKind::Modulation,
        |t| amp * l / (2.0 * PI) * (1.0 - (2.0 * PI * t / l).cos()),
        |t| amp * (2.0 * PI * t / l).sin(),
    )
    .unwrap();
    let spectrum = PowerSpectrum::flat(len, 200, 300, 1.0).unwrap();
    let sigma0 = 0.01;
    let cfg = small_modulation_config();
    let coarse = GaborFrame::gaussian(len, 16, 64, 16.0).unwrap();
    let mut slices = Vec::new();
    for r in 0..8 {
        let z = synth_stationary(&spectrum, len, 100 + r).unwrap();
        let y = apply_modulation(&z, &gamma, NoiseSpec::new(sigma0).unwrap(), 200 + r).unwrap();
        let est = estimate_modulation(&y, &cfg).unwrap();
        let u = demodulate(&y, &est.gamma_hat).unwrap();
        let t = dgt(&u, &coarse).unwrap();
        // frames two window widths apart are nearly independent
        for n in (0..t.n_count()).step_by(8) {
            slices.push(t.slice(n).to_vec());
        }
    }
    let count = slices.len() as f64;
    let sample = sample_covariance(slices.iter().map(|s| s.as_slice())).unwrap();
    let theory = shifted_cov(&spectrum, &coarse, sigma0, 0.0).unwrap().combined();
    for i in 0..theory.nrows() {
        for j in 0..theory.ncols() {
            let se = (theory[(i, i)].re * theory[(j, j)].re / count).sqrt();
            let diff = (sample.matrix()[(i, j)] - theory[(i, j)]).norm();
            assert!(diff <= 5.0 * se + 1e-9, "({i},{j}) {diff} vs {se}");
        }
    }
}
