//! One or more seeded sine-warp trials, printing proposed and local-scale
//! errors. Used to pick the simulation parameters of the harness.
//!
//! usage: warp_trial [k] [period divisor] [amplitude] [band lo] [band hi] [hop] [runs]

use std::f64::consts::PI;
use std::time::Instant;

use tfdeform::estimators::{estimate_warping, normalized_error, EstimatorConfig};
use tfdeform::{apply_warp, synth_stationary, DeformationFunction, DeformationKind, Interpolation, NoiseSpec, PowerSpectrum};

fn main() {
    let args: Vec<f64> = std::env::args().skip(1).map(|a| a.parse().unwrap()).collect();
    let get = |i: usize, d: f64| args.get(i).copied().unwrap_or(d);
    let (k, p, amp, lo, hi, hop, runs) = (
        get(0, 70.0) as u32,
        get(1, 1.0),
        get(2, 0.3),
        get(3, 0.02),
        get(4, 0.045),
        get(5, 64.0) as usize,
        get(6, 4.0) as usize,
    );
    let len = 1 << 14;
    let l = len as f64;
    // lo = 0 selects a resonance at 1/32 with quality factor hi
    let spectrum = if lo == 0.0 {
        let nc = 1.0 / 32.0;
        let raw = PowerSpectrum::from_density(len, |nu: f64| 1.0 / (1.0 + hi * hi * (nu / nc - nc / nu).powi(2))).unwrap();
        let v = raw.variance();
        PowerSpectrum::new(raw.values().iter().map(|s| s / v).collect()).unwrap()
    } else {
        let e = get(7, 0.0);
        let raw = PowerSpectrum::from_density(len, |nu: f64| if nu >= lo && nu <= hi { nu.powf(-e) } else { 0.0 }).unwrap();
        let v = raw.variance();
        PowerSpectrum::new(raw.values().iter().map(|s| s / v).collect()).unwrap()
    };
    let c = amp * l / (2.0 * PI * p);
    let gamma = DeformationFunction::from_fn(
        len,
        DeformationKind::Warp,
        |t| t + c - c * (2.0 * PI * p * t / l).cos(),
        |t| 1.0 + amp * (2.0 * PI * p * t / l).sin(),
    )
    .unwrap()
    .with_wrap(l);
    let mut cfg = EstimatorConfig::default();
    cfg.wavelet.degree = k;
    cfg.wavelet.a = hop;
    let env = |k: &str, d: usize| std::env::var(k).ok().map(|v| v.parse().unwrap()).unwrap_or(d);
    cfg.wavelet.rows = env("ROWS", cfg.wavelet.rows);
    cfg.wavelet.window_start = env("WSTART", cfg.wavelet.window_start);
    cfg.wavelet.window_len = env("WLEN", cfg.wavelet.window_len);
    let t0 = Instant::now();
    let stride = tfdeform::estimators::choose_wavelet_stride(
        &tfdeform::wavelet::design_wavelet(k, 1.0).unwrap(),
        2f64.powf(1.0 / 70.0),
        70,
    )
    .unwrap();
    println!("stride {stride} in {:?}", t0.elapsed());
    cfg.wavelet.stride = Some(stride);
    let (mut ep, mut eb) = (0.0, 0.0);
    for r in 0..runs {
        let t0 = Instant::now();
        let x = synth_stationary(&spectrum, len, 1000 + r as u64).unwrap();
        let noise = NoiseSpec::from_snr_db(spectrum.variance(), 20.0).unwrap();
        let y = apply_warp(&x, &gamma, noise, 2000 + r as u64, Interpolation::BandLimited).unwrap();
        let est = estimate_warping(&y, &cfg).unwrap();
        let truth: Vec<f64> = gamma.gamma_prime().iter().step_by(hop).copied().collect();
        let e1 = normalized_error(&truth, &est.prime_on_frames(), DeformationKind::Warp).unwrap();
        let e0 = normalized_error(&truth, &est.baseline_prime, DeformationKind::Warp).unwrap();
        let q = 2f64.powf(1.0 / 70.0);
        let per_iter: Vec<f64> = est
            .iterations
            .iter()
            .map(|it| {
                let g: Vec<f64> = it.delta.iter().map(|d| q.powf(*d)).collect();
                (normalized_error(&truth, &g, DeformationKind::Warp).unwrap() * 1000.0).round() / 1000.0
            })
            .collect();
        if std::env::var("VERBOSE").is_ok() {
            println!("  per-iteration errors {per_iter:?}");
            let d0: Vec<String> = est.baseline_delta.iter().step_by(8).map(|d| format!("{d:.0}")).collect();
            let d1: Vec<String> = est.delta.iter().step_by(8).map(|d| format!("{d:.0}")).collect();
            let tr: Vec<String> = truth.iter().step_by(8).map(|g| format!("{:.0}", g.ln() / q.ln())).collect();
            println!("  truth    {}\n  baseline {}\n  proposed {}", tr.join(" "), d0.join(" "), d1.join(" "));
        }
        ep += e1;
        eb += e0;
        println!(
            "run {r}: proposed {e1:.3} baseline {e0:.3} iters {} conv {} crit {:?} {:?}",
            est.iterations.len(),
            est.converged,
            est.iterations.iter().map(|i| (i.criterion * 1000.0).round() / 1000.0).collect::<Vec<_>>(),
            t0.elapsed()
        );
    }
    println!("mean proposed {:.3} baseline {:.3}", ep / runs as f64, eb / runs as f64);
}
