//! Seeded sine-modulation trials, printing proposed and local-frequency
//! errors.
//!
//! usage: modulation_trial [amplitude bins] [band lo] [band hi] [runs]

use std::f64::consts::PI;
use std::time::Instant;

use tfdeform::estimators::{estimate_modulation, normalized_error, EstimatorConfig};
use tfdeform::{apply_modulation, synth_stationary, DeformationFunction, DeformationKind, NoiseSpec, PowerSpectrum};

fn main() {
    let args: Vec<f64> = std::env::args().skip(1).map(|a| a.parse().unwrap()).collect();
    let get = |i: usize, d: f64| args.get(i).copied().unwrap_or(d);
    let (amp, lo, hi, runs) = (get(0, 200.0), get(1, 0.1), get(2, 0.15), get(3, 4.0) as usize);
    let len = 8192;
    let l = len as f64;
    let spectrum = PowerSpectrum::flat(len, (lo * l) as usize, (hi * l) as usize, 1.0).unwrap();
    let gamma = DeformationFunction::from_fn(
        len,
        DeformationKind::Modulation,
        |t| amp * l / (2.0 * PI) * (1.0 - (2.0 * PI * t / l).cos()),
        |t| amp * (2.0 * PI * t / l).sin(),
    )
    .unwrap();
    let cfg = EstimatorConfig::default();
    let (mut ep, mut eb, mut wins) = (0.0, 0.0, 0);
    for r in 0..runs {
        let t0 = Instant::now();
        let z = synth_stationary(&spectrum, len, 1000 + r as u64).unwrap();
        let noise = NoiseSpec::from_snr_db(spectrum.variance(), 20.0).unwrap();
        let y = apply_modulation(&z, &gamma, noise, 2000 + r as u64).unwrap();
        let est = estimate_modulation(&y, &cfg).unwrap();
        let truth: Vec<f64> = gamma.gamma_prime().iter().step_by(est.hop).copied().collect();
        let e1 = normalized_error(&truth, &est.prime_on_frames(), DeformationKind::Modulation).unwrap();
        let e0 = normalized_error(&truth, &est.baseline_prime, DeformationKind::Modulation).unwrap();
        ep += e1;
        eb += e0;
        wins += (e1 < e0) as usize;
        println!(
            "run {r}: proposed {e1:.3} baseline {e0:.3} stride {} iters {} conv {} {:?}",
            est.stride,
            est.iterations.len(),
            est.converged,
            t0.elapsed()
        );
    }
    println!("mean proposed {:.3} baseline {:.3} wins {wins}/{runs}", ep / runs as f64, eb / runs as f64);
}
