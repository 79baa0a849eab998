//! Estimates the warp of a built-in test sound (or of simulation 1 with
//! `sine`) and compares it with the warp used to make it. With
//! `PROFILE=file.wav`, also prints local scale flatness measures of a file.
//!
//! usage: audio_check [tone|chirp|engine|sine] [seed]

use tfdeform::estimators::{estimate_warping, normalized_error};
use tfdeform::{DeformationKind, Signal};
use tfdeform_cli::audio::{drift, linear_chirp_warp, log_scale_profile, read_wav, spread, synth_sound, variance};
use tfdeform_cli::audio::{SYNTH_FS, SYNTH_LEN};
use tfdeform_cli::sim::{warp_realization, wavelet_stride};
use tfdeform_cli::ExperimentConfig;

fn main() -> anyhow::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let name = args.first().map_or("chirp", String::as_str);
    let seed = args.get(1).map_or(Ok(1), |s| s.parse())?;
    let cfg = ExperimentConfig::default();
    let (y, truth, periodic) = if name == "sine" {
        let r = warp_realization(&cfg, 1, seed)?;
        (r.observed, r.truth, true)
    } else {
        let x = synth_sound(name.parse()?, seed)?;
        (Signal::from_real(&x, SYNTH_FS)?, linear_chirp_warp(SYNTH_LEN)?, false)
    };
    let mut est_cfg = cfg.estimator(70, periodic);
    est_cfg.wavelet.stride = Some(wavelet_stride(&cfg, 70)?);
    let est = estimate_warping(&y, &est_cfg)?;
    let on_frames: Vec<f64> = truth.gamma_prime().iter().step_by(est.hop).copied().collect();
    let q = 2f64.powf(1.0 / cfg.voices as f64);
    for it in &est.iterations {
        let g: Vec<f64> = it.delta.iter().map(|d| q.powf(*d)).collect();
        println!("criterion {:.3} error {:.3}", it.criterion, normalized_error(&on_frames, &g, DeformationKind::Warp)?);
    }
    println!(
        "proposed {:.3} baseline {:.3}",
        normalized_error(&on_frames, &est.prime_on_frames(), DeformationKind::Warp)?,
        normalized_error(&on_frames, &est.baseline_prime, DeformationKind::Warp)?
    );
    let show = |v: &[f64]| v.iter().step_by(32).map(|d| format!("{d:.0}")).collect::<Vec<_>>().join(" ");
    let truth_delta: Vec<f64> = on_frames.iter().map(|g| g.ln() / q.ln()).collect();
    println!("truth    {}\nbaseline {}\nproposed {}", show(&truth_delta), show(&est.baseline_delta), show(&est.delta));
    if let Ok(path) = std::env::var("PROFILE") {
        let wav = read_wav(std::path::Path::new(&path))?;
        let x = Signal::from_real(&wav.samples, wav.fs)?;
        for block in [16, 32, 64] {
            let p = log_scale_profile(&x, &cfg, 70, block)?;
            println!("block {block} variance {:.4} drift {:.3} spread {:.3}", variance(&p), drift(&p), spread(&p));
        }
    }
    Ok(())
}
