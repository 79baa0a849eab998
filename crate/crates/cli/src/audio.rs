//! Warping estimation on recorded sound and its stationarization.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{bail, Context, Result};
use tfdeform::estimators::{estimate_warping, DeformationEstimate};
use tfdeform::rng::{derive_seed, rng_from_seed, real_gaussian};
use tfdeform::wavelet::{cwt, design_wavelet, local_scale, ScaleGrid};
use tfdeform::{
    apply_warp, invert_deformation, synth_stationary, DeformationFunction, DeformationKind, Interpolation, NoiseSpec,
    PowerSpectrum, Signal,
};

use crate::config::ExperimentConfig;
use crate::report::write_text;
use crate::sim::wavelet_stride;

/// First channel of a WAV file, scaled to `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct WavData {
    pub samples: Vec<f64>,
    pub fs: f64,
    pub channels: u16,
    /// Samples at integer full scale.
    pub clipped: usize,
}

pub fn read_wav(path: &Path) -> Result<WavData> {
    let mut reader = hound::WavReader::open(path).with_context(|| format!("opening {}", path.display()))?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    let (all, clipped): (Vec<f64>, usize) = match (spec.sample_format, spec.bits_per_sample) {
        (hound::SampleFormat::Float, 32) => {
            let v = reader.samples::<f32>().map(|s| s.map(f64::from)).collect::<Result<Vec<_>, _>>()?;
            let c = v.iter().filter(|x| x.abs() >= 1.0).count();
            (v, c)
        }
        (hound::SampleFormat::Int, bits @ (16 | 24)) => {
            let full = (1i64 << (bits - 1)) as f64;
            let raw = reader.samples::<i32>().collect::<Result<Vec<_>, _>>()?;
            let c = raw
                .iter()
                .filter(|&&s| s as f64 >= full - 1.0 || s as f64 <= -full)
                .count();
            (raw.iter().map(|&s| s as f64 / full).collect(), c)
        }
        (format, bits) => bail!("unsupported WAV sample format {format:?} with {bits} bits"),
    };
    let samples: Vec<f64> = all.into_iter().step_by(channels.max(1)).collect();
    if samples.is_empty() {
        bail!("{} has no samples", path.display());
    }
    Ok(WavData {
        samples,
        fs: spec.sample_rate as f64,
        channels: spec.channels,
        clipped,
    })
}

/// Mono 32-bit float WAV.
pub fn write_wav_f32(path: &Path, samples: &[f64], fs: f64) -> Result<()> {
    let spec = hound::WavSpec {
        channels: 1,
        sample_rate: fs.round() as u32,
        bits_per_sample: 32,
        sample_format: hound::SampleFormat::Float,
    };
    let mut w = hound::WavWriter::create(path, spec).with_context(|| format!("creating {}", path.display()))?;
    for &s in samples {
        w.write_sample(s as f32)?;
    }
    w.finalize()?;
    Ok(())
}

/// Built-in test sounds.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthSound {
    /// A steady 440 Hz tone.
    Tone,
    /// Band-limited noise sped up by a linear chirp warp.
    Chirp,
    /// Harmonic engine-like noise under the same accelerating warp.
    Engine,
}

impl FromStr for SynthSound {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "tone" => SynthSound::Tone,
            "chirp" => SynthSound::Chirp,
            "engine" => SynthSound::Engine,
            _ => bail!("unknown sound `{s}` (tone, chirp, engine)"),
        })
    }
}

impl SynthSound {
    pub fn name(self) -> &'static str {
        match self {
            SynthSound::Tone => "tone",
            SynthSound::Chirp => "chirp",
            SynthSound::Engine => "engine",
        }
    }
}

/// Test sounds keep their content below `fs / 8` after warping, inside the
/// default analysis rows.
pub const SYNTH_FS: f64 = 8000.0;
pub const SYNTH_LEN: usize = 1 << 15;

/// Accelerating warp on `0..len` with `gamma'` rising linearly from `2/3` to
/// `4/3` and `gamma(len - 1) = len - 1`.
pub fn linear_chirp_warp(len: usize) -> Result<DeformationFunction> {
    let end = (len - 1) as f64;
    let (s0, s1) = (2.0 / 3.0, 4.0 / 3.0);
    Ok(DeformationFunction::from_fn(
        len,
        DeformationKind::Warp,
        |t| s0 * t + (s1 - s0) * t * t / (2.0 * end),
        |t| s0 + (s1 - s0) * t / end,
    )?)
}

/// Real stationary noise with one-sided density `density` (in Hz at `fs`).
fn real_noise(len: usize, fs: f64, seed: u64, density: impl Fn(f64) -> f64) -> Result<Vec<f64>> {
    let spectrum = PowerSpectrum::from_density(len, |nu| density(nu * fs))?;
    let z = synth_stationary(&spectrum, len, seed)?;
    Ok(z.samples().iter().map(|c| c.re * 2f64.sqrt()).collect())
}

fn peak_normalize(x: &mut [f64], peak: f64) {
    let m = x.iter().fold(0.0f64, |a, v| a.max(v.abs()));
    if m > 0.0 {
        x.iter_mut().for_each(|v| *v *= peak / m);
    }
}

/// `SYNTH_LEN` samples at `SYNTH_FS`, peak 0.5.
pub fn synth_sound(kind: SynthSound, seed: u64) -> Result<Vec<f64>> {
    let len = SYNTH_LEN;
    let fs = SYNTH_FS;
    let mut out: Vec<f64> = match kind {
        SynthSound::Tone => {
            let mut rng = rng_from_seed(derive_seed(seed, 2));
            (0..len)
                .map(|t| (2.0 * std::f64::consts::PI * 440.0 * t as f64 / fs).sin() + 1e-3 * real_gaussian(&mut rng))
                .collect()
        }
        SynthSound::Chirp | SynthSound::Engine => {
            let source = if kind == SynthSound::Chirp {
                real_noise(len, fs, derive_seed(seed, 0), |f| if (100.0..=700.0).contains(&f) { 1.0 } else { 0.0 })?
            } else {
                // firing harmonics of 40 Hz with resonant widths, over a low
                // broadband rumble
                real_noise(len, fs, derive_seed(seed, 0), |f| {
                    let mut s = if (30.0..=700.0).contains(&f) { 0.02 } else { 0.0 };
                    for h in 1..=16 {
                        let fh = 40.0 * h as f64;
                        s += ((-(f - fh).powi(2)) / (2.0 * 4.0f64.powi(2))).exp() / h as f64;
                    }
                    s
                })?
            };
            let x = Signal::from_real(&source, fs)?;
            let gamma = linear_chirp_warp(len)?;
            let y = apply_warp(&x, &gamma, NoiseSpec::none(), 0, Interpolation::CubicSpline)?;
            let mut rng = rng_from_seed(derive_seed(seed, 1));
            let rms = (source.iter().map(|v| v * v).sum::<f64>() / len as f64).sqrt();
            y.samples().iter().map(|c| c.re + 0.01 * rms * real_gaussian(&mut rng)).collect()
        }
    };
    peak_normalize(&mut out, 0.5);
    Ok(out)
}

/// Smoothed log local scale over the interior frames: the per-frame local
/// scale averaged over blocks of `block` frames, with the outer tenth of
/// the blocks on each side dropped.
pub fn log_scale_profile(x: &Signal, config: &ExperimentConfig, degree: u32, block: usize) -> Result<Vec<f64>> {
    let wavelet = design_wavelet(degree, x.fs())?;
    let grid = ScaleGrid::voices(config.voices, config.hop, 0, config.rows)?;
    let t = cwt(x, &wavelet, &grid)?;
    let ln: Vec<f64> = local_scale(&t)?.into_iter().flatten().map(f64::ln).collect();
    let blocks: Vec<f64> = ln.chunks_exact(block).map(|c| c.iter().sum::<f64>() / block as f64).collect();
    let trim = (blocks.len() / 10).max(1).min(blocks.len().saturating_sub(2) / 2);
    Ok(blocks[trim..blocks.len() - trim].to_vec())
}

/// `exp(max - min) - 1` of a log profile: the relative spread of the scale.
pub fn spread(profile: &[f64]) -> f64 {
    let (lo, hi) = profile
        .iter()
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
    (hi - lo).exp() - 1.0
}

/// Relative change of the scale along the least-squares line through a log
/// profile, first block to last: `exp(|slope| (n - 1)) - 1`.
pub fn drift(profile: &[f64]) -> f64 {
    let n = profile.len() as f64;
    if n < 2.0 {
        return 0.0;
    }
    let tm = (n - 1.0) / 2.0;
    let ym = profile.iter().sum::<f64>() / n;
    let (mut sxy, mut sxx) = (0.0, 0.0);
    for (i, y) in profile.iter().enumerate() {
        let dt = i as f64 - tm;
        sxy += dt * (y - ym);
        sxx += dt * dt;
    }
    ((sxy / sxx).abs() * (n - 1.0)).exp() - 1.0
}

pub fn variance(v: &[f64]) -> f64 {
    let mean = v.iter().sum::<f64>() / v.len() as f64;
    v.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / v.len() as f64
}

/// Frames averaged per block of the local scale profile.
pub const PROFILE_BLOCK: usize = 64;

#[derive(Debug, Clone)]
pub struct AudioReport {
    pub files: Vec<PathBuf>,
    pub fs: f64,
    /// Samples analyzed after trimming to a multiple of the hop.
    pub len: usize,
    pub clipped: usize,
    pub estimate: DeformationEstimate,
    pub input: Vec<f64>,
    pub stationarized: Vec<f64>,
    pub input_profile: Vec<f64>,
    pub output_profile: Vec<f64>,
}

/// Estimates the warp of `input`, writes `<stem>_warp.csv` (per-sample
/// `gamma`, `gamma'`), `<stem>_stationarized.wav` and a report into the
/// output directory.
pub fn run_audio(input: &Path, config: &ExperimentConfig) -> Result<AudioReport> {
    config.validate()?;
    let wav = read_wav(input)?;
    let len = wav.samples.len() - wav.samples.len() % config.hop;
    if len < 2 * config.hop {
        bail!("{} is shorter than two frames", input.display());
    }
    let samples = wav.samples[..len].to_vec();
    let y = Signal::from_real(&samples, wav.fs)?;
    let k = config.wavelet_degrees[0];
    let mut est_cfg = config.estimator(k, false);
    est_cfg.wavelet.stride = Some(wavelet_stride(config, k)?);
    let estimate = estimate_warping(&y, &est_cfg).context("warping estimate")?;
    let inverse = invert_deformation(&estimate.gamma_hat)?;
    let mut stationarized: Vec<f64> = apply_warp(&y, &inverse, NoiseSpec::none(), 0, Interpolation::CubicSpline)?
        .samples()
        .iter()
        .map(|c| c.re)
        .collect();
    peak_normalize(&mut stationarized, 1.0);
    let input_profile = log_scale_profile(&y, config, k, PROFILE_BLOCK)?;
    let output_profile = log_scale_profile(&Signal::from_real(&stationarized, wav.fs)?, config, k, PROFILE_BLOCK)?;

    let dir = &config.out;
    std::fs::create_dir_all(dir)?;
    let stem = input.file_stem().and_then(|s| s.to_str()).unwrap_or("audio");
    let csv_path = dir.join(format!("{stem}_warp.csv"));
    let mut w = csv::Writer::from_path(&csv_path)?;
    w.write_record(["t", "gamma", "gamma_prime"])?;
    for (t, (g, d)) in estimate.gamma_hat.gamma().iter().zip(estimate.gamma_hat.gamma_prime()).enumerate() {
        w.write_record([t.to_string(), g.to_string(), d.to_string()])?;
    }
    w.flush()?;
    let wav_path = dir.join(format!("{stem}_stationarized.wav"));
    write_wav_f32(&wav_path, &stationarized, wav.fs)?;
    let mut text = format!("# tfdeform {} audio\n", crate::VERSION);
    text.push_str(&config.to_text());
    text.push_str(&format!(
        "# input {}\n# fs {}\n# channels {}\n# samples {} (analyzed {len})\n# clipped_samples {}\n# iterations {}\n# converged {}\n# stride {}\n# log_scale_variance_in {}\n# log_scale_variance_out {}\n# scale_spread_in {}\n# scale_spread_out {}\n# scale_drift_in {}\n# scale_drift_out {}\n",
        input.display(),
        wav.fs,
        wav.channels,
        wav.samples.len(),
        wav.clipped,
        estimate.iterations.len(),
        estimate.converged,
        estimate.stride,
        variance(&input_profile),
        variance(&output_profile),
        spread(&input_profile),
        spread(&output_profile),
        drift(&input_profile),
        drift(&output_profile),
    ));
    if wav.clipped > 0 {
        text.push_str(&format!("# warning: {} samples at full scale; the input may be clipped\n", wav.clipped));
    }
    let report_path = write_text(dir, &format!("{stem}_report.txt"), &text)?;
    Ok(AudioReport {
        files: vec![csv_path, wav_path, report_path],
        fs: wav.fs,
        len,
        clipped: wav.clipped,
        estimate,
        input: samples,
        stationarized,
        input_profile,
        output_profile,
    })
}
