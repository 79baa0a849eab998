//! Single seeded runs exported as plot-ready CSV.

use std::path::{Path, PathBuf};

use anyhow::{bail, Result};
use tfdeform::estimators::{integrate_deformation, DeformationEstimate, ShiftUnit};
use tfdeform::gabor::{dgt, GaborFrame};
use tfdeform::wavelet::{cwt, design_wavelet, ScaleGrid};
use tfdeform::DeformationFunction;

use crate::config::{ExperimentConfig, Scenario};
use crate::report::write_text;
use crate::sim::{modulation_trial, run_seed, warp_trial, wavelet_stride, TrialErrors};

/// At most this many transform rows are exported.
const MAX_EXPORT_ROWS: usize = 512;

#[derive(Debug, Clone)]
pub struct DemoReport {
    pub scenario: Scenario,
    pub files: Vec<PathBuf>,
    pub errors: TrialErrors,
    pub frames: usize,
    pub stride: usize,
}

/// A curve sampled on the frame grid.
pub struct Curve {
    pub gamma: Vec<f64>,
    pub gamma_prime: Vec<f64>,
}

impl Curve {
    fn on_frames(d: &DeformationFunction, hop: usize) -> Self {
        Self {
            gamma: d.gamma().iter().step_by(hop).copied().collect(),
            gamma_prime: d.gamma_prime().iter().step_by(hop).copied().collect(),
        }
    }
}

/// Frame-grid curves of one run: truth, local frequency or scale
/// baseline, and the proposed estimate.
pub struct DemoCurves {
    pub hop: usize,
    pub truth: Curve,
    pub baseline: Curve,
    pub proposed: Curve,
}

pub fn demo_curves(truth: &DeformationFunction, est: &DeformationEstimate, unit: ShiftUnit, periodic: bool) -> Result<DemoCurves> {
    let baseline = integrate_deformation(&est.baseline_delta, est.hop, truth.len(), unit, periodic)?;
    Ok(DemoCurves {
        hop: est.hop,
        truth: Curve::on_frames(truth, est.hop),
        baseline: Curve::on_frames(&baseline.gamma, est.hop),
        proposed: Curve::on_frames(&est.gamma_hat, est.hop),
    })
}

fn curve_csv(path: &Path, hop: usize, curve: &Curve) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["n", "t", "gamma", "gamma_prime"])?;
    for (n, (g, d)) in curve.gamma.iter().zip(&curve.gamma_prime).enumerate() {
        w.write_record([n.to_string(), (n * hop).to_string(), g.to_string(), d.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

/// `|coefficient|` per frame; one column per exported row.
fn grid_csv(path: &Path, hop: usize, labels: &[String], rows: &[usize], magnitude: impl Fn(usize, usize) -> f64, frames: usize) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["n".to_string(), "t".to_string()];
    header.extend(rows.iter().map(|&m| labels[m].clone()));
    w.write_record(&header)?;
    for n in 0..frames {
        let mut rec = vec![n.to_string(), (n * hop).to_string()];
        rec.extend(rows.iter().map(|&m| magnitude(m, n).to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

fn exported_rows(count: usize) -> Vec<usize> {
    (0..count).step_by(count.div_ceil(MAX_EXPORT_ROWS)).collect()
}

/// Runs one realization of the demo scenario and writes
/// `<scenario>_{transform,truth,baseline,proposed}.csv` and a report.
pub fn run_demo(config: &ExperimentConfig) -> Result<DemoReport> {
    config.validate()?;
    let seed = run_seed(config.seed, 0);
    let dir = &config.out;
    std::fs::create_dir_all(dir)?;
    let prefix = config.scenario.name().replace('-', "_");
    let path = |what: &str| dir.join(format!("{prefix}_{what}.csv"));
    let (errors, est, curves, transform_path) = match config.scenario {
        Scenario::WarpDemo => {
            let (sim, k) = (config.sims[0], config.wavelet_degrees[0]);
            let stride = wavelet_stride(config, k)?;
            let (errors, est, r) = warp_trial(config, sim, k, stride, seed)?;
            let q = 2f64.powf(1.0 / config.voices as f64);
            let curves = demo_curves(&r.truth, &est, ShiftUnit::LogScale(q), true)?;
            let wavelet = design_wavelet(k, r.observed.fs())?;
            let grid = ScaleGrid::voices(config.voices, config.hop, 0, config.rows)?;
            let t = cwt(&r.observed, &wavelet, &grid)?;
            let labels: Vec<String> = (0..config.rows).map(|m| format!("scale_row_{m}")).collect();
            let p = path("transform");
            grid_csv(&p, config.hop, &labels, &exported_rows(config.rows), |m, n| t.coeffs[(m, n)].norm(), t.n_count())?;
            (errors, est, curves, p)
        }
        Scenario::ModulationDemo => {
            let (errors, est, r) = modulation_trial(config, seed)?;
            let curves = demo_curves(&r.truth, &est, ShiftUnit::Bins(config.gabor_b as f64), true)?;
            let std = config.gabor_window_std.unwrap_or(config.gabor_a as f64);
            let frame = GaborFrame::gaussian(config.mod_len, config.gabor_a, config.gabor_b, std)?;
            let t = dgt(&r.observed, &frame)?;
            let labels: Vec<String> = (0..frame.m_count()).map(|m| format!("bin_{}", m * config.gabor_b)).collect();
            let p = path("transform");
            grid_csv(&p, config.gabor_a, &labels, &exported_rows(frame.m_count()), |m, n| t.coeffs[(m, n)].norm(), t.n_count())?;
            (errors, est, curves, p)
        }
        other => bail!("`{other}` is not a demo scenario"),
    };
    let mut files = vec![transform_path];
    for (name, curve) in [("truth", &curves.truth), ("baseline", &curves.baseline), ("proposed", &curves.proposed)] {
        let p = path(name);
        curve_csv(&p, curves.hop, curve)?;
        files.push(p);
    }
    let mut text = format!("# tfdeform {} {}\n", crate::VERSION, config.scenario);
    text.push_str(&config.to_text());
    text.push_str(&format!(
        "# seed {seed}\n# err_proposed {}\n# err_baseline {}\n# iterations {}\n# converged {}\n# stride {}\n# noise_variance {}\n",
        errors.proposed, errors.baseline, errors.iterations, errors.converged, est.stride, est.noise_variance
    ));
    files.push(write_text(dir, &format!("{prefix}_report.txt"), &text)?);
    Ok(DemoReport {
        scenario: config.scenario,
        files,
        errors,
        frames: curves.truth.gamma.len(),
        stride: est.stride,
    })
}
