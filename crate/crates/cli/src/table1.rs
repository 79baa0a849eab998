//! The simulation study: seeded sine-warp realizations for every requested
//! (simulation, wavelet degree) cell.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Result};
use rayon::prelude::*;

use crate::config::{ExperimentConfig, Scenario};
use crate::report::{write_text, Summary};
use crate::sim::{run_seed, warp_trial, wavelet_stride};

/// Outcome of one realization. `errors` is `None` when estimation failed,
/// with the message in `failure`.
#[derive(Debug, Clone, PartialEq)]
pub struct RunRecord {
    pub run: usize,
    pub seed: u64,
    pub sim: u32,
    pub k: u32,
    pub err_proposed: f64,
    pub err_baseline: f64,
    pub iters: usize,
    pub converged: bool,
    pub failure: Option<String>,
}

/// Aggregates of one cell over the successful runs.
#[derive(Debug, Clone, PartialEq)]
pub struct CellSummary {
    pub sim: u32,
    pub k: u32,
    pub stride: usize,
    pub proposed: Summary,
    pub baseline: Summary,
    pub iters: Summary,
    pub converged: usize,
    pub failed: usize,
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub config: ExperimentConfig,
    pub version: &'static str,
    pub runs: Vec<RunRecord>,
    pub cells: Vec<CellSummary>,
    pub seconds: f64,
}

pub const TABLE1_HEADER: [&str; 7] = ["run", "seed", "sim", "k", "err_proposed", "err_baseline", "iters"];

/// Runs every requested cell. Estimator failures are recorded per run.
pub fn run_table1(config: &ExperimentConfig) -> Result<RunReport> {
    if config.scenario != Scenario::Table1 {
        bail!("scenario is `{}`, not `table1`", config.scenario);
    }
    config.validate()?;
    let start = Instant::now();
    let mut runs = Vec::new();
    let mut cells = Vec::new();
    for &k in &config.wavelet_degrees {
        let stride = wavelet_stride(config, k)?;
        for &sim in &config.sims {
            let records: Vec<RunRecord> = (0..config.runs)
                .into_par_iter()
                .map(|run| {
                    let seed = run_seed(config.seed, run);
                    match warp_trial(config, sim, k, stride, seed) {
                        Ok((e, _, _)) => RunRecord {
                            run,
                            seed,
                            sim,
                            k,
                            err_proposed: e.proposed,
                            err_baseline: e.baseline,
                            iters: e.iterations,
                            converged: e.converged,
                            failure: None,
                        },
                        Err(err) => RunRecord {
                            run,
                            seed,
                            sim,
                            k,
                            err_proposed: f64::NAN,
                            err_baseline: f64::NAN,
                            iters: 0,
                            converged: false,
                            failure: Some(format!("{err:#}")),
                        },
                    }
                })
                .collect();
            cells.push(summarize(sim, k, stride, &records));
            runs.extend(records);
        }
    }
    Ok(RunReport {
        config: config.clone(),
        version: crate::VERSION,
        runs,
        cells,
        seconds: start.elapsed().as_secs_f64(),
    })
}

fn summarize(sim: u32, k: u32, stride: usize, records: &[RunRecord]) -> CellSummary {
    let ok: Vec<&RunRecord> = records.iter().filter(|r| r.failure.is_none()).collect();
    let collect = |f: fn(&RunRecord) -> f64| Summary::of(&ok.iter().map(|r| f(r)).collect::<Vec<_>>());
    CellSummary {
        sim,
        k,
        stride,
        proposed: collect(|r| r.err_proposed),
        baseline: collect(|r| r.err_baseline),
        iters: collect(|r| r.iters as f64),
        converged: ok.iter().filter(|r| r.converged).count(),
        failed: records.len() - ok.len(),
    }
}

impl RunReport {
    /// Per-run rows followed by `mean`, `variance` and `failed` rows for
    /// every cell. The footer rows carry the statistic name in `run` and
    /// leave `seed` empty.
    pub fn to_csv(&self) -> Result<Vec<u8>> {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(TABLE1_HEADER)?;
        for r in &self.runs {
            w.write_record([
                r.run.to_string(),
                r.seed.to_string(),
                r.sim.to_string(),
                r.k.to_string(),
                r.err_proposed.to_string(),
                r.err_baseline.to_string(),
                r.iters.to_string(),
            ])?;
        }
        for c in &self.cells {
            let (sim, k) = (c.sim.to_string(), c.k.to_string());
            w.write_record([
                "mean",
                "",
                &sim,
                &k,
                &c.proposed.mean.to_string(),
                &c.baseline.mean.to_string(),
                &c.iters.mean.to_string(),
            ])?;
            w.write_record([
                "variance",
                "",
                &sim,
                &k,
                &c.proposed.variance.to_string(),
                &c.baseline.variance.to_string(),
                &c.iters.variance.to_string(),
            ])?;
            w.write_record(["failed", "", &sim, &k, "", "", &c.failed.to_string()])?;
        }
        Ok(w.into_inner()?)
    }

    /// Human-readable summary with the configuration and code version.
    pub fn to_text(&self) -> String {
        let mut s = format!("# tfdeform {} table1\n", self.version);
        s.push_str(&self.config.to_text());
        s.push_str(&format!("# elapsed {:.1} s\n", self.seconds));
        s.push_str("# sim k stride proposed_mean proposed_var ci95 baseline_mean baseline_var mean_iters converged failed\n");
        for c in &self.cells {
            s.push_str(&format!(
                "# {} {} {} {:.4} {:.5} +-{:.4} {:.4} {:.5} {:.1} {} {}\n",
                c.sim,
                c.k,
                c.stride,
                c.proposed.mean,
                c.proposed.variance,
                c.proposed.ci95(),
                c.baseline.mean,
                c.baseline.variance,
                c.iters.mean,
                c.converged,
                c.failed
            ));
        }
        for r in self.runs.iter().filter(|r| r.failure.is_some()) {
            s.push_str(&format!(
                "# failed run {} sim {} k {}: {}\n",
                r.run,
                r.sim,
                r.k,
                r.failure.as_deref().unwrap_or("")
            ));
        }
        s
    }

    /// Writes `table1.csv` and `table1_report.txt` into `dir`.
    pub fn write(&self, dir: &Path) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let csv_path = dir.join("table1.csv");
        std::fs::write(&csv_path, self.to_csv()?)?;
        let txt = write_text(dir, "table1_report.txt", &self.to_text())?;
        Ok(vec![csv_path, txt])
    }
}
