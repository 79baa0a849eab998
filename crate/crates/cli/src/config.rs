//! Experiment configuration: a flat `key = value` file, overridden by
//! command-line flags.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use anyhow::{anyhow, bail, Context, Result};
use tfdeform::estimators::{EstimatorConfig, GaborParams, WaveletParams};

/// Which harness command a configuration drives.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Scenario {
    Table1,
    WarpDemo,
    ModulationDemo,
    Audio,
}

impl Scenario {
    pub fn name(self) -> &'static str {
        match self {
            Scenario::Table1 => "table1",
            Scenario::WarpDemo => "warp-demo",
            Scenario::ModulationDemo => "modulation-demo",
            Scenario::Audio => "audio",
        }
    }
}

impl FromStr for Scenario {
    type Err = anyhow::Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "table1" => Scenario::Table1,
            "warp-demo" => Scenario::WarpDemo,
            "modulation-demo" => Scenario::ModulationDemo,
            "audio" => Scenario::Audio,
            _ => bail!("unknown scenario `{s}`"),
        })
    }
}

impl fmt::Display for Scenario {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

pub const SIMULATIONS: [u32; 3] = [1, 2, 3];
pub const WAVELET_DEGREES: [u32; 3] = [70, 25, 7];

/// Everything an experiment needs. Defaults reproduce the simulation study
/// at 20 dB.
#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub scenario: Scenario,
    pub seed: u64,
    pub runs: usize,
    pub out: PathBuf,
    /// Simulations to run; simulations 1, 2 and 3 warp with sines of period
    /// `L`, `L/2` and `L/4`.
    pub sims: Vec<u32>,
    pub wavelet_degrees: Vec<u32>,
    pub snr_db: f64,
    /// Overrides `snr_db` when set.
    pub sigma0_sq: Option<f64>,

    // warping simulations
    pub len: usize,
    pub warp_amplitude: f64,
    pub band_lo: f64,
    pub band_hi: f64,
    pub voices: u32,
    pub hop: usize,
    pub rows: usize,
    pub window_start: usize,
    pub window_len: usize,
    pub max_shift: usize,
    /// Coarse stride of the wavelet search; chosen from the wavelet when unset.
    pub wavelet_stride: Option<usize>,

    // modulation simulations
    pub mod_len: usize,
    /// Peak of `gamma'` in DFT bins.
    pub mod_amplitude: f64,
    pub mod_band_lo: f64,
    pub mod_band_hi: f64,
    pub gabor_a: usize,
    pub gabor_b: usize,
    pub gabor_window_std: Option<f64>,

    pub epsilon: f64,
    pub max_iters: usize,

    pub input: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            scenario: Scenario::Table1,
            seed: 1,
            runs: 100,
            out: PathBuf::from("results"),
            sims: SIMULATIONS.to_vec(),
            wavelet_degrees: WAVELET_DEGREES.to_vec(),
            snr_db: 20.0,
            sigma0_sq: None,
            len: 1 << 14,
            warp_amplitude: 0.3,
            band_lo: 0.0028,
            band_hi: 0.12,
            voices: 70,
            hop: 64,
            rows: 560,
            window_start: 70,
            window_len: 420,
            max_shift: 70,
            wavelet_stride: None,
            mod_len: 8192,
            mod_amplitude: 300.0,
            mod_band_lo: 0.1,
            mod_band_hi: 0.15,
            gabor_a: 32,
            gabor_b: 2,
            gabor_window_std: None,
            epsilon: 0.02,
            max_iters: 20,
            input: None,
        }
    }
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T>
where
    T::Err: fmt::Display,
{
    value
        .parse()
        .map_err(|e| anyhow!("bad value `{value}` for `{key}`: {e}"))
}

fn parse_list(key: &str, value: &str, allowed: &[u32]) -> Result<Vec<u32>> {
    if value == "all" {
        return Ok(allowed.to_vec());
    }
    let mut out = Vec::new();
    for part in value.split(',') {
        let v: u32 = parse(key, part.trim())?;
        if !allowed.contains(&v) {
            bail!("`{key}` must be one of {allowed:?}, got {v}");
        }
        if !out.contains(&v) {
            out.push(v);
        }
    }
    Ok(out)
}

fn optional<T: FromStr>(key: &str, value: &str) -> Result<Option<T>>
where
    T::Err: fmt::Display,
{
    if value == "auto" || value == "none" {
        Ok(None)
    } else {
        parse(key, value).map(Some)
    }
}

fn join<T: ToString>(values: &[T]) -> String {
    values.iter().map(ToString::to_string).collect::<Vec<_>>().join(",")
}

fn show<T: ToString>(value: &Option<T>, absent: &str) -> String {
    value.as_ref().map_or(absent.to_string(), ToString::to_string)
}

impl ExperimentConfig {
    /// Sets one key. Unknown keys are errors.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        match key {
            "scenario" => self.scenario = value.parse()?,
            "seed" => self.seed = parse(key, value)?,
            "runs" => self.runs = parse(key, value)?,
            "out" => self.out = PathBuf::from(value),
            "sim" => self.sims = parse_list(key, value, &SIMULATIONS)?,
            "wavelet_k" => self.wavelet_degrees = parse_list(key, value, &WAVELET_DEGREES)?,
            "snr_db" => self.snr_db = parse(key, value)?,
            "sigma0_sq" => self.sigma0_sq = optional(key, value)?,
            "len" => self.len = parse(key, value)?,
            "warp_amplitude" => self.warp_amplitude = parse(key, value)?,
            "band_lo" => self.band_lo = parse(key, value)?,
            "band_hi" => self.band_hi = parse(key, value)?,
            "voices" => self.voices = parse(key, value)?,
            "hop" => self.hop = parse(key, value)?,
            "rows" => self.rows = parse(key, value)?,
            "window_start" => self.window_start = parse(key, value)?,
            "window_len" => self.window_len = parse(key, value)?,
            "max_shift" => self.max_shift = parse(key, value)?,
            "wavelet_stride" => self.wavelet_stride = optional(key, value)?,
            "mod_len" => self.mod_len = parse(key, value)?,
            "mod_amplitude" => self.mod_amplitude = parse(key, value)?,
            "mod_band_lo" => self.mod_band_lo = parse(key, value)?,
            "mod_band_hi" => self.mod_band_hi = parse(key, value)?,
            "gabor_a" => self.gabor_a = parse(key, value)?,
            "gabor_b" => self.gabor_b = parse(key, value)?,
            "gabor_window_std" => self.gabor_window_std = optional(key, value)?,
            "epsilon" => self.epsilon = parse(key, value)?,
            "max_iters" => self.max_iters = parse(key, value)?,
            "input" => self.input = optional(key, value)?,
            _ => bail!("unknown configuration key `{key}`"),
        }
        Ok(())
    }

    /// Applies a `key = value` text. Blank lines and `#` comments are skipped.
    pub fn apply_text(&mut self, text: &str) -> Result<()> {
        for (i, line) in text.lines().enumerate() {
            let line = line.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| anyhow!("line {}: expected `key = value`", i + 1))?;
            self.set(key.trim(), value).with_context(|| format!("line {}", i + 1))?;
        }
        Ok(())
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let mut cfg = Self::default();
        cfg.apply_text(&text).with_context(|| format!("in {}", path.display()))?;
        Ok(cfg)
    }

    /// All keys in a fixed order, as written by [`ExperimentConfig::to_text`].
    pub fn entries(&self) -> Vec<(&'static str, String)> {
        vec![
            ("scenario", self.scenario.to_string()),
            ("seed", self.seed.to_string()),
            ("runs", self.runs.to_string()),
            ("out", self.out.display().to_string()),
            ("sim", join(&self.sims)),
            ("wavelet_k", join(&self.wavelet_degrees)),
            ("snr_db", self.snr_db.to_string()),
            ("sigma0_sq", show(&self.sigma0_sq, "none")),
            ("len", self.len.to_string()),
            ("warp_amplitude", self.warp_amplitude.to_string()),
            ("band_lo", self.band_lo.to_string()),
            ("band_hi", self.band_hi.to_string()),
            ("voices", self.voices.to_string()),
            ("hop", self.hop.to_string()),
            ("rows", self.rows.to_string()),
            ("window_start", self.window_start.to_string()),
            ("window_len", self.window_len.to_string()),
            ("max_shift", self.max_shift.to_string()),
            ("wavelet_stride", show(&self.wavelet_stride, "auto")),
            ("mod_len", self.mod_len.to_string()),
            ("mod_amplitude", self.mod_amplitude.to_string()),
            ("mod_band_lo", self.mod_band_lo.to_string()),
            ("mod_band_hi", self.mod_band_hi.to_string()),
            ("gabor_a", self.gabor_a.to_string()),
            ("gabor_b", self.gabor_b.to_string()),
            ("gabor_window_std", show(&self.gabor_window_std, "auto")),
            ("epsilon", self.epsilon.to_string()),
            ("max_iters", self.max_iters.to_string()),
            ("input", show(&self.input.as_ref().map(|p| p.display().to_string()), "none")),
        ]
    }

    /// Serializes to the format read by [`ExperimentConfig::apply_text`].
    pub fn to_text(&self) -> String {
        self.entries().iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.runs == 0 {
            bail!("runs must be at least 1");
        }
        if self.sims.is_empty() || self.wavelet_degrees.is_empty() {
            bail!("no simulation cell selected");
        }
        if !self.snr_db.is_finite() {
            bail!("snr_db must be finite");
        }
        if let Some(s) = self.sigma0_sq {
            if !(s >= 0.0) {
                bail!("sigma0_sq must be nonnegative");
            }
        }
        for (name, lo, hi) in [
            ("band", self.band_lo, self.band_hi),
            ("mod_band", self.mod_band_lo, self.mod_band_hi),
        ] {
            if !(0.0 < lo && lo < hi && hi < 0.5) {
                bail!("{name} must satisfy 0 < lo < hi < 0.5 cycles per sample");
            }
        }
        if !(self.warp_amplitude >= 0.0 && self.warp_amplitude < 1.0) {
            bail!("warp_amplitude must lie in [0, 1)");
        }
        if self.len < 2 * self.hop || self.mod_len < 2 * self.gabor_a {
            bail!("signals are shorter than two frames");
        }
        self.estimator(70, true)
            .validate()
            .map_err(|e| anyhow!("estimator parameters: {e}"))?;
        Ok(())
    }

    /// Estimator settings for wavelet degree `degree`.
    pub fn estimator(&self, degree: u32, periodic: bool) -> EstimatorConfig {
        EstimatorConfig {
            epsilon: self.epsilon,
            max_iters: self.max_iters,
            periodic,
            gabor: GaborParams {
                a: self.gabor_a,
                b_fine: self.gabor_b,
                window_std: self.gabor_window_std,
                stride: None,
                max_shift_bins: None,
            },
            wavelet: WaveletParams {
                degree,
                voices: self.voices,
                a: self.hop,
                rows: self.rows,
                window_start: self.window_start,
                window_len: self.window_len,
                max_shift: self.max_shift,
                stride: self.wavelet_stride,
            },
            ..Default::default()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn text_round_trip() {
        let mut cfg = ExperimentConfig::default();
        cfg.apply_text("# study\nruns = 7\nsim = 2,3  # two cells\nsigma0_sq = 0.5\n")
            .unwrap();
        assert_eq!(cfg.runs, 7);
        assert_eq!(cfg.sims, vec![2, 3]);
        let mut again = ExperimentConfig::default();
        again.apply_text(&cfg.to_text()).unwrap();
        assert_eq!(again, cfg);
    }

    #[test]
    fn rejects_bad_input() {
        let mut cfg = ExperimentConfig::default();
        assert!(cfg.apply_text("runs 3").is_err());
        assert!(cfg.apply_text("colour = red").is_err());
        assert!(cfg.apply_text("sim = 5").is_err());
        assert!(cfg.apply_text("wavelet_k = 12").is_err());
        cfg.runs = 0;
        assert!(cfg.validate().is_err());
        assert!(ExperimentConfig::default().validate().is_ok());
    }
}
