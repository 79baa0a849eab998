use std::path::PathBuf;

use anyhow::{bail, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use tfdeform_cli::audio::write_wav_f32;
use tfdeform_cli::{run_audio, run_demo, run_table1, synth_sound, ExperimentConfig, Scenario, SynthSound};

#[derive(Parser)]
#[command(name = "tfdeform", version, about = "Estimate modulations and time warpings of stationary signals")]
struct Cli {
    #[command(flatten)]
    common: Common,
    #[command(subcommand)]
    command: Command,
}

/// Flags shared by every command; they override the config file.
#[derive(Args)]
struct Common {
    /// Flat `key = value` configuration file
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Realizations per simulation cell
    #[arg(long, global = true)]
    runs: Option<usize>,
    /// Output directory
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Simulation: sine warp with 1, 2 or 4 periods
    #[arg(long, global = true, value_parser = ["1", "2", "3"])]
    sim: Option<String>,
    /// Wavelet degree
    #[arg(long = "wavelet-k", global = true, value_parser = ["70", "25", "7"])]
    wavelet_k: Option<String>,
    #[arg(long = "snr-db", global = true)]
    snr_db: Option<f64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum DemoKind {
    Warp,
    Modulation,
}

#[derive(Clone, Copy, ValueEnum)]
enum Sound {
    Tone,
    Chirp,
    Engine,
}

#[derive(Subcommand)]
enum Command {
    /// Simulation study of sine warps: per-run errors and cell aggregates
    Table1,
    /// One seeded run with transform, truth, baseline and estimate curves
    Demo {
        #[arg(long, value_enum, default_value = "warp")]
        kind: DemoKind,
    },
    /// Warping estimation and stationarization of a WAV file
    Audio {
        /// Input WAV (PCM 16/24-bit or float32); first channel is used
        input: Option<PathBuf>,
        /// Generate a test sound into the output directory and process it
        #[arg(long, value_enum, conflicts_with = "input")]
        synth: Option<Sound>,
    },
}

fn config(common: &Common, scenario: Scenario) -> Result<ExperimentConfig> {
    let mut cfg = match &common.config {
        Some(path) => ExperimentConfig::from_file(path)?,
        None => ExperimentConfig::default(),
    };
    cfg.scenario = scenario;
    if let Some(v) = common.seed {
        cfg.seed = v;
    }
    if let Some(v) = common.runs {
        cfg.runs = v;
    }
    if let Some(v) = &common.out {
        cfg.out = v.clone();
    }
    if let Some(v) = &common.sim {
        cfg.set("sim", v)?;
    }
    if let Some(v) = &common.wavelet_k {
        cfg.set("wavelet_k", v)?;
    }
    if let Some(v) = common.snr_db {
        cfg.snr_db = v;
        cfg.sigma0_sq = None;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::Table1 => {
            let cfg = config(&cli.common, Scenario::Table1)?;
            let report = run_table1(&cfg)?;
            for path in report.write(&cfg.out)? {
                println!("wrote {}", path.display());
            }
            print!("{}", report.to_text().lines().filter(|l| !l.contains(" = ")).map(|l| format!("{l}\n")).collect::<String>());
        }
        Command::Demo { kind } => {
            let scenario = match kind {
                DemoKind::Warp => Scenario::WarpDemo,
                DemoKind::Modulation => Scenario::ModulationDemo,
            };
            let cfg = config(&cli.common, scenario)?;
            let report = run_demo(&cfg)?;
            for path in &report.files {
                println!("wrote {}", path.display());
            }
            println!(
                "error proposed {:.4} baseline {:.4} after {} iterations",
                report.errors.proposed, report.errors.baseline, report.errors.iterations
            );
        }
        Command::Audio { input, synth } => {
            let cfg = config(&cli.common, Scenario::Audio)?;
            let input = match (input.or(cfg.input.clone()), synth) {
                (_, Some(sound)) => {
                    let sound = match sound {
                        Sound::Tone => SynthSound::Tone,
                        Sound::Chirp => SynthSound::Chirp,
                        Sound::Engine => SynthSound::Engine,
                    };
                    std::fs::create_dir_all(&cfg.out)?;
                    let path = cfg.out.join(format!("synth_{}.wav", sound.name()));
                    write_wav_f32(&path, &synth_sound(sound, cfg.seed)?, tfdeform_cli::audio::SYNTH_FS)?;
                    println!("wrote {}", path.display());
                    path
                }
                (Some(path), None) => path,
                (None, None) => bail!("give an input WAV, `input` in the config, or --synth"),
            };
            let report = run_audio(&input, &cfg)?;
            for path in &report.files {
                println!("wrote {}", path.display());
            }
            if report.clipped > 0 {
                eprintln!("warning: {} input samples at full scale", report.clipped);
            }
        }
    }
    Ok(())
}
