//! Experiment harness for `tfdeform`: the simulation study, single-run
//! demos and audio stationarization.

pub mod audio;
pub mod config;
pub mod demo;
pub mod report;
pub mod sim;
pub mod table1;

pub use audio::{run_audio, synth_sound, SynthSound};
pub use config::{ExperimentConfig, Scenario};
pub use demo::run_demo;
pub use table1::{run_table1, RunReport};

/// Code version embedded in every report.
pub const VERSION: &str = env!("CARGO_PKG_VERSION");
