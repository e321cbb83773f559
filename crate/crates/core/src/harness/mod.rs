//! Experiment orchestration: configuration, single runs, Mach-number
//! sweeps, rate fits and the self-verification suites.

pub mod config;
pub mod run;
pub mod sweep;
pub mod verify;

pub use config::{ExperimentConfig, InitKind};
pub use run::{run_single, simulate, RunOutput, RunStatus, Sample};
pub use sweep::{fit_rate, run_sweep, SweepResult};
