//! File formats, configuration, sweeps and plot data on top of `ltlab-core`.

pub mod cli;
pub mod config;
pub mod figures;
pub mod format;
pub mod report;
pub mod sweep;

pub use config::{ConfigError, ExperimentConfig};
pub use figures::{reproduce_figures, FiguresError};
pub use format::FormatError;
pub use sweep::{run_sweep, RunError};
