//! Command-line front end.
//!
//! Exit codes:
//!
//! | code | meaning |
//! |------|---------|
//! | 0 | success |
//! | 2 | bad command line |
//! | 3 | config file unreadable |
//! | 4 | config syntax error |
//! | 5 | config field rejected |
//! | 6 | malformed dataset or checkpoint file |
//! | 7 | invalid experiment (capacity, shapes, counts) |
//! | 8 | training aborted on a non-finite loss |
//! | 9 | filesystem error |
//! | 10 | figures: prerequisite runs missing |
//! | 11 | figures: unreadable run artifacts |
//! | 12 | internal error (serialisation, thread pool) |

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use log::{error, info};
use ltlab_core::evalkit::{evaluate, weight_norm_profile};

use crate::config::{ConfigError, ExperimentConfig};
use crate::figures::{reproduce_figures, FiguresError};
use crate::format::{self, FormatError};
use crate::report::{self, ReportError};
use crate::sweep::{self, Cell, OutputSet, RunError, CLASS_COUNTS_CSV, TEST_SET, TRAIN_SET};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 2;
pub const EXIT_CONFIG_READ: i32 = 3;
pub const EXIT_CONFIG_SYNTAX: i32 = 4;
pub const EXIT_CONFIG_FIELD: i32 = 5;
pub const EXIT_FORMAT: i32 = 6;
pub const EXIT_INVALID: i32 = 7;
pub const EXIT_NON_FINITE: i32 = 8;
pub const EXIT_IO: i32 = 9;
pub const EXIT_MISSING_RUNS: i32 = 10;
pub const EXIT_BAD_ARTIFACT: i32 = 11;
pub const EXIT_INTERNAL: i32 = 12;

#[derive(Debug, Parser)]
#[command(name = "ltlab", version, about = "Long-tailed classification experiments on synthetic glyphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// Experiment configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory; defaults to the config's `output_dir`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the training and test sets described by the config.
    Generate(Common),
    /// Train the single cell given by the `[train]` section.
    Train {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        seed_override: Option<u64>,
    },
    /// Run the `[sweep]` cross product.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Replace the sweep seeds by this single seed.
        #[arg(long)]
        seed_override: Option<u64>,
        #[arg(long, default_value_t = 1)]
        workers: usize,
    },
    /// Evaluate a checkpoint on the config's test set (or `--dataset`).
    Eval {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        dataset: Option<PathBuf>,
    },
    /// Emit plot data from a finished sweep directory.
    Figures(Common),
}

#[derive(Debug, thiserror::Error)]
enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Run(#[from] RunError),
    #[error(transparent)]
    Figures(#[from] FiguresError),
}

fn core_code(e: &ltlab_core::Error) -> i32 {
    match e {
        ltlab_core::Error::NonFiniteLoss { .. } => EXIT_NON_FINITE,
        _ => EXIT_INVALID,
    }
}

fn format_code(e: &FormatError) -> i32 {
    match e {
        FormatError::Io(_) => EXIT_IO,
        _ => EXIT_FORMAT,
    }
}

fn run_code(e: &RunError) -> i32 {
    match e {
        RunError::Core(c) => core_code(c),
        RunError::Format(f) => format_code(f),
        RunError::Io { .. } => EXIT_IO,
        RunError::ClassMismatch { .. } => EXIT_INVALID,
        RunError::Report(_) | RunError::Pool(_) => EXIT_INTERNAL,
    }
}

impl CliError {
    fn code(&self) -> i32 {
        match self {
            CliError::Config(ConfigError::Read { .. }) => EXIT_CONFIG_READ,
            CliError::Config(ConfigError::Syntax { .. }) => EXIT_CONFIG_SYNTAX,
            CliError::Config(ConfigError::Field { .. }) => EXIT_CONFIG_FIELD,
            CliError::Run(e) => run_code(e),
            CliError::Figures(e) => match e {
                FiguresError::Missing(_) | FiguresError::Empty(_) => EXIT_MISSING_RUNS,
                FiguresError::Parse { .. } => EXIT_BAD_ARTIFACT,
                FiguresError::Run(r) => run_code(r),
                FiguresError::Core(c) => core_code(c),
                FiguresError::Report(_) => EXIT_INTERNAL,
            },
        }
    }
}

impl From<ReportError> for CliError {
    fn from(e: ReportError) -> Self {
        CliError::Run(e.into())
    }
}

impl From<FormatError> for CliError {
    fn from(e: FormatError) -> Self {
        CliError::Run(e.into())
    }
}

impl From<ltlab_core::Error> for CliError {
    fn from(e: ltlab_core::Error) -> Self {
        CliError::Run(e.into())
    }
}

fn init_logging() {
    let env = env_logger::Env::new().filter_or("LTLAB_LOG", "info");
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}

/// Parses `args` (program name first), runs the command and returns the
/// process exit code.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    init_logging();
    match dispatch(cli.command) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            error!("{e}");
            e.code()
        }
    }
}

fn load(common: &Common) -> Result<(ExperimentConfig, PathBuf), CliError> {
    let cfg = ExperimentConfig::load(&common.config)?;
    let out = common.out.clone().unwrap_or_else(|| {
        let base = common.config.parent().unwrap_or(Path::new(""));
        base.join(&cfg.output_dir)
    });
    Ok((cfg, out))
}

fn dispatch(cmd: Command) -> Result<(), CliError> {
    match cmd {
        Command::Generate(common) => {
            let (cfg, out) = load(&common)?;
            let data = sweep::prepare_data(&cfg)?;
            let mut files = OutputSet::default();
            files.write(&out, TRAIN_SET, &format::encode_dataset(&data.train)?)?;
            files.write(&out, TEST_SET, &format::encode_dataset(&data.test)?)?;
            files.write(&out, CLASS_COUNTS_CSV, &report::class_counts_csv(data.train.class_counts())?)?;
            files.finish(&out)?;
            info!("wrote {} training and {} test samples to {}", data.train.len(), data.test.len(), out.display());
        }
        Command::Train { common, seed_override } => {
            let (cfg, out) = load(&common)?;
            let data = sweep::prepare_data(&cfg)?;
            let seed = seed_override.unwrap_or(cfg.train.seed);
            let cell = Cell::new(&cfg, cfg.strategy, cfg.train.lambda, seed);
            let outcome = sweep::run_cells(&cfg, &data, &[cell], &out, 1)?;
            let r = &outcome.results[0];
            println!("{}\t{:.4}", cell.dir_name(), r.report.acc_overall);
        }
        Command::Sweep {
            common,
            seed_override,
            workers,
        } => {
            let (mut cfg, out) = load(&common)?;
            if let Some(s) = seed_override {
                cfg.sweep.seeds = vec![s];
            }
            let outcome = sweep::run_sweep(&cfg, &out, workers)?;
            for r in &outcome.results {
                println!("{}\t{:.4}", r.cell.dir_name(), r.report.acc_overall);
            }
        }
        Command::Eval {
            common,
            checkpoint,
            dataset,
        } => {
            let (cfg, out) = load(&common)?;
            let params = format::read_checkpoint(&checkpoint)?;
            let data = sweep::prepare_data(&cfg)?;
            let test = match dataset {
                Some(p) => format::read_dataset(&p)?,
                None => data.test,
            };
            let report = evaluate(&params, &test, &data.split)?;
            let profile = weight_norm_profile(&params, data.train.class_counts())?;
            let mut files = OutputSet::default();
            files.write(&out, sweep::METRICS_JSON, &report::metrics_json(&report)?)?;
            files.write(&out, sweep::METRICS_CSV, &report::metrics_csv(&report)?)?;
            files.write(&out, sweep::WEIGHT_NORMS_CSV, &report::ranked_csv(&profile.ordered)?)?;
            files.finish(&out)?;
            println!("{:.4}", report.acc_overall);
        }
        Command::Figures(common) => {
            let (cfg, out) = load(&common)?;
            for p in reproduce_figures(&out, cfg.train.lambda)? {
                println!("{p}");
            }
        }
    }
    Ok(())
}
