//! Dataset preparation, single-cell training runs and seeded sweeps.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use log::{debug, info};
use ltlab_core::evalkit::{evaluate, weight_norm_profile, MetricsReport};
use ltlab_core::model::ModelParams;
use ltlab_core::synthlt::{generate_glyph_dataset, make_longtail_counts, shot_split, LongTailDataset, ShotSplit};
use ltlab_core::train::{log_group_losses, train_with_eval, ClassGroups, EvalTarget, Strategy, TrainLog};
use ltlab_core::derive_seed;
use rayon::prelude::*;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;
use crate::format::{self, FormatError};
use crate::report::{self, ReportError};

pub const MANIFEST: &str = "manifest.sha256";
pub const SUMMARY: &str = "summary.csv";
pub const TRAIN_SET: &str = "train.ltds";
pub const TEST_SET: &str = "test.ltds";
pub const CLASS_COUNTS_CSV: &str = "class_counts.csv";

pub const CHECKPOINT: &str = "checkpoint.ltck";
pub const ITERATIONS_CSV: &str = "train_log.csv";
pub const EVALS_CSV: &str = "eval_log.csv";
pub const METRICS_JSON: &str = "metrics.json";
pub const METRICS_CSV: &str = "metrics.csv";
pub const WEIGHT_NORMS_CSV: &str = "weight_norms.csv";
pub const LOSS_CURVES_CSV: &str = "loss_curves.csv";

/// Head/tail group size of the loss curves.
pub const GROUP_SIZE: usize = 5;

const STREAM_TEST_SET: u64 = 11;

#[derive(Debug, thiserror::Error)]
pub enum RunError {
    #[error(transparent)]
    Core(#[from] ltlab_core::Error),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("test set has {test} classes, training set {train}")]
    ClassMismatch { train: usize, test: usize },
    #[error("worker pool: {0}")]
    Pool(String),
}

pub type Result<T, E = RunError> = std::result::Result<T, E>;

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> RunError + '_ {
    move |source| RunError::Io {
        path: path.to_owned(),
        source,
    }
}

/// Training and test data shared by every cell of a sweep.
#[derive(Debug, Clone)]
pub struct Data {
    pub train: LongTailDataset,
    pub test: LongTailDataset,
    pub split: ShotSplit,
    /// Whether the sets were generated (and so belong to the outputs).
    pub generated: bool,
}

pub fn prepare_data(cfg: &ExperimentConfig) -> Result<Data> {
    let d = &cfg.dataset;
    let (train, test, generated) = match (&d.train_path, &d.test_path) {
        (Some(tr), Some(te)) => (format::read_dataset(tr)?, format::read_dataset(te)?, false),
        _ => {
            let counts = make_longtail_counts(d.classes, d.n_max, d.n_min)?;
            let train = generate_glyph_dataset(&counts, d.image_size, d.noise_sd, d.seed)?;
            let test = generate_glyph_dataset(
                &vec![d.test_per_class; d.classes],
                d.image_size,
                d.noise_sd,
                derive_seed(d.seed, STREAM_TEST_SET),
            )?;
            (train, test, true)
        }
    };
    if train.num_classes() != test.num_classes() {
        return Err(RunError::ClassMismatch {
            train: train.num_classes(),
            test: test.num_classes(),
        });
    }
    let split = shot_split(train.class_counts(), d.t_many, d.t_low)?;
    Ok(Data {
        train,
        test,
        split,
        generated,
    })
}

/// One point of a sweep. Loss weights are stored as actually applied, so
/// cells that differ only in ignored weights coincide.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Cell {
    pub strategy: Strategy,
    pub seed: u64,
    pub lambda: [f64; 3],
}

impl Cell {
    pub fn new(cfg: &ExperimentConfig, strategy: Strategy, lambda: [f64; 3], seed: u64) -> Self {
        let w = cfg.train_config(strategy, lambda, seed).active_weights();
        Self {
            strategy,
            seed,
            lambda: [w.lambda1, w.lambda2, w.lambda3],
        }
    }

    /// `strategy_seed_lambdas`, e.g. `cbs_rrs_ss_3_0.5-1-1`.
    pub fn dir_name(&self) -> String {
        format!(
            "{}_{}_{}-{}-{}",
            self.strategy.name(),
            self.seed,
            self.lambda[0],
            self.lambda[1],
            self.lambda[2]
        )
    }
}

/// Cross product of the sweep section in config order, duplicates removed.
pub fn sweep_cells(cfg: &ExperimentConfig) -> Vec<Cell> {
    let mut cells: Vec<Cell> = Vec::new();
    for &seed in &cfg.sweep.seeds {
        for &s in &cfg.sweep_strategies {
            for &l in &cfg.sweep.lambdas {
                let c = Cell::new(cfg, s, l, seed);
                if !cells.iter().any(|o| o.dir_name() == c.dir_name()) {
                    cells.push(c);
                }
            }
        }
    }
    cells
}

#[derive(Debug, Clone)]
pub struct CellResult {
    pub cell: Cell,
    pub params: ModelParams,
    pub log: TrainLog,
    pub report: MetricsReport,
    pub weight_norm_sd: f64,
    /// Files relative to the cell directory.
    pub files: Vec<(String, Vec<u8>)>,
}

pub fn run_cell(cfg: &ExperimentConfig, data: &Data, cell: Cell) -> Result<CellResult> {
    let lambda = cell.lambda;
    let tc = cfg.train_config(cell.strategy, lambda, cell.seed);
    debug!("start {}", cell.dir_name());
    let target = EvalTarget {
        data: &data.test,
        split: &data.split,
    };
    let eval = (tc.eval_every > 0).then_some(target);
    let (params, log) = train_with_eval(&tc, &data.train, eval)?;
    let report = evaluate(&params, &data.test, &data.split)?;
    let profile = weight_norm_profile(&params, data.train.class_counts())?;
    let groups = ClassGroups::extremes(data.train.class_counts(), GROUP_SIZE);
    let traces = log_group_losses(&log, &groups, cfg.train.loss_window)?;
    let files = vec![
        (CHECKPOINT.to_owned(), format::encode_checkpoint(&params)?),
        (ITERATIONS_CSV.to_owned(), report::iterations_csv(&log)?),
        (EVALS_CSV.to_owned(), report::evals_csv(&log)?),
        (METRICS_JSON.to_owned(), report::metrics_json(&report)?),
        (METRICS_CSV.to_owned(), report::metrics_csv(&report)?),
        (WEIGHT_NORMS_CSV.to_owned(), report::ranked_csv(&profile.ordered)?),
        (LOSS_CURVES_CSV.to_owned(), report::loss_curves_csv(&traces)?),
    ];
    info!(
        "{}: overall {:.4} low {:?} weight-norm sd {:.4}",
        cell.dir_name(),
        report.acc_overall,
        report.acc_low,
        profile.sd
    );
    Ok(CellResult {
        cell,
        params,
        log,
        report,
        weight_norm_sd: profile.sd,
        files,
    })
}

/// Tracks every file written below an output root.
#[derive(Debug, Default)]
pub struct OutputSet {
    hashes: BTreeMap<String, String>,
}

impl OutputSet {
    pub fn write(&mut self, root: &Path, rel: &str, bytes: &[u8]) -> Result<()> {
        let path = root.join(rel);
        if let Some(parent) = path.parent() {
            fs::create_dir_all(parent).map_err(io_err(parent))?;
        }
        format::write_atomic(&path, bytes).map_err(|e| match e {
            FormatError::Io(source) => RunError::Io { path: path.clone(), source },
            other => other.into(),
        })?;
        self.hashes.insert(rel.to_owned(), hex(&Sha256::digest(bytes)));
        Ok(())
    }

    /// `sha256sum`-compatible listing sorted by path.
    pub fn manifest(&self) -> Vec<u8> {
        let mut out = String::new();
        for (path, hash) in &self.hashes {
            out.push_str(hash);
            out.push_str("  ");
            out.push_str(path);
            out.push('\n');
        }
        out.into_bytes()
    }

    pub fn paths(&self) -> impl Iterator<Item = &str> {
        self.hashes.keys().map(String::as_str)
    }

    /// Writes the manifest itself, which does not list itself.
    pub fn finish(self, root: &Path) -> Result<Vec<u8>> {
        let m = self.manifest();
        format::write_atomic(&root.join(MANIFEST), &m)?;
        Ok(m)
    }
}

pub fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(serde::Serialize)]
struct SummaryRow<'a> {
    cell: String,
    strategy: &'a str,
    seed: u64,
    lambda1: f64,
    lambda2: f64,
    lambda3: f64,
    acc_overall: f64,
    acc_many: Option<f64>,
    acc_medium: Option<f64>,
    acc_low: Option<f64>,
    weight_norm_sd: f64,
}

fn summary_csv(results: &[CellResult]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in results {
        w.serialize(SummaryRow {
            cell: r.cell.dir_name(),
            strategy: r.cell.strategy.name(),
            seed: r.cell.seed,
            lambda1: r.cell.lambda[0],
            lambda2: r.cell.lambda[1],
            lambda3: r.cell.lambda[2],
            acc_overall: r.report.acc_overall,
            acc_many: r.report.acc_many,
            acc_medium: r.report.acc_medium,
            acc_low: r.report.acc_low,
            weight_norm_sd: r.weight_norm_sd,
        })
        .map_err(ReportError::from)?;
    }
    w.into_inner().map_err(|e| ReportError::Buffer(e.to_string()).into())
}

#[derive(Debug)]
pub struct SweepOutcome {
    pub results: Vec<CellResult>,
    pub manifest: Vec<u8>,
}

/// Runs `cells` on a pool of `workers` threads and writes every artifact
/// under `out`. Results come back in `cells` order whatever the pool size.
pub fn run_cells(cfg: &ExperimentConfig, data: &Data, cells: &[Cell], out: &Path, workers: usize) -> Result<SweepOutcome> {
    fs::create_dir_all(out).map_err(io_err(out))?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers.max(1))
        .build()
        .map_err(|e| RunError::Pool(e.to_string()))?;
    let results: Vec<CellResult> =
        pool.install(|| cells.par_iter().map(|&c| run_cell(cfg, data, c)).collect::<Result<_>>())?;
    let mut outputs = OutputSet::default();
    if data.generated {
        outputs.write(out, TRAIN_SET, &format::encode_dataset(&data.train)?)?;
        outputs.write(out, TEST_SET, &format::encode_dataset(&data.test)?)?;
    }
    outputs.write(out, CLASS_COUNTS_CSV, &report::class_counts_csv(data.train.class_counts())?)?;
    for r in &results {
        let dir = r.cell.dir_name();
        for (name, bytes) in &r.files {
            outputs.write(out, &format!("{dir}/{name}"), bytes)?;
        }
    }
    outputs.write(out, SUMMARY, &summary_csv(&results)?)?;
    let manifest = outputs.finish(out)?;
    Ok(SweepOutcome { results, manifest })
}

pub fn run_sweep(cfg: &ExperimentConfig, out: &Path, workers: usize) -> Result<SweepOutcome> {
    let data = prepare_data(cfg)?;
    let cells = sweep_cells(cfg);
    info!(
        "sweep: {} cells ({} strategies x {} ratios x {} seeds, duplicates merged)",
        cells.len(),
        cfg.sweep_strategies.len(),
        cfg.sweep.lambdas.len(),
        cfg.sweep.seeds.len()
    );
    run_cells(cfg, &data, &cells, out, workers)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cfg() -> ExperimentConfig {
        ExperimentConfig::parse(
            "output_dir = \"o\"\n[sweep]\nstrategies = [\"rrs_only\", \"cbs_rrs\"]\nlambdas = [[0.5, 1, 1], [1, 1, 0]]\nseeds = [2]\n",
            Path::new("t"),
        )
        .unwrap()
    }

    #[test]
    fn cell_names() {
        let c = cfg();
        let names: Vec<String> = sweep_cells(&c).iter().map(Cell::dir_name).collect();
        assert_eq!(names, ["rrs_only_2_1-0-0", "cbs_rrs_2_0.5-1-0", "cbs_rrs_2_1-1-0"]);
    }

    #[test]
    fn manifest_sorted_and_hashed() {
        let dir = tempfile::tempdir().unwrap();
        let mut o = OutputSet::default();
        o.write(dir.path(), "b/x.txt", b"abc").unwrap();
        o.write(dir.path(), "a.txt", b"").unwrap();
        let m = String::from_utf8(o.manifest()).unwrap();
        assert_eq!(
            m,
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855  a.txt\n\
             ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad  b/x.txt\n"
        );
    }
}
