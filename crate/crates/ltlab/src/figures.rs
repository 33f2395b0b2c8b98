//! Plot-ready CSVs assembled from a finished sweep directory.

use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use ltlab_core::evalkit::{accuracy_gain, MetricsReport};
use ltlab_core::train::Strategy;
use serde::{Deserialize, Serialize};

use crate::report::ReportError;
use crate::sweep::{OutputSet, RunError, CLASS_COUNTS_CSV, LOSS_CURVES_CSV, MANIFEST, METRICS_JSON, WEIGHT_NORMS_CSV};

pub const FIGURES_DIR: &str = "figures";

#[derive(Debug, thiserror::Error)]
pub enum FiguresError {
    #[error("missing prerequisite runs: {}", .0.join(", "))]
    Missing(Vec<String>),
    #[error("no completed runs found in {0}")]
    Empty(PathBuf),
    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },
    #[error(transparent)]
    Run(#[from] RunError),
    #[error(transparent)]
    Report(#[from] ReportError),
    #[error(transparent)]
    Core(#[from] ltlab_core::Error),
}

type Result<T> = std::result::Result<T, FiguresError>;

#[derive(Deserialize)]
struct CountRow {
    #[allow(dead_code)]
    class: usize,
    count: u32,
}

fn parse_err(path: &Path, e: impl std::fmt::Display) -> FiguresError {
    FiguresError::Parse {
        path: path.to_owned(),
        message: e.to_string(),
    }
}

fn read(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|source| {
        RunError::Io {
            path: path.to_owned(),
            source,
        }
        .into()
    })
}

fn read_csv<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<Vec<T>> {
    let bytes = read(path)?;
    csv::Reader::from_reader(bytes.as_slice())
        .deserialize()
        .collect::<std::result::Result<_, _>>()
        .map_err(|e| parse_err(path, e))
}

#[derive(Debug, Clone, Copy, Deserialize)]
struct CurveRow {
    window: usize,
    iteration_end: usize,
    rrs_head: Option<f64>,
    rrs_tail: Option<f64>,
    cbs_head: Option<f64>,
    cbs_tail: Option<f64>,
}

#[derive(Serialize)]
struct FigureCurveRow {
    window: usize,
    iteration_end: usize,
    rrs_only_head: Option<f64>,
    rrs_only_tail: Option<f64>,
    cbs_only_head: Option<f64>,
    cbs_only_tail: Option<f64>,
}

#[derive(Serialize)]
struct GainRow {
    class_rank: usize,
    class: usize,
    train_count: u32,
    gain_vs_rrs_only: f64,
    gain_vs_cbs_only: f64,
}

/// Splits `strategy_seed_l1-l2-l3`.
fn parse_cell_name(name: &str) -> Option<(Strategy, u64, String)> {
    let (rest, lambdas) = name.rsplit_once('_')?;
    let (strategy, seed) = rest.rsplit_once('_')?;
    Some((Strategy::from_name(strategy)?, seed.parse().ok()?, lambdas.to_owned()))
}

fn lambda_tag(l: [f64; 3]) -> String {
    format!("{}-{}-{}", l[0], l[1], l[2])
}

/// Emits, for every seed present in `run_dir`, the head/tail loss curves of
/// the two single-sampler baselines, per-class accuracy gains of the joint
/// model over both, and the three weight-norm profiles. `joint_lambda` picks
/// the joint cell (its third weight is ignored). Returns the written paths.
pub fn reproduce_figures(run_dir: &Path, joint_lambda: [f64; 3]) -> Result<Vec<String>> {
    let entries = fs::read_dir(run_dir).map_err(|source| RunError::Io {
        path: run_dir.to_owned(),
        source,
    })?;
    let mut cells = BTreeSet::new();
    for e in entries.flatten() {
        if e.path().join(METRICS_JSON).is_file() {
            if let Some(parsed) = e.file_name().to_str().and_then(parse_cell_name) {
                cells.insert((parsed.1, parsed.0.name().to_owned(), parsed.2));
            }
        }
    }
    let seeds: BTreeSet<u64> = cells.iter().map(|c| c.0).collect();
    if seeds.is_empty() {
        return Err(FiguresError::Empty(run_dir.to_owned()));
    }
    let joint_tag = lambda_tag([joint_lambda[0], joint_lambda[1], 0.0]);
    let single_tag = lambda_tag([1.0, 0.0, 0.0]);
    let wanted = |seed: u64| {
        [
            (Strategy::RrsOnly, single_tag.clone()),
            (Strategy::CbsOnly, single_tag.clone()),
            (Strategy::CbsRrs, joint_tag.clone()),
        ]
        .map(|(s, tag)| (seed, s.name().to_owned(), tag))
    };
    let missing: Vec<String> = seeds
        .iter()
        .flat_map(|&s| wanted(s))
        .filter(|c| !cells.contains(c))
        .map(|(seed, s, tag)| format!("{s}_{seed}_{tag}"))
        .collect();
    if !missing.is_empty() {
        return Err(FiguresError::Missing(missing));
    }
    let counts_path = run_dir.join(CLASS_COUNTS_CSV);
    let counts: Vec<u32> = read_csv::<CountRow>(&counts_path)?.into_iter().map(|r| r.count).collect();

    let mut out = OutputSet::default();
    let fig_root = run_dir.join(FIGURES_DIR);
    for seed in seeds {
        let [rrs, cbs, joint] = wanted(seed).map(|(seed, s, tag)| run_dir.join(format!("{s}_{seed}_{tag}")));
        let sub = format!("seed_{seed}");

        let rrs_curves: Vec<CurveRow> = read_csv(&rrs.join(LOSS_CURVES_CSV))?;
        let cbs_curves: Vec<CurveRow> = read_csv(&cbs.join(LOSS_CURVES_CSV))?;
        if rrs_curves.len() != cbs_curves.len() {
            return Err(parse_err(&cbs.join(LOSS_CURVES_CSV), "window count differs from the RRS-only run"));
        }
        let mut w = csv::Writer::from_writer(Vec::new());
        for (r, c) in rrs_curves.iter().zip(&cbs_curves) {
            w.serialize(FigureCurveRow {
                window: r.window,
                iteration_end: r.iteration_end,
                rrs_only_head: r.rrs_head,
                rrs_only_tail: r.rrs_tail,
                cbs_only_head: c.cbs_head,
                cbs_only_tail: c.cbs_tail,
            })
            .map_err(ReportError::from)?;
        }
        let bytes = w.into_inner().map_err(|e| ReportError::Buffer(e.to_string()))?;
        out.write(&fig_root, &format!("{sub}/loss_curves.csv"), &bytes)?;

        let metrics = |dir: &Path| -> Result<MetricsReport> {
            let p = dir.join(METRICS_JSON);
            serde_json::from_slice(&read(&p)?).map_err(|e| parse_err(&p, e))
        };
        let (m_rrs, m_cbs, m_joint) = (metrics(&rrs)?, metrics(&cbs)?, metrics(&joint)?);
        let vs_rrs = accuracy_gain(&m_joint, &m_rrs, &counts)?;
        let vs_cbs = accuracy_gain(&m_joint, &m_cbs, &counts)?;
        let mut w = csv::Writer::from_writer(Vec::new());
        for (rank, (a, b)) in vs_rrs.iter().zip(&vs_cbs).enumerate() {
            w.serialize(GainRow {
                class_rank: rank,
                class: a.class,
                train_count: counts[a.class],
                gain_vs_rrs_only: a.value,
                gain_vs_cbs_only: b.value,
            })
            .map_err(ReportError::from)?;
        }
        let bytes = w.into_inner().map_err(|e| ReportError::Buffer(e.to_string()))?;
        out.write(&fig_root, &format!("{sub}/gains.csv"), &bytes)?;

        for (dir, s) in [(&rrs, Strategy::RrsOnly), (&cbs, Strategy::CbsOnly), (&joint, Strategy::CbsRrs)] {
            let bytes = read(&dir.join(WEIGHT_NORMS_CSV))?;
            out.write(&fig_root, &format!("{sub}/weight_norms_{}.csv", s.name()), &bytes)?;
        }
    }
    let written: Vec<String> = out.paths().map(|p| format!("{FIGURES_DIR}/{p}")).collect();
    let manifest = out.manifest();
    crate::format::write_atomic(&fig_root.join(MANIFEST), &manifest).map_err(RunError::from)?;
    Ok(written)
}
