//! CSV and JSON emitters. Every writer renders to bytes first so callers can
//! hash and write them in one place.

use ltlab_core::evalkit::{ClassValue, MetricsReport};
use ltlab_core::train::{GroupLossTraces, TrainLog};
use serde::Serialize;

pub type Result<T> = std::result::Result<T, ReportError>;

#[derive(Debug, thiserror::Error)]
pub enum ReportError {
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("csv buffer: {0}")]
    Buffer(String),
}

fn csv_bytes<R: Serialize>(rows: impl IntoIterator<Item = R>) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| ReportError::Buffer(e.to_string()))
}

fn csv_with_header<R: Serialize>(header: &[&str], rows: impl IntoIterator<Item = R>) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner().map_err(|e| ReportError::Buffer(e.to_string()))
}

/// `iteration,lr,loss_cbs,loss_rrs,loss_ss,loss_final`
pub fn iterations_csv(log: &TrainLog) -> Result<Vec<u8>> {
    csv_with_header(
        &["iteration", "lr", "loss_cbs", "loss_rrs", "loss_ss", "loss_final"],
        log.iterations.iter(),
    )
}

/// `iteration,acc_overall,acc_many,acc_medium,acc_low`; an empty cell marks a
/// split with no classes.
pub fn evals_csv(log: &TrainLog) -> Result<Vec<u8>> {
    csv_with_header(
        &["iteration", "acc_overall", "acc_many", "acc_medium", "acc_low"],
        log.evals.iter(),
    )
}

pub fn metrics_json(report: &MetricsReport) -> Result<Vec<u8>> {
    let mut v = serde_json::to_vec_pretty(report)?;
    v.push(b'\n');
    Ok(v)
}

#[derive(Serialize)]
struct MetricRow<'a> {
    metric: &'a str,
    class: Option<usize>,
    value: Option<f64>,
}

/// Long-format rows `metric,class,value`; scalar metrics leave `class` empty.
pub fn metrics_csv(report: &MetricsReport) -> Result<Vec<u8>> {
    let scalar = |metric, value| MetricRow {
        metric,
        class: None,
        value,
    };
    let mut rows = vec![
        scalar("acc_overall", Some(report.acc_overall)),
        scalar("acc_many", report.acc_many),
        scalar("acc_medium", report.acc_medium),
        scalar("acc_low", report.acc_low),
        scalar("macro_many", report.macro_many),
        scalar("macro_medium", report.macro_medium),
        scalar("macro_low", report.macro_low),
    ];
    for (metric, values) in [
        ("per_class_acc", &report.per_class_acc),
        ("weight_norms", &report.weight_norms),
    ] {
        rows.extend(values.iter().enumerate().map(|(c, &v)| MetricRow {
            metric,
            class: Some(c),
            value: Some(v),
        }));
    }
    csv_bytes(rows)
}

#[derive(Serialize)]
struct CountRow {
    class: usize,
    count: u32,
}

/// `class,count` of the training set.
pub fn class_counts_csv(counts: &[u32]) -> Result<Vec<u8>> {
    csv_bytes(counts.iter().enumerate().map(|(class, &count)| CountRow { class, count }))
}

#[derive(Serialize)]
struct RankRow {
    class_rank: usize,
    value: f64,
}

/// Two columns `class_rank,value`, rank 0 being the most frequent class.
pub fn ranked_csv(values: &[ClassValue]) -> Result<Vec<u8>> {
    csv_bytes(values.iter().enumerate().map(|(class_rank, v)| RankRow {
        class_rank,
        value: v.value,
    }))
}

#[derive(Serialize)]
struct CurveRow {
    window: usize,
    iteration_end: usize,
    rrs_head: Option<f64>,
    rrs_tail: Option<f64>,
    cbs_head: Option<f64>,
    cbs_tail: Option<f64>,
}

/// One row per full smoothing window.
pub fn loss_curves_csv(traces: &GroupLossTraces) -> Result<Vec<u8>> {
    let rows = traces.cbs_head.len();
    csv_bytes((0..rows).map(|i| CurveRow {
        window: i,
        iteration_end: (i + 1) * traces.window,
        rrs_head: traces.rrs_head[i],
        rrs_tail: traces.rrs_tail[i],
        cbs_head: traces.cbs_head[i],
        cbs_tail: traces.cbs_tail[i],
    }))
}
