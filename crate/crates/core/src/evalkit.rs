//! Evaluation protocol: overall and shot-wise top-1 accuracy, per-class
//! accuracy gains, classifier weight-norm profiles and strategy rankings.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::model::{Block, Head, ModelParams};
use crate::synthlt::{LongTailDataset, ShotSplit};
use crate::{Error, Result};

const EVAL_CHUNK: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub acc_overall: f64,
    /// Sample-averaged accuracy per split; `None` for an empty split.
    pub acc_many: Option<f64>,
    pub acc_medium: Option<f64>,
    pub acc_low: Option<f64>,
    /// Class-averaged accuracy per split.
    pub macro_many: Option<f64>,
    pub macro_medium: Option<f64>,
    pub macro_low: Option<f64>,
    pub per_class_acc: Vec<f64>,
    pub weight_norms: Vec<f64>,
    /// `confusion_counts[true][predicted]`
    pub confusion_counts: Vec<Vec<u64>>,
}

/// Index of the largest value; ties go to the lowest index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate().skip(1) {
        if v > row[best] {
            best = i;
        }
    }
    best
}

/// Predictions of `h(phi(x))` for every sample of `data`.
pub fn predict(params: &ModelParams, data: &LongTailDataset) -> Result<Vec<usize>> {
    let c = params.num_classes();
    let mut out = Vec::with_capacity(data.len());
    let all: Vec<usize> = (0..data.len()).collect();
    for chunk in all.chunks(EVAL_CHUNK) {
        let (images, _) = data.gather(chunk);
        let logits = params.logits(Head::Cbs, &images)?;
        out.extend(logits.data().chunks_exact(c).map(argmax));
    }
    Ok(out)
}

fn split_accuracy(classes: &BTreeSet<usize>, correct: &[u64], total: &[u64]) -> (Option<f64>, Option<f64>) {
    if classes.is_empty() {
        return (None, None);
    }
    let (hit, all) = classes
        .iter()
        .fold((0u64, 0u64), |(h, a), &c| (h + correct[c], a + total[c]));
    let micro = (all > 0).then(|| hit as f64 / all as f64);
    let macro_ = classes
        .iter()
        .map(|&c| correct[c] as f64 / total[c] as f64)
        .sum::<f64>()
        / classes.len() as f64;
    (micro, Some(macro_))
}

/// Builds a report from predictions, independent of any model.
pub fn report_from_predictions(
    labels: &[usize],
    predictions: &[usize],
    num_classes: usize,
    split: &ShotSplit,
    weight_norms: Vec<f64>,
) -> Result<MetricsReport> {
    if labels.len() != predictions.len() {
        return Err(Error::LengthMismatch(labels.len(), predictions.len()));
    }
    if split.num_classes() != num_classes {
        return Err(Error::ClassCountMismatch {
            model: num_classes,
            data: split.num_classes(),
        });
    }
    let mut confusion = vec![vec![0u64; num_classes]; num_classes];
    for (&y, &p) in labels.iter().zip(predictions) {
        if y >= num_classes || p >= num_classes {
            return Err(Error::TargetOutOfRange {
                target: y.max(p),
                classes: num_classes,
            });
        }
        confusion[y][p] += 1;
    }
    let total: Vec<u64> = confusion.iter().map(|r| r.iter().sum()).collect();
    let correct: Vec<u64> = (0..num_classes).map(|c| confusion[c][c]).collect();
    if let Some(c) = total.iter().position(|&t| t == 0) {
        return Err(Error::InvalidDataset(format!("class {c} has no test samples")));
    }
    let per_class_acc = correct.iter().zip(&total).map(|(&h, &t)| h as f64 / t as f64).collect();
    let n: u64 = total.iter().sum();
    let acc_overall = correct.iter().sum::<u64>() as f64 / n as f64;
    let (acc_many, macro_many) = split_accuracy(&split.many, &correct, &total);
    let (acc_medium, macro_medium) = split_accuracy(&split.medium, &correct, &total);
    let (acc_low, macro_low) = split_accuracy(&split.low, &correct, &total);
    Ok(MetricsReport {
        acc_overall,
        acc_many,
        acc_medium,
        acc_low,
        macro_many,
        macro_medium,
        macro_low,
        per_class_acc,
        weight_norms,
        confusion_counts: confusion,
    })
}

/// Evaluates the primary classifier on `testset`; `split` comes from the
/// training class counts.
pub fn evaluate(params: &ModelParams, testset: &LongTailDataset, split: &ShotSplit) -> Result<MetricsReport> {
    if params.num_classes() != testset.num_classes() {
        return Err(Error::ClassCountMismatch {
            model: params.num_classes(),
            data: testset.num_classes(),
        });
    }
    let predictions = predict(params, testset)?;
    let labels: Vec<usize> = testset.labels().iter().map(|&l| l as usize).collect();
    report_from_predictions(
        &labels,
        &predictions,
        params.num_classes(),
        split,
        classifier_row_norms(params),
    )
}

/// Class index with the value attached, in plotting order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClassValue {
    pub class: usize,
    pub value: f64,
}

/// Classes sorted by descending training count; equal counts keep index order.
pub fn frequency_order(train_counts: &[u32]) -> Vec<usize> {
    let mut order: Vec<usize> = (0..train_counts.len()).collect();
    order.sort_by(|&a, &b| train_counts[b].cmp(&train_counts[a]));
    order
}

/// Per-class `acc_a - acc_b`, ordered by training frequency.
pub fn accuracy_gain(a: &MetricsReport, b: &MetricsReport, train_counts: &[u32]) -> Result<Vec<ClassValue>> {
    if a.per_class_acc.len() != b.per_class_acc.len() {
        return Err(Error::LengthMismatch(a.per_class_acc.len(), b.per_class_acc.len()));
    }
    if train_counts.len() != a.per_class_acc.len() {
        return Err(Error::LengthMismatch(train_counts.len(), a.per_class_acc.len()));
    }
    Ok(frequency_order(train_counts)
        .into_iter()
        .map(|c| ClassValue {
            class: c,
            value: a.per_class_acc[c] - b.per_class_acc[c],
        })
        .collect())
}

/// l2 norms of the primary classifier's weight rows (bias excluded).
pub fn classifier_row_norms(params: &ModelParams) -> Vec<f64> {
    let w = params.block(Block::CbsWeight);
    let f = params.feature_dim();
    w.data()
        .chunks_exact(f)
        .map(|row| libm::sqrt(row.iter().map(|v| v * v).sum::<f64>()))
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightNormProfile {
    /// Norms in training-frequency order.
    pub ordered: Vec<ClassValue>,
    pub mean: f64,
    /// Population standard deviation.
    pub sd: f64,
    /// `max / min`; `None` when the smallest norm is zero.
    pub max_min_ratio: Option<f64>,
}

pub fn weight_norm_profile(params: &ModelParams, train_counts: &[u32]) -> Result<WeightNormProfile> {
    let norms = classifier_row_norms(params);
    if train_counts.len() != norms.len() {
        return Err(Error::LengthMismatch(train_counts.len(), norms.len()));
    }
    Ok(norm_profile(&norms, train_counts))
}

pub(crate) fn norm_profile(norms: &[f64], train_counts: &[u32]) -> WeightNormProfile {
    let n = norms.len() as f64;
    let mean = norms.iter().sum::<f64>() / n;
    let var = norms.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let max = norms.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let min = norms.iter().copied().fold(f64::INFINITY, f64::min);
    WeightNormProfile {
        ordered: frequency_order(train_counts)
            .into_iter()
            .map(|c| ClassValue {
                class: c,
                value: norms[c],
            })
            .collect(),
        mean,
        sd: libm::sqrt(var),
        max_min_ratio: (min > 0.0).then(|| max / min),
    }
}

/// Metric columns used for rankings.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum SplitMetric {
    Overall,
    Many,
    Medium,
    Low,
}

impl SplitMetric {
    pub const ALL: [SplitMetric; 4] = [SplitMetric::Overall, SplitMetric::Many, SplitMetric::Medium, SplitMetric::Low];

    pub fn of(self, r: &MetricsReport) -> Option<f64> {
        match self {
            SplitMetric::Overall => Some(r.acc_overall),
            SplitMetric::Many => r.acc_many,
            SplitMetric::Medium => r.acc_medium,
            SplitMetric::Low => r.acc_low,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            SplitMetric::Overall => "overall",
            SplitMetric::Many => "many",
            SplitMetric::Medium => "medium",
            SplitMetric::Low => "low",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub name: String,
    pub value: f64,
    /// 1-based competition rank; equal values share a rank.
    pub rank: usize,
    pub tied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Ranking {
    pub metric: SplitMetric,
    pub entries: Vec<RankEntry>,
}

/// Qualitative orderings between the baselines and the joint model. Each is
/// `None` when a required report is missing.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct OrderingFlags {
    /// RRS-only has the best many-shot accuracy among RRS-only, CBS-only and
    /// CBS+RRS.
    pub rrs_best_many: Option<bool>,
    /// CBS+RRS beats both baselines overall.
    pub joint_beats_baselines: Option<bool>,
    /// CBS+RRS beats RRS-only on low-shot classes.
    pub joint_low_above_rrs: Option<bool>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ComparisonTable {
    pub rankings: Vec<Ranking>,
    pub flags: OrderingFlags,
}

/// Names used by [`compare_strategies`] to recognise the reference runs.
pub const NAME_RRS_ONLY: &str = "rrs_only";
pub const NAME_CBS_ONLY: &str = "cbs_only";
pub const NAME_CBS_RRS: &str = "cbs_rrs";

pub fn compare_strategies(reports: &[(String, MetricsReport)]) -> Result<ComparisonTable> {
    if reports.len() < 2 {
        return Err(Error::InvalidConfig("comparison needs at least two reports".into()));
    }
    let mut rankings = Vec::new();
    for metric in SplitMetric::ALL {
        let mut rows: Vec<(String, f64)> = reports
            .iter()
            .filter_map(|(n, r)| metric.of(r).map(|v| (n.clone(), v)))
            .collect();
        rows.sort_by(|a, b| b.1.total_cmp(&a.1).then_with(|| a.0.cmp(&b.0)));
        let mut entries: Vec<RankEntry> = Vec::with_capacity(rows.len());
        for (i, (name, value)) in rows.iter().enumerate() {
            let rank = match entries.last() {
                Some(prev) if prev.value == *value => prev.rank,
                _ => i + 1,
            };
            entries.push(RankEntry {
                name: name.clone(),
                value: *value,
                rank,
                tied: false,
            });
        }
        for i in 0..entries.len() {
            let r = entries[i].rank;
            entries[i].tied = entries.iter().enumerate().any(|(j, e)| j != i && e.rank == r);
        }
        rankings.push(Ranking { metric, entries });
    }

    let get = |name: &str| reports.iter().find(|(n, _)| n == name).map(|(_, r)| r);
    let (rrs, cbs, joint) = (get(NAME_RRS_ONLY), get(NAME_CBS_ONLY), get(NAME_CBS_RRS));
    let mut flags = OrderingFlags::default();
    if let (Some(rrs), Some(cbs), Some(joint)) = (rrs, cbs, joint) {
        flags.rrs_best_many = match (rrs.acc_many, cbs.acc_many, joint.acc_many) {
            (Some(r), Some(c), Some(j)) => Some(r > c && r > j),
            _ => None,
        };
        flags.joint_beats_baselines = Some(joint.acc_overall > rrs.acc_overall && joint.acc_overall > cbs.acc_overall);
    }
    if let (Some(rrs), Some(joint)) = (rrs, joint) {
        flags.joint_low_above_rrs = match (joint.acc_low, rrs.acc_low) {
            (Some(j), Some(r)) => Some(j > r),
            _ => None,
        };
    }
    Ok(ComparisonTable { rankings, flags })
}
