//! Exactness and uniformity audits of the two samplers. Shared by the core
//! tests and the acceptance suite.

use std::collections::BTreeSet;

use ltlab_core::sampling::{ClassBalancedSampler, RandomSampler};
use ltlab_core::synthlt::make_longtail_counts;
use statrs::distribution::{ChiSquared, ContinuousCDF};

pub const AUDIT_BATCHES: usize = 10_000;
pub const CLASSES: usize = 10;
pub const BATCH: usize = 12;
pub const DRAW: usize = 4;
pub const P_MIN: f64 = 0.01;

/// Long-tailed class layout with some classes smaller than `DRAW`.
pub fn layout() -> Vec<Vec<usize>> {
    let counts = make_longtail_counts(CLASSES, 40, 2).unwrap();
    let mut next = 0;
    counts
        .iter()
        .map(|&n| {
            let v: Vec<usize> = (next..next + n as usize).collect();
            next += n as usize;
            v
        })
        .collect()
}

/// Upper tail probability of Pearson's statistic against a uniform
/// expectation.
pub fn uniform_p_value(observed: &[u64]) -> f64 {
    let total: u64 = observed.iter().sum();
    let expected = total as f64 / observed.len() as f64;
    let stat: f64 = observed.iter().map(|&o| (o as f64 - expected).powi(2) / expected).sum();
    let dist = ChiSquared::new((observed.len() - 1) as f64).unwrap();
    1.0 - dist.cdf(stat)
}

/// Runs `AUDIT_BATCHES` CBS batches and checks, exactly:
/// every batch holds `k` distinct classes with `Z` draws each; the classes of
/// the `C / k` batches of one class cycle are pairwise distinct; each class's
/// draws, cut into runs of its sample count, are permutations of its samples.
/// Returns the per-class appearance counts.
pub fn audit_cbs(seed: u64) -> Result<Vec<u64>, String> {
    let groups = layout();
    let label_of: Vec<usize> = groups
        .iter()
        .enumerate()
        .flat_map(|(c, g)| g.iter().map(move |_| c))
        .collect();
    let mut s = ClassBalancedSampler::new(groups.clone(), BATCH, DRAW, seed).map_err(|e| e.to_string())?;
    let k = BATCH / DRAW;
    let cycle = CLASSES / k;
    let mut appearances = vec![0u64; CLASSES];
    let mut draws: Vec<Vec<usize>> = vec![Vec::new(); CLASSES];
    let mut in_cycle = BTreeSet::new();
    for b in 0..AUDIT_BATCHES {
        if b % cycle == 0 {
            in_cycle.clear();
        }
        let batch = s.next_batch();
        if batch.len() != BATCH {
            return Err(format!("batch {b} has {} samples", batch.len()));
        }
        let mut per_class = vec![0usize; CLASSES];
        for &i in &batch {
            per_class[label_of[i]] += 1;
            draws[label_of[i]].push(i);
        }
        let present: Vec<usize> = (0..CLASSES).filter(|&c| per_class[c] > 0).collect();
        if present.len() != k || present.iter().any(|&c| per_class[c] != DRAW) {
            return Err(format!("batch {b} class multiplicities {per_class:?}"));
        }
        for &c in &present {
            if !in_cycle.insert(c) {
                return Err(format!("class {c} repeated within the cycle ending at batch {b}"));
            }
            appearances[c] += 1;
        }
    }
    for (c, d) in draws.iter().enumerate() {
        let n = groups[c].len();
        for run in d.chunks_exact(n) {
            let mut sorted = run.to_vec();
            sorted.sort_unstable();
            if sorted != groups[c] {
                return Err(format!("class {c} repeats a sample before exhausting its list"));
            }
        }
    }
    Ok(appearances)
}

pub const RRS_SAMPLES: usize = 103;
pub const RRS_BATCH: usize = 8;

/// Runs `AUDIT_BATCHES` RRS batches, checks that the batches of one pass over
/// the permutation never repeat a sample and returns per-sample counts.
pub fn audit_rrs(seed: u64) -> Result<Vec<u64>, String> {
    let mut s = RandomSampler::new(RRS_SAMPLES, RRS_BATCH, seed).map_err(|e| e.to_string())?;
    let per_pass = RRS_SAMPLES / RRS_BATCH;
    let mut counts = vec![0u64; RRS_SAMPLES];
    let mut seen = BTreeSet::new();
    for b in 0..AUDIT_BATCHES {
        if b % per_pass == 0 {
            seen.clear();
        }
        let batch = s.next_batch();
        if batch.len() != RRS_BATCH {
            return Err(format!("batch {b} has {} samples", batch.len()));
        }
        for i in batch {
            if !seen.insert(i) {
                return Err(format!("sample {i} repeated within pass ending at batch {b}"));
            }
            counts[i] += 1;
        }
    }
    Ok(counts)
}
