//! Regular random sampling (RRS) and class-balanced sampling (CBS) as
//! resumable, seed-deterministic batch index generators.

use alloc::format;
use alloc::vec::Vec;

use rand::seq::SliceRandom;

use crate::{seeded_rng, Error, Result, Rng};

/// Which sampler produced a batch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum SamplerMode {
    Rrs,
    Cbs,
}

/// A shuffled list consumed front to back.
#[derive(Debug, Clone)]
struct Cursor {
    order: Vec<usize>,
    pos: usize,
}

impl Cursor {
    fn shuffled(mut items: Vec<usize>, rng: &mut Rng) -> Self {
        items.shuffle(rng);
        Self { order: items, pos: 0 }
    }

    fn remaining(&self) -> usize {
        self.order.len() - self.pos
    }

    fn reshuffle(&mut self, rng: &mut Rng) {
        self.order.shuffle(rng);
        self.pos = 0;
    }

    fn take(&mut self, n: usize) -> &[usize] {
        let s = &self.order[self.pos..self.pos + n];
        self.pos += n;
        s
    }
}

/// Uniform sampling over all training samples: each batch consumes `S` entries
/// of a global permutation. A remainder shorter than `S` is dropped and the
/// permutation redrawn.
#[derive(Debug, Clone)]
pub struct RandomSampler {
    batch_size: usize,
    global: Cursor,
    rng: Rng,
}

impl RandomSampler {
    pub fn new(num_samples: usize, batch_size: usize, seed: u64) -> Result<Self> {
        if batch_size == 0 || batch_size > num_samples {
            return Err(Error::Sampler(format!(
                "RRS batch size {batch_size} must be in 1..={num_samples}"
            )));
        }
        let mut rng = seeded_rng(seed);
        let global = Cursor::shuffled((0..num_samples).collect(), &mut rng);
        Ok(Self {
            batch_size,
            global,
            rng,
        })
    }

    pub fn batch_size(&self) -> usize {
        self.batch_size
    }

    pub fn next_batch(&mut self) -> Vec<usize> {
        if self.global.remaining() < self.batch_size {
            self.global.reshuffle(&mut self.rng);
        }
        self.global.take(self.batch_size).to_vec()
    }
}

/// Class-balanced sampling: `k = S / Z` distinct classes per batch drawn from
/// a class permutation, then `Z` samples of each from that class's own
/// permutation.
///
/// A class cycle with fewer than `k` classes left is dropped and redrawn, so
/// a batch never repeats a class. Per-class lists carry over instead: a class
/// with fewer than `Z` samples wraps into a fresh permutation mid-batch.
#[derive(Debug, Clone)]
pub struct ClassBalancedSampler {
    per_class_draw: usize,
    classes_per_batch: usize,
    classes: Cursor,
    per_class: Vec<Cursor>,
    rng: Rng,
}

impl ClassBalancedSampler {
    /// `by_class[c]` lists the sample indices of class `c`.
    pub fn new(by_class: Vec<Vec<usize>>, batch_size: usize, per_class_draw: usize, seed: u64) -> Result<Self> {
        if per_class_draw == 0 || batch_size == 0 || !batch_size.is_multiple_of(per_class_draw) {
            return Err(Error::Sampler(format!(
                "Z={per_class_draw} must divide S={batch_size}"
            )));
        }
        let k = batch_size / per_class_draw;
        if k > by_class.len() {
            return Err(Error::Sampler(format!(
                "k=S/Z={k} exceeds the number of classes {}",
                by_class.len()
            )));
        }
        if let Some(c) = by_class.iter().position(|v| v.is_empty()) {
            return Err(Error::Sampler(format!("class {c} has no samples")));
        }
        let mut rng = seeded_rng(seed);
        let classes = Cursor::shuffled((0..by_class.len()).collect(), &mut rng);
        let per_class = by_class
            .into_iter()
            .map(|v| Cursor::shuffled(v, &mut rng))
            .collect();
        Ok(Self {
            per_class_draw,
            classes_per_batch: k,
            classes,
            per_class,
            rng,
        })
    }

    pub fn classes_per_batch(&self) -> usize {
        self.classes_per_batch
    }

    pub fn per_class_draw(&self) -> usize {
        self.per_class_draw
    }

    pub fn batch_size(&self) -> usize {
        self.classes_per_batch * self.per_class_draw
    }

    pub fn next_batch(&mut self) -> Vec<usize> {
        if self.classes.remaining() < self.classes_per_batch {
            self.classes.reshuffle(&mut self.rng);
        }
        let chosen = self.classes.take(self.classes_per_batch).to_vec();
        let mut batch = Vec::with_capacity(self.batch_size());
        for c in chosen {
            let list = &mut self.per_class[c];
            let mut need = self.per_class_draw;
            while need > 0 {
                if list.remaining() == 0 {
                    list.reshuffle(&mut self.rng);
                }
                let n = need.min(list.remaining());
                batch.extend_from_slice(list.take(n));
                need -= n;
            }
        }
        batch
    }
}

/// Either sampler behind one interface.
#[derive(Debug, Clone)]
pub enum SamplerState {
    Rrs(RandomSampler),
    Cbs(ClassBalancedSampler),
}

impl SamplerState {
    pub fn mode(&self) -> SamplerMode {
        match self {
            Self::Rrs(_) => SamplerMode::Rrs,
            Self::Cbs(_) => SamplerMode::Cbs,
        }
    }

    pub fn next_batch(&mut self) -> Vec<usize> {
        match self {
            Self::Rrs(s) => s.next_batch(),
            Self::Cbs(s) => s.next_batch(),
        }
    }
}
