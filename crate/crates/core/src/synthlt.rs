//! Synthetic long-tailed glyph datasets and shot splits.
//!
//! Per-class counts follow a deterministic power law anchored at the largest
//! and smallest class size. Each class owns a prototype built from a few bar
//! strokes; samples are the prototype plus clamped Gaussian noise.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::ndgrad::{rotate_image_into, Tensor};
use crate::{seeded_rng, Error, Result};

/// Appearance and composition of the glyph prototypes.
///
/// A glyph is the union of `strokes_per_glyph` straight strokes taken from a
/// fixed vocabulary of `vocabulary` non-overlapping strokes, so classes share
/// parts and differ by which ones they combine.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlyphStyle {
    pub foreground: f64,
    pub background: f64,
    pub vocabulary: usize,
    pub strokes_per_glyph: usize,
    pub stroke_len: usize,
}

impl Default for GlyphStyle {
    fn default() -> Self {
        Self {
            foreground: 0.7,
            background: 0.3,
            vocabulary: 10,
            strokes_per_glyph: 4,
            stroke_len: 3,
        }
    }
}

/// Labelled single-channel images. Pixels are stored as `f32` so the on-disk
/// format round-trips exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LongTailDataset {
    height: usize,
    width: usize,
    images: Vec<f32>,
    labels: Vec<u32>,
    class_counts: Vec<u32>,
}

impl LongTailDataset {
    /// Validates and assembles a dataset. `class_counts` must match the label
    /// histogram exactly and be non-increasing in class index.
    pub fn new(
        height: usize,
        width: usize,
        images: Vec<f32>,
        labels: Vec<u32>,
        class_counts: Vec<u32>,
    ) -> Result<Self> {
        if class_counts.is_empty() {
            return Err(Error::InvalidDataset("no classes".into()));
        }
        if images.len() != labels.len() * height * width {
            return Err(Error::InvalidDataset(format!(
                "{} pixels for {} images of {}x{}",
                images.len(),
                labels.len(),
                height,
                width
            )));
        }
        let mut hist = vec![0u32; class_counts.len()];
        for &l in &labels {
            let slot = hist.get_mut(l as usize).ok_or(Error::TargetOutOfRange {
                target: l as usize,
                classes: class_counts.len(),
            })?;
            *slot += 1;
        }
        if hist != class_counts {
            return Err(Error::InvalidDataset("label histogram differs from class counts".into()));
        }
        if class_counts.windows(2).any(|w| w[0] < w[1]) {
            return Err(Error::InvalidDataset("class counts must be non-increasing".into()));
        }
        if class_counts.contains(&0) {
            return Err(Error::InvalidDataset("every class needs at least one sample".into()));
        }
        Ok(Self {
            height,
            width,
            images,
            labels,
            class_counts,
        })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn num_classes(&self) -> usize {
        self.class_counts.len()
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixels_per_image(&self) -> usize {
        self.height * self.width
    }

    pub fn images(&self) -> &[f32] {
        &self.images
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn class_counts(&self) -> &[u32] {
        &self.class_counts
    }

    pub fn image(&self, i: usize) -> &[f32] {
        let px = self.pixels_per_image();
        &self.images[i * px..(i + 1) * px]
    }

    pub fn label(&self, i: usize) -> usize {
        self.labels[i] as usize
    }

    /// Sample indices grouped by class, in storage order.
    pub fn indices_by_class(&self) -> Vec<Vec<usize>> {
        let mut out: Vec<Vec<usize>> = self
            .class_counts
            .iter()
            .map(|&c| Vec::with_capacity(c as usize))
            .collect();
        for (i, &l) in self.labels.iter().enumerate() {
            out[l as usize].push(i);
        }
        out
    }

    /// Copies the selected samples into a `[B, H, W]` tensor plus labels.
    pub fn gather(&self, indices: &[usize]) -> (Tensor, Vec<usize>) {
        let px = self.pixels_per_image();
        let mut data = Vec::with_capacity(indices.len() * px);
        for &i in indices {
            data.extend(self.image(i).iter().map(|&v| f64::from(v)));
        }
        let labels = indices.iter().map(|&i| self.label(i)).collect();
        let t = Tensor::new(vec![indices.len(), self.height, self.width], data).expect("gathered shape");
        (t, labels)
    }
}

/// Partition of classes by training sample count.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShotSplit {
    pub many: BTreeSet<usize>,
    pub medium: BTreeSet<usize>,
    pub low: BTreeSet<usize>,
    pub t_many: u32,
    pub t_low: u32,
}

impl ShotSplit {
    pub fn num_classes(&self) -> usize {
        self.many.len() + self.medium.len() + self.low.len()
    }
}

/// `round(n_max * (c + 1)^-gamma)` with `gamma = ln(n_max / n_min) / ln(C)`,
/// clamped to `[n_min, n_max]`.
pub fn make_longtail_counts(classes: usize, n_max: u32, n_min: u32) -> Result<Vec<u32>> {
    if classes == 0 {
        return Err(Error::InvalidBounds("need at least one class".into()));
    }
    if n_min == 0 || n_min > n_max {
        return Err(Error::InvalidBounds(format!(
            "require n_max >= n_min >= 1, got n_max={n_max}, n_min={n_min}"
        )));
    }
    if classes == 1 {
        return Ok(vec![n_max]);
    }
    let gamma = libm::log(f64::from(n_max) / f64::from(n_min)) / libm::log(classes as f64);
    let counts = (0..classes)
        .map(|c| {
            let raw = f64::from(n_max) * libm::pow((c + 1) as f64, -gamma);
            (libm::round(raw) as u32).clamp(n_min, n_max)
        })
        .collect();
    Ok(counts)
}

/// Classifies classes as many (`N_c >= t_many`), low (`N_c <= t_low`) or
/// medium shot.
pub fn shot_split(counts: &[u32], t_many: u32, t_low: u32) -> Result<ShotSplit> {
    if t_low == 0 || t_many <= t_low {
        return Err(Error::InvalidThresholds { t_many, t_low });
    }
    let mut split = ShotSplit {
        many: BTreeSet::new(),
        medium: BTreeSet::new(),
        low: BTreeSet::new(),
        t_many,
        t_low,
    };
    for (c, &n) in counts.iter().enumerate() {
        if n >= t_many {
            split.many.insert(c);
        } else if n <= t_low {
            split.low.insert(c);
        } else {
            split.medium.insert(c);
        }
    }
    Ok(split)
}

const VOCAB_SEED: u64 = 0x6c74_766f_6361_62;
const LAYOUT_SEED: u64 = 0x6c74_6c61_796f_7574;

/// Horizontal strokes on every third row and vertical strokes on every third
/// column, as lists of flat cell indices.
fn stroke_lattice(size: usize, len: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    let step = len + 1;
    for r in (1..size.saturating_sub(1)).step_by(3) {
        let mut c = 1;
        while c + len < size {
            out.push((0..len).map(|j| r * size + c + j).collect());
            c += step;
        }
    }
    for c in (2..size.saturating_sub(1)).step_by(3) {
        let mut r = 2;
        while r + len < size {
            out.push((0..len).map(|i| (r + i) * size + c).collect());
            r += step;
        }
    }
    out
}

/// Up to `style.vocabulary` pairwise disjoint strokes, picked greedily from a
/// fixed shuffle of the lattice.
fn stroke_vocabulary(size: usize, style: &GlyphStyle) -> Vec<Vec<usize>> {
    let mut all = stroke_lattice(size, style.stroke_len.max(1));
    all.shuffle(&mut seeded_rng(VOCAB_SEED));
    let mut used = vec![false; size * size];
    let mut vocab = Vec::new();
    for s in all {
        if vocab.len() == style.vocabulary {
            break;
        }
        if s.iter().all(|&p| !used[p]) {
            for &p in &s {
                used[p] = true;
            }
            vocab.push(s);
        }
    }
    vocab
}

/// All `k`-subsets of `0..n` in lexicographic order.
fn subsets(n: usize, k: usize) -> Vec<Vec<usize>> {
    let mut out = Vec::new();
    if k > n {
        return out;
    }
    let mut idx: Vec<usize> = (0..k).collect();
    loop {
        out.push(idx.clone());
        let Some(i) = (0..k).rev().find(|&i| idx[i] != i + n - k) else {
            return out;
        };
        idx[i] += 1;
        for j in i + 1..k {
            idx[j] = idx[j - 1] + 1;
        }
    }
}

fn rotate_mask(mask: &[bool], size: usize, turns: u8) -> Vec<bool> {
    let src: Vec<f64> = mask.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    let mut out = vec![0.0; size * size];
    rotate_image_into(&src, size, turns, &mut out);
    out.into_iter().map(|v| v > 0.5).collect()
}

/// Glyph masks in class order. Stroke combinations are visited in a fixed
/// shuffled order; a mask is kept unless it equals a non-trivial rotation of
/// itself or any rotation of a mask kept earlier.
fn select_glyphs(size: usize, style: &GlyphStyle) -> Vec<Vec<bool>> {
    let vocab = stroke_vocabulary(size, style);
    let mut combos = subsets(vocab.len(), style.strokes_per_glyph.max(1));
    combos.shuffle(&mut seeded_rng(LAYOUT_SEED));
    let mut chosen: Vec<Vec<bool>> = Vec::new();
    let mut seen: BTreeSet<Vec<bool>> = BTreeSet::new();
    for combo in combos {
        let mut mask = vec![false; size * size];
        for &k in &combo {
            for &p in &vocab[k] {
                mask[p] = true;
            }
        }
        let rots: Vec<Vec<bool>> = (0..4).map(|k| rotate_mask(&mask, size, k)).collect();
        if rots[1..].contains(&mask) || rots.iter().any(|r| seen.contains(r)) {
            continue;
        }
        seen.extend(rots);
        chosen.push(mask);
    }
    chosen
}

/// Number of classes whose prototypes fit a `size x size` grid under the
/// default style.
pub fn glyph_capacity(size: usize) -> usize {
    glyph_capacity_styled(size, &GlyphStyle::default())
}

pub fn glyph_capacity_styled(size: usize, style: &GlyphStyle) -> usize {
    select_glyphs(size, style).len()
}

/// Deterministic class prototypes under the default style, row-major
/// `size x size` each.
pub fn glyph_prototypes(classes: usize, size: usize) -> Result<Vec<Vec<f64>>> {
    glyph_prototypes_styled(classes, size, &GlyphStyle::default())
}

pub fn glyph_prototypes_styled(classes: usize, size: usize, style: &GlyphStyle) -> Result<Vec<Vec<f64>>> {
    let masks = select_glyphs(size, style);
    if masks.len() < classes {
        return Err(Error::GlyphCapacity {
            requested: classes,
            available: masks.len(),
            size,
        });
    }
    Ok(masks
        .iter()
        .take(classes)
        .map(|m| {
            m.iter()
                .map(|&on| if on { style.foreground } else { style.background })
                .collect()
        })
        .collect())
}

/// Draws `counts[c]` noisy copies of each class prototype under the default
/// style. Samples are laid out class by class. The result depends only on the
/// arguments.
pub fn generate_glyph_dataset(counts: &[u32], image_size: usize, noise_sd: f64, seed: u64) -> Result<LongTailDataset> {
    generate_glyph_dataset_styled(counts, image_size, noise_sd, seed, &GlyphStyle::default())
}

pub fn generate_glyph_dataset_styled(
    counts: &[u32],
    image_size: usize,
    noise_sd: f64,
    seed: u64,
    style: &GlyphStyle,
) -> Result<LongTailDataset> {
    if image_size < 8 {
        return Err(Error::InvalidDataset(format!("image_size {image_size} < 8")));
    }
    if !(noise_sd >= 0.0 && noise_sd.is_finite()) {
        return Err(Error::InvalidDataset(format!("noise_sd {noise_sd} must be finite and >= 0")));
    }
    if counts.is_empty() || counts.contains(&0) {
        return Err(Error::InvalidBounds("every class needs a positive count".into()));
    }
    let protos = glyph_prototypes_styled(counts.len(), image_size, style)?;
    let px = image_size * image_size;
    let total: usize = counts.iter().map(|&c| c as usize).sum();
    let mut images = Vec::with_capacity(total * px);
    let mut labels = Vec::with_capacity(total);
    let mut rng = seeded_rng(seed);
    let normal = Normal::new(0.0, noise_sd).map_err(|e| Error::InvalidDataset(format!("{e}")))?;
    for (c, (&n, proto)) in counts.iter().zip(&protos).enumerate() {
        for _ in 0..n {
            for &p in proto {
                let v = if noise_sd > 0.0 { p + normal.sample(&mut rng) } else { p };
                images.push(v.clamp(0.0, 1.0) as f32);
            }
            labels.push(c as u32);
        }
    }
    LongTailDataset::new(image_size, image_size, images, labels, counts.to_vec())
}
