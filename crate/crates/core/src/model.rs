//! Shared feature extractor with three linear heads and the weighted joint
//! objective.
//!
//! The extractor is `flatten -> linear -> relu -> linear -> relu`. The primary
//! head `head_cbs` is the only classifier used for prediction; `head_rrs` and
//! `head_ss` exist to shape the extractor during training.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use rand::Rng as _;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::ndgrad::{rotate90, Tape, Tensor, Var};
use crate::{Error, Result, Rng};

/// Number of rotation classes (0, 90, 180, 270 degrees).
pub const ROTATIONS: usize = 4;

/// Parameter blocks in storage order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Block {
    PhiW1,
    PhiB1,
    PhiW2,
    PhiB2,
    CbsWeight,
    CbsBias,
    RrsWeight,
    RrsBias,
    SsWeight,
    SsBias,
}

impl Block {
    pub const ALL: [Block; 10] = [
        Block::PhiW1,
        Block::PhiB1,
        Block::PhiW2,
        Block::PhiB2,
        Block::CbsWeight,
        Block::CbsBias,
        Block::RrsWeight,
        Block::RrsBias,
        Block::SsWeight,
        Block::SsBias,
    ];

    /// Checkpoint name of the block.
    pub fn name(self) -> &'static str {
        match self {
            Block::PhiW1 => "phi.w1",
            Block::PhiB1 => "phi.b1",
            Block::PhiW2 => "phi.w2",
            Block::PhiB2 => "phi.b2",
            Block::CbsWeight => "head_cbs.weight",
            Block::CbsBias => "head_cbs.bias",
            Block::RrsWeight => "head_rrs.weight",
            Block::RrsBias => "head_rrs.bias",
            Block::SsWeight => "head_ss.weight",
            Block::SsBias => "head_ss.bias",
        }
    }

    pub fn from_name(name: &str) -> Option<Block> {
        Block::ALL.into_iter().find(|b| b.name() == name)
    }

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_phi(self) -> bool {
        matches!(self, Block::PhiW1 | Block::PhiB1 | Block::PhiW2 | Block::PhiB2)
    }
}

/// One of the three heads.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Head {
    /// Primary classifier `h`, trained on class-balanced batches.
    Cbs,
    /// Auxiliary classifier `h_a`, trained on regular random batches.
    Rrs,
    /// Rotation classifier `h_s`.
    Ss,
}

impl Head {
    pub fn blocks(self) -> (Block, Block) {
        match self {
            Head::Cbs => (Block::CbsWeight, Block::CbsBias),
            Head::Rrs => (Block::RrsWeight, Block::RrsBias),
            Head::Ss => (Block::SsWeight, Block::SsBias),
        }
    }
}

/// Layer sizes of the network.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelShape {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub feature_dim: usize,
    pub num_classes: usize,
}

impl ModelShape {
    pub fn block_shape(&self, block: Block) -> Vec<usize> {
        let Self {
            input_dim: d,
            hidden_dim: h,
            feature_dim: f,
            num_classes: c,
        } = *self;
        match block {
            Block::PhiW1 => vec![h, d],
            Block::PhiB1 => vec![h],
            Block::PhiW2 => vec![f, h],
            Block::PhiB2 => vec![f],
            Block::CbsWeight | Block::RrsWeight => vec![c, f],
            Block::CbsBias | Block::RrsBias => vec![c],
            Block::SsWeight => vec![ROTATIONS, f],
            Block::SsBias => vec![ROTATIONS],
        }
    }

    fn fan_in(&self, block: Block) -> usize {
        self.block_shape(block)[1]
    }
}

/// All trainable parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    shape: ModelShape,
    blocks: Vec<Tensor>,
}

impl ModelParams {
    /// Gaussian weights with sd `sqrt(2 / fan_in)`, zero biases.
    pub fn init(shape: ModelShape, rng: &mut Rng) -> Result<Self> {
        if shape.input_dim == 0 || shape.hidden_dim == 0 || shape.feature_dim == 0 || shape.num_classes == 0 {
            return Err(Error::InvalidConfig(format!("degenerate model shape {shape:?}")));
        }
        let mut params = Self::zeros(shape);
        for block in Block::ALL {
            if matches!(block, Block::PhiW1 | Block::PhiW2 | Block::CbsWeight | Block::RrsWeight | Block::SsWeight) {
                params.init_block(block, rng);
            }
        }
        Ok(params)
    }

    pub fn zeros(shape: ModelShape) -> Self {
        let blocks = Block::ALL.iter().map(|&b| Tensor::zeros(&shape.block_shape(b))).collect();
        Self { shape, blocks }
    }

    /// Builds parameters from named blocks, checking every shape.
    pub fn from_blocks(shape: ModelShape, named: Vec<(String, Tensor)>) -> Result<Self> {
        let mut slots: Vec<Option<Tensor>> = vec![None; Block::ALL.len()];
        for (name, t) in named {
            let block = Block::from_name(&name)
                .ok_or_else(|| Error::ShapeMismatch(format!("unknown parameter block {name:?}")))?;
            if t.shape() != shape.block_shape(block).as_slice() {
                return Err(Error::ShapeMismatch(format!(
                    "{name}: expected {:?}, got {:?}",
                    shape.block_shape(block),
                    t.shape()
                )));
            }
            slots[block.index()] = Some(t);
        }
        let blocks = slots
            .into_iter()
            .zip(Block::ALL)
            .map(|(t, b)| t.ok_or_else(|| Error::ShapeMismatch(format!("missing block {}", b.name()))))
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { shape, blocks })
    }

    /// Infers the layer sizes from the block shapes (used when loading).
    pub fn infer_shape(named: &[(String, Tensor)]) -> Result<ModelShape> {
        let find = |b: Block| {
            named
                .iter()
                .find(|(n, _)| n == b.name())
                .map(|(_, t)| t.shape().to_vec())
                .ok_or_else(|| Error::ShapeMismatch(format!("missing block {}", b.name())))
        };
        let w1 = find(Block::PhiW1)?;
        let w2 = find(Block::PhiW2)?;
        let wc = find(Block::CbsWeight)?;
        if w1.len() != 2 || w2.len() != 2 || wc.len() != 2 {
            return Err(Error::ShapeMismatch("weight blocks must be rank 2".into()));
        }
        Ok(ModelShape {
            input_dim: w1[1],
            hidden_dim: w1[0],
            feature_dim: w2[0],
            num_classes: wc[0],
        })
    }

    fn init_block(&mut self, block: Block, rng: &mut Rng) {
        let sd = libm::sqrt(2.0 / self.shape.fan_in(block) as f64);
        let normal = Normal::new(0.0, sd).expect("finite sd");
        for v in self.blocks[block.index()].data_mut() {
            *v = normal.sample(rng);
        }
    }

    /// Redraws one head: Gaussian weights, zero bias.
    pub fn reinit_head(&mut self, head: Head, rng: &mut Rng) {
        let (w, b) = head.blocks();
        self.init_block(w, rng);
        self.blocks[b.index()].data_mut().fill(0.0);
    }

    pub fn shape(&self) -> ModelShape {
        self.shape
    }

    pub fn num_classes(&self) -> usize {
        self.shape.num_classes
    }

    pub fn feature_dim(&self) -> usize {
        self.shape.feature_dim
    }

    pub fn block(&self, block: Block) -> &Tensor {
        &self.blocks[block.index()]
    }

    pub fn block_mut(&mut self, block: Block) -> &mut Tensor {
        &mut self.blocks[block.index()]
    }

    pub fn blocks_mut(&mut self) -> Vec<&mut Tensor> {
        self.blocks.iter_mut().collect()
    }

    /// Named blocks in storage order.
    pub fn named_blocks(&self) -> impl Iterator<Item = (&'static str, &Tensor)> {
        Block::ALL.iter().map(|b| b.name()).zip(&self.blocks)
    }

    /// Records every block on `tape` as a trainable leaf.
    pub fn bind(&self, tape: &mut Tape) -> BoundParams {
        let vars = self.blocks.iter().map(|t| tape.param(t.clone())).collect();
        BoundParams { vars }
    }

    /// Features of a `[B, H, W]` (or `[B, D]`) batch without recording
    /// gradients for the inputs.
    pub fn features(&self, images: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape);
        let x = tape.input(images.clone());
        let f = forward_features(&mut tape, &bound, x)?;
        Ok(tape.value(f).clone())
    }

    /// Logits of the chosen head for a batch of images.
    pub fn logits(&self, head: Head, images: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::new();
        let bound = self.bind(&mut tape);
        let x = tape.input(images.clone());
        let f = forward_features(&mut tape, &bound, x)?;
        let z = head_logits(&mut tape, &bound, head, f)?;
        Ok(tape.value(z).clone())
    }
}

/// Tape handles for the parameter blocks.
#[derive(Debug, Clone)]
pub struct BoundParams {
    vars: Vec<Var>,
}

impl BoundParams {
    pub fn var(&self, block: Block) -> Var {
        self.vars[block.index()]
    }
}

/// Flattens a `[B, ...]` input node to `[B, D]` if needed.
fn flatten_input(tape: &mut Tape, images: Var) -> Result<Var> {
    let t = tape.value(images);
    if t.rank() == 2 {
        return Ok(images);
    }
    let b = *t.shape().first().ok_or_else(|| Error::ShapeMismatch("scalar input".into()))?;
    let d = if b == 0 { 0 } else { t.len() / b };
    let flat = t.clone().reshape(&[b, d])?;
    Ok(tape.input(flat))
}

/// `phi(x)`: two affine layers, each followed by relu.
pub fn forward_features(tape: &mut Tape, p: &BoundParams, images: Var) -> Result<Var> {
    let x = flatten_input(tape, images)?;
    let h = tape.linear(x, p.var(Block::PhiW1), p.var(Block::PhiB1))?;
    let h = tape.relu(h);
    let f = tape.linear(h, p.var(Block::PhiW2), p.var(Block::PhiB2))?;
    Ok(tape.relu(f))
}

pub fn head_logits(tape: &mut Tape, p: &BoundParams, head: Head, features: Var) -> Result<Var> {
    let (w, b) = head.blocks();
    tape.linear(features, p.var(w), p.var(b))
}

/// Mean cross-entropy of `head(phi(images))` against `labels`.
pub fn head_loss(tape: &mut Tape, p: &BoundParams, head: Head, images: Var, labels: &[usize]) -> Result<Var> {
    let f = forward_features(tape, p, images)?;
    let z = head_logits(tape, p, head, f)?;
    tape.softmax_cross_entropy(z, labels)
}

/// Weights of the three loss terms.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub lambda1: f64,
    pub lambda2: f64,
    pub lambda3: f64,
}

impl LossWeights {
    pub fn new(lambda1: f64, lambda2: f64, lambda3: f64) -> Result<Self> {
        let w = Self {
            lambda1,
            lambda2,
            lambda3,
        };
        w.validate()?;
        Ok(w)
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.lambda1, self.lambda2, self.lambda3];
        if all.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::InvalidWeights(format!("weights must be finite and >= 0: {all:?}")));
        }
        if all.iter().all(|&v| v == 0.0) {
            return Err(Error::InvalidWeights("at least one weight must be positive".into()));
        }
        Ok(())
    }
}

impl Default for LossWeights {
    fn default() -> Self {
        Self {
            lambda1: 0.5,
            lambda2: 1.0,
            lambda3: 1.0,
        }
    }
}

/// Images `[B, H, W]` with one label per image.
#[derive(Debug, Clone, PartialEq)]
pub struct Batch {
    pub images: Tensor,
    pub labels: Vec<usize>,
}

impl Batch {
    pub fn new(images: Tensor, labels: Vec<usize>) -> Result<Self> {
        let b = images.shape().first().copied().unwrap_or(0);
        if b != labels.len() {
            return Err(Error::LengthMismatch(b, labels.len()));
        }
        Ok(Self { images, labels })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    fn square_side(&self) -> Result<usize> {
        match *self.images.shape() {
            [_, h, w] if h == w => Ok(h),
            [_, h, w] => Err(Error::NonSquare { h, w }),
            _ => Err(Error::ShapeMismatch(format!("expected [B, H, W], got {:?}", self.images.shape()))),
        }
    }

    /// Concatenates two batches of identical image size.
    pub fn concat(&self, other: &Batch) -> Result<Batch> {
        if self.images.shape()[1..] != other.images.shape()[1..] {
            return Err(Error::ShapeMismatch(format!(
                "cannot concatenate {:?} and {:?}",
                self.images.shape(),
                other.images.shape()
            )));
        }
        let mut shape = self.images.shape().to_vec();
        shape[0] += other.len();
        let mut data = self.images.data().to_vec();
        data.extend_from_slice(other.images.data());
        let mut labels = self.labels.clone();
        labels.extend_from_slice(&other.labels);
        Batch::new(Tensor::new(shape, data)?, labels)
    }
}

/// Inputs of one joint update. `primary` feeds `h`, `auxiliary` feeds `h_a`
/// and `rotation` feeds `h_s`; absent parts contribute no term.
#[derive(Debug, Clone, Default)]
pub struct BatchTriple {
    pub primary: Option<Batch>,
    pub auxiliary: Option<Batch>,
    pub rotation: Option<Batch>,
}

/// Tape nodes of the joint objective. Terms with zero weight (or no batch)
/// are not recorded.
#[derive(Debug, Clone, Copy)]
pub struct JointLoss {
    pub total: Var,
    pub primary: Option<Var>,
    pub auxiliary: Option<Var>,
    pub rotation: Option<Var>,
}

/// `lambda1 * l(h(phi(B_primary))) + lambda2 * l(h_a(phi(B_aux))) + lambda3 * l(h_s(phi(B_rot)))`.
pub fn joint_loss(tape: &mut Tape, p: &BoundParams, triple: &BatchTriple, w: &LossWeights) -> Result<JointLoss> {
    w.validate()?;
    let parts = [
        (Head::Cbs, triple.primary.as_ref(), w.lambda1),
        (Head::Rrs, triple.auxiliary.as_ref(), w.lambda2),
        (Head::Ss, triple.rotation.as_ref(), w.lambda3),
    ];
    let mut nodes: [Option<Var>; 3] = [None; 3];
    let mut total: Option<Var> = None;
    for (slot, (head, batch, lambda)) in nodes.iter_mut().zip(parts) {
        let Some(batch) = batch else { continue };
        if lambda == 0.0 {
            continue;
        }
        let x = tape.input(batch.images.clone());
        let l = head_loss(tape, p, head, x, &batch.labels)?;
        *slot = Some(l);
        let term = tape.scale(l, lambda);
        total = Some(match total {
            None => term,
            Some(acc) => tape.add(acc, term)?,
        });
    }
    let total = total.ok_or_else(|| Error::InvalidWeights("no active loss term".into()))?;
    Ok(JointLoss {
        total,
        primary: nodes[0],
        auxiliary: nodes[1],
        rotation: nodes[2],
    })
}

/// Concatenates `[B_cbs; B_rrs]` and rotates each image by the given quarter
/// turns; the turn count becomes the label.
pub fn rotation_batch_with_turns(b_cbs: &Batch, b_rrs: &Batch, turns: &[u8]) -> Result<Batch> {
    b_cbs.square_side()?;
    b_rrs.square_side()?;
    let joined = b_cbs.concat(b_rrs)?;
    if let Some(&t) = turns.iter().find(|&&t| t as usize >= ROTATIONS) {
        return Err(Error::TargetOutOfRange {
            target: t as usize,
            classes: ROTATIONS,
        });
    }
    let images = rotate90(&joined.images, turns)?;
    Batch::new(images, turns.iter().map(|&t| t as usize).collect())
}

/// Rotation pretext batch with one uniformly drawn quarter turn per image.
pub fn make_rotation_batch(b_cbs: &Batch, b_rrs: &Batch, rng: &mut Rng) -> Result<Batch> {
    let n = b_cbs.len() + b_rrs.len();
    let turns: Vec<u8> = (0..n).map(|_| rng.random_range(0..ROTATIONS as u8)).collect();
    rotation_batch_with_turns(b_cbs, b_rrs, &turns)
}

/// Replaces every image by its four rotations, keeping the class label.
pub fn rotation_augment(batch: &Batch) -> Result<Batch> {
    let side = batch.square_side()?;
    let px = side * side;
    let mut data = Vec::with_capacity(batch.images.len() * ROTATIONS);
    let mut labels = Vec::with_capacity(batch.len() * ROTATIONS);
    let mut buf = vec![0.0; px];
    for (img, &label) in batch.images.data().chunks_exact(px).zip(&batch.labels) {
        for k in 0..ROTATIONS as u8 {
            crate::ndgrad::rotate_image_into(img, side, k, &mut buf);
            data.extend_from_slice(&buf);
            labels.push(label);
        }
    }
    Batch::new(Tensor::new(vec![labels.len(), side, side], data)?, labels)
}
