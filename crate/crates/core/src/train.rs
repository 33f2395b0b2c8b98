//! Training regimes: the joint CBS + RRS (+ rotation) loop, the single-sampler
//! baselines, stage-wise RRS-then-CBS fine-tuning and rotation augmentation.

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::evalkit::evaluate;
use crate::model::{
    joint_loss, make_rotation_batch, rotation_augment, Batch, BatchTriple, Block, Head, LossWeights, ModelParams,
    ModelShape,
};
use crate::ndgrad::{cosine_lr, Sgd, Tape};
use crate::sampling::{ClassBalancedSampler, RandomSampler, SamplerMode};
use crate::synthlt::{LongTailDataset, ShotSplit};
use crate::{derive_seed, seeded_rng, Error, Result};

const STREAM_INIT: u64 = 1;
const STREAM_CBS: u64 = 2;
const STREAM_RRS: u64 = 3;
const STREAM_ROTATION: u64 = 4;
const STREAM_REINIT: u64 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    RrsOnly,
    CbsOnly,
    CbsRrs,
    CbsRrsSs,
    FtRrsThenCbs,
    RotAugment,
}

impl Strategy {
    pub const ALL: [Strategy; 6] = [
        Strategy::RrsOnly,
        Strategy::CbsOnly,
        Strategy::CbsRrs,
        Strategy::CbsRrsSs,
        Strategy::FtRrsThenCbs,
        Strategy::RotAugment,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::RrsOnly => "rrs_only",
            Strategy::CbsOnly => "cbs_only",
            Strategy::CbsRrs => "cbs_rrs",
            Strategy::CbsRrsSs => "cbs_rrs_ss",
            Strategy::FtRrsThenCbs => "ft_rrs_cbs",
            Strategy::RotAugment => "rot_augment",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|s| s.name() == name)
    }

    pub fn uses_cbs(self) -> bool {
        !matches!(self, Strategy::RrsOnly)
    }

    pub fn uses_rrs(self) -> bool {
        !matches!(self, Strategy::CbsOnly)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub strategy: Strategy,
    /// Total iterations `M`.
    pub iterations: usize,
    /// Mini-batch size `S` of each sampler.
    pub batch_size: usize,
    /// Images per sampled class `Z` under CBS.
    pub per_class_draw: usize,
    pub weights: LossWeights,
    pub lr0: f64,
    pub momentum: f64,
    /// L2 penalty added to the gradient of every updated block.
    pub weight_decay: f64,
    pub seed: u64,
    /// Iterations between evaluation passes; 0 evaluates only at the end.
    pub eval_every: usize,
    /// Share of `M` spent in the RRS stage of the stage-wise baseline.
    pub stage1_fraction: f64,
    /// Peak learning rate of the CBS fine-tuning stage as a fraction of `lr0`.
    pub stage2_lr_fraction: f64,
    pub hidden_dim: usize,
    pub feature_dim: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::CbsRrsSs,
            iterations: 4000,
            batch_size: 64,
            per_class_draw: 4,
            weights: LossWeights::default(),
            lr0: 0.1,
            momentum: 0.9,
            weight_decay: 5e-3,
            seed: 0,
            eval_every: 0,
            stage1_fraction: 0.5,
            stage2_lr_fraction: 0.1,
            hidden_dim: 64,
            feature_dim: 64,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        if self.batch_size == 0 {
            return bad("batch size must be positive".into());
        }
        if self.strategy.uses_cbs() && (self.per_class_draw == 0 || !self.batch_size.is_multiple_of(self.per_class_draw)) {
            return bad(format!(
                "Z={} must divide S={} when class-balanced sampling is active",
                self.per_class_draw, self.batch_size
            ));
        }
        if !(self.stage1_fraction > 0.0 && self.stage1_fraction < 1.0) {
            return bad(format!("stage1_fraction {} must lie in (0, 1)", self.stage1_fraction));
        }
        if !(self.stage2_lr_fraction > 0.0 && self.stage2_lr_fraction.is_finite()) {
            return bad(format!("stage2_lr_fraction {} must be positive", self.stage2_lr_fraction));
        }
        if !(self.lr0 >= 0.0 && self.lr0.is_finite()) {
            return bad(format!("lr0 {} must be finite and >= 0", self.lr0));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad(format!("momentum {} must lie in [0, 1)", self.momentum));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return bad(format!("weight_decay {} must be finite and >= 0", self.weight_decay));
        }
        if self.hidden_dim == 0 || self.feature_dim == 0 {
            return bad("hidden and feature widths must be positive".into());
        }
        self.weights.validate()
    }

    pub fn model_shape(&self, data: &LongTailDataset) -> ModelShape {
        ModelShape {
            input_dim: data.pixels_per_image(),
            hidden_dim: self.hidden_dim,
            feature_dim: self.feature_dim,
            num_classes: data.num_classes(),
        }
    }

    /// Loss weights actually applied: single-sampler strategies put weight 1
    /// on the primary head only; the joint strategies without rotation drop
    /// the third term.
    pub fn active_weights(&self) -> LossWeights {
        let w = self.weights;
        match self.strategy {
            Strategy::RrsOnly | Strategy::CbsOnly | Strategy::FtRrsThenCbs => LossWeights {
                lambda1: 1.0,
                lambda2: 0.0,
                lambda3: 0.0,
            },
            Strategy::CbsRrs | Strategy::RotAugment => LossWeights { lambda3: 0.0, ..w },
            Strategy::CbsRrsSs => w,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub lr: f64,
    /// Loss of the head fed by the CBS batch (0 when no CBS batch is used).
    pub loss_cbs: f64,
    /// Loss of the head fed by the RRS batch (0 when no RRS batch is used).
    pub loss_rrs: f64,
    pub loss_ss: f64,
    pub loss_final: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub iteration: usize,
    pub acc_overall: f64,
    pub acc_many: Option<f64>,
    pub acc_medium: Option<f64>,
    pub acc_low: Option<f64>,
}

/// Per-class sums of per-sample training losses within one batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassLosses {
    pub sums: Vec<f64>,
    pub counts: Vec<u32>,
}

impl ClassLosses {
    fn from_batch(num_classes: usize, labels: &[usize], losses: &[f64]) -> Self {
        let mut sums = vec![0.0; num_classes];
        let mut counts = vec![0u32; num_classes];
        for (&y, &l) in labels.iter().zip(losses) {
            sums[y] += l;
            counts[y] += 1;
        }
        Self { sums, counts }
    }

    /// Sum and count restricted to `classes`.
    pub fn restricted(&self, classes: &[usize]) -> (f64, u32) {
        classes
            .iter()
            .fold((0.0, 0), |(s, n), &c| (s + self.sums[c], n + self.counts[c]))
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub iterations: Vec<IterationRecord>,
    pub evals: Vec<EvalRecord>,
    /// Per-iteration class losses of the head fed by the CBS batch.
    pub cbs_class_losses: Vec<Option<ClassLosses>>,
    /// Per-iteration class losses of the head fed by the RRS batch.
    pub rrs_class_losses: Vec<Option<ClassLosses>>,
}

impl TrainLog {
    pub fn len(&self) -> usize {
        self.iterations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.iterations.is_empty()
    }

    pub fn class_losses(&self, mode: SamplerMode) -> &[Option<ClassLosses>] {
        match mode {
            SamplerMode::Cbs => &self.cbs_class_losses,
            SamplerMode::Rrs => &self.rrs_class_losses,
        }
    }

    /// Pooled mean per-sample loss of `classes` over `range` of iterations.
    pub fn pooled_class_loss(
        &self,
        mode: SamplerMode,
        classes: &[usize],
        range: core::ops::Range<usize>,
    ) -> Option<f64> {
        let (s, n) = self.class_losses(mode)[range]
            .iter()
            .flatten()
            .map(|cl| cl.restricted(classes))
            .fold((0.0, 0u64), |(s, n), (ds, dn)| (s + ds, n + u64::from(dn)));
        (n > 0).then(|| s / n as f64)
    }
}

/// Optional evaluation target during training.
#[derive(Debug, Clone, Copy)]
pub struct EvalTarget<'a> {
    pub data: &'a LongTailDataset,
    pub split: &'a ShotSplit,
}

/// How one stage feeds the heads.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Feed {
    /// `h` on RRS batches.
    RrsPrimary,
    /// `h` on CBS batches.
    CbsPrimary,
    /// `h` on CBS, `h_a` on RRS, optional rotation head.
    Joint { rotation: bool, augment: bool },
}

struct Stage {
    feed: Feed,
    iterations: usize,
    lr0: f64,
    weights: LossWeights,
}

struct Runner<'a> {
    data: &'a LongTailDataset,
    cbs: Option<ClassBalancedSampler>,
    rrs: Option<RandomSampler>,
    rot_rng: crate::Rng,
    momentum: f64,
    weight_decay: f64,
    eval_every: usize,
    eval: Option<EvalTarget<'a>>,
    log: TrainLog,
    step: usize,
}

impl<'a> Runner<'a> {
    fn new(config: &TrainConfig, data: &'a LongTailDataset, eval: Option<EvalTarget<'a>>) -> Result<Self> {
        let cbs = if config.strategy.uses_cbs() {
            Some(ClassBalancedSampler::new(
                data.indices_by_class(),
                config.batch_size,
                config.per_class_draw,
                derive_seed(config.seed, STREAM_CBS),
            )?)
        } else {
            None
        };
        let rrs = if config.strategy.uses_rrs() {
            Some(RandomSampler::new(
                data.len(),
                config.batch_size,
                derive_seed(config.seed, STREAM_RRS),
            )?)
        } else {
            None
        };
        Ok(Self {
            data,
            cbs,
            rrs,
            rot_rng: seeded_rng(derive_seed(config.seed, STREAM_ROTATION)),
            momentum: config.momentum,
            weight_decay: config.weight_decay,
            eval_every: config.eval_every,
            eval,
            log: TrainLog::default(),
            step: 0,
        })
    }

    fn draw(&mut self, mode: SamplerMode) -> Result<Batch> {
        let idx = match mode {
            SamplerMode::Cbs => self.cbs.as_mut().map(|s| s.next_batch()),
            SamplerMode::Rrs => self.rrs.as_mut().map(|s| s.next_batch()),
        }
        .ok_or_else(|| Error::InvalidConfig(format!("{mode:?} sampler not configured")))?;
        let (images, labels) = self.data.gather(&idx);
        Batch::new(images, labels)
    }

    fn run_stage(&mut self, params: &mut ModelParams, stage: &Stage) -> Result<()> {
        let mut opt = Sgd::new(self.momentum, Block::ALL.len()).with_weight_decay(self.weight_decay);
        let c = params.num_classes();
        for t in 0..stage.iterations {
            let lr = cosine_lr(t, stage.iterations, stage.lr0)?;
            let mut triple = BatchTriple::default();
            let mut cbs_labels = None;
            let mut rrs_labels = None;
            match stage.feed {
                Feed::RrsPrimary => {
                    let b = self.draw(SamplerMode::Rrs)?;
                    rrs_labels = Some(b.labels.clone());
                    triple.primary = Some(b);
                }
                Feed::CbsPrimary => {
                    let b = self.draw(SamplerMode::Cbs)?;
                    cbs_labels = Some(b.labels.clone());
                    triple.primary = Some(b);
                }
                Feed::Joint { rotation, augment } => {
                    let bc = self.draw(SamplerMode::Cbs)?;
                    let br = self.draw(SamplerMode::Rrs)?;
                    if rotation {
                        triple.rotation = Some(make_rotation_batch(&bc, &br, &mut self.rot_rng)?);
                    }
                    let (bc, br) = if augment {
                        (rotation_augment(&bc)?, rotation_augment(&br)?)
                    } else {
                        (bc, br)
                    };
                    cbs_labels = Some(bc.labels.clone());
                    rrs_labels = Some(br.labels.clone());
                    triple.primary = Some(bc);
                    triple.auxiliary = Some(br);
                }
            }

            let mut tape = Tape::new();
            let bound = params.bind(&mut tape);
            let loss = joint_loss(&mut tape, &bound, &triple, &stage.weights)?;
            let value = |v: Option<crate::ndgrad::Var>| v.map_or(0.0, |v| tape.value(v).item());
            let (l_primary, l_aux, l_rot) = (value(loss.primary), value(loss.auxiliary), value(loss.rotation));
            let l_final = tape.value(loss.total).item();
            if !l_final.is_finite() {
                return Err(Error::NonFiniteLoss {
                    iteration: self.step,
                    detail: format!(
                        "lr={lr} primary={l_primary} auxiliary={l_aux} rotation={l_rot} final={l_final}"
                    ),
                });
            }
            let (loss_cbs, loss_rrs) = match stage.feed {
                Feed::RrsPrimary => (0.0, l_primary),
                Feed::CbsPrimary => (l_primary, 0.0),
                Feed::Joint { .. } => (l_primary, l_aux),
            };
            let losses_of = |v: Option<crate::ndgrad::Var>, labels: &Option<Vec<usize>>| match (v, labels) {
                (Some(v), Some(labels)) => tape
                    .per_sample_losses(v)
                    .map(|l| ClassLosses::from_batch(c, labels, l)),
                _ => None,
            };
            let (cbs_node, rrs_node) = match stage.feed {
                Feed::RrsPrimary => (None, loss.primary),
                Feed::CbsPrimary => (loss.primary, None),
                Feed::Joint { .. } => (loss.primary, loss.auxiliary),
            };
            let cbs_cl = losses_of(cbs_node, &cbs_labels);
            let rrs_cl = losses_of(rrs_node, &rrs_labels);

            let mut grads = tape.backward(loss.total)?;
            let block_grads: Vec<_> = Block::ALL.iter().map(|&b| grads.take(bound.var(b))).collect();
            opt.step(&mut params.blocks_mut(), &block_grads, lr)?;

            self.log.iterations.push(IterationRecord {
                iteration: self.step,
                lr,
                loss_cbs,
                loss_rrs,
                loss_ss: l_rot,
                loss_final: l_final,
            });
            self.log.cbs_class_losses.push(cbs_cl);
            self.log.rrs_class_losses.push(rrs_cl);
            self.step += 1;
            if self.eval_every > 0 && self.step.is_multiple_of(self.eval_every) {
                self.evaluate(params)?;
            }
        }
        Ok(())
    }

    fn evaluate(&mut self, params: &ModelParams) -> Result<()> {
        let Some(target) = self.eval else { return Ok(()) };
        if self.log.evals.last().is_some_and(|e| e.iteration == self.step) {
            return Ok(());
        }
        let r = evaluate(params, target.data, target.split)?;
        self.log.evals.push(EvalRecord {
            iteration: self.step,
            acc_overall: r.acc_overall,
            acc_many: r.acc_many,
            acc_medium: r.acc_medium,
            acc_low: r.acc_low,
        });
        Ok(())
    }
}

fn init_params(config: &TrainConfig, data: &LongTailDataset) -> Result<ModelParams> {
    config.validate()?;
    ModelParams::init(
        config.model_shape(data),
        &mut seeded_rng(derive_seed(config.seed, STREAM_INIT)),
    )
}

/// Runs any strategy for `config.iterations` iterations.
pub fn train(config: &TrainConfig, data: &LongTailDataset) -> Result<(ModelParams, TrainLog)> {
    train_with_eval(config, data, None)
}

/// [`train`] with periodic evaluation on a held-out set.
pub fn train_with_eval(
    config: &TrainConfig,
    data: &LongTailDataset,
    eval: Option<EvalTarget<'_>>,
) -> Result<(ModelParams, TrainLog)> {
    match config.strategy {
        Strategy::FtRrsThenCbs => return train_stagewise_with_eval(config, data, eval),
        Strategy::RotAugment => return train_rotation_augmentation_with_eval(config, data, eval),
        _ => {}
    }
    let mut params = init_params(config, data)?;
    let feed = match config.strategy {
        Strategy::RrsOnly => Feed::RrsPrimary,
        Strategy::CbsOnly => Feed::CbsPrimary,
        Strategy::CbsRrs => Feed::Joint {
            rotation: false,
            augment: false,
        },
        Strategy::CbsRrsSs => Feed::Joint {
            rotation: true,
            augment: false,
        },
        Strategy::FtRrsThenCbs | Strategy::RotAugment => unreachable!(),
    };
    run_stages(
        config,
        data,
        eval,
        &mut params,
        &[Stage {
            feed,
            iterations: config.iterations,
            lr0: config.lr0,
            weights: config.active_weights(),
        }],
        None,
    )
    .map(|log| (params, log))
}

fn run_stages(
    config: &TrainConfig,
    data: &LongTailDataset,
    eval: Option<EvalTarget<'_>>,
    params: &mut ModelParams,
    stages: &[Stage],
    reinit_between: Option<Head>,
) -> Result<TrainLog> {
    if config.iterations == 0 {
        return Ok(TrainLog::default());
    }
    let mut runner = Runner::new(config, data, eval)?;
    let mut reinit_rng = seeded_rng(derive_seed(config.seed, STREAM_REINIT));
    for (i, stage) in stages.iter().enumerate() {
        if i > 0 {
            if let Some(head) = reinit_between {
                params.reinit_head(head, &mut reinit_rng);
            }
        }
        runner.run_stage(params, stage)?;
    }
    runner.evaluate(params)?;
    Ok(runner.log)
}

/// Iterations of the RRS stage: `round(fraction * M)`, keeping at least one
/// iteration in each stage when `M >= 2`.
pub fn stage1_iterations(iterations: usize, fraction: f64) -> usize {
    if iterations < 2 {
        return iterations;
    }
    let m1 = libm::round(fraction * iterations as f64) as usize;
    m1.clamp(1, iterations - 1)
}

/// RRS-only training followed by CBS fine-tuning with a freshly initialised
/// primary head; the feature extractor is carried over. Each stage runs its
/// own cosine schedule, the second one peaking at `stage2_lr_fraction * lr0`.
pub fn train_stagewise(config: &TrainConfig, data: &LongTailDataset) -> Result<(ModelParams, TrainLog)> {
    train_stagewise_with_eval(config, data, None)
}

pub fn train_stagewise_with_eval(
    config: &TrainConfig,
    data: &LongTailDataset,
    eval: Option<EvalTarget<'_>>,
) -> Result<(ModelParams, TrainLog)> {
    if config.strategy != Strategy::FtRrsThenCbs {
        return Err(Error::InvalidConfig(format!(
            "stage-wise training needs strategy ft_rrs_cbs, got {}",
            config.strategy.name()
        )));
    }
    let mut params = init_params(config, data)?;
    let m1 = stage1_iterations(config.iterations, config.stage1_fraction);
    let one = LossWeights {
        lambda1: 1.0,
        lambda2: 0.0,
        lambda3: 0.0,
    };
    let stages = [
        Stage {
            feed: Feed::RrsPrimary,
            iterations: m1,
            lr0: config.lr0,
            weights: one,
        },
        Stage {
            feed: Feed::CbsPrimary,
            iterations: config.iterations - m1,
            lr0: config.lr0 * config.stage2_lr_fraction,
            weights: one,
        },
    ];
    let stages: Vec<Stage> = stages.into_iter().filter(|s| s.iterations > 0).collect();
    run_stages(config, data, eval, &mut params, &stages, Some(Head::Cbs)).map(|log| (params, log))
}

/// The CBS + RRS loop where every image is replaced by its four rotations,
/// all carrying the original class label. No rotation head is trained.
pub fn train_rotation_augmentation(config: &TrainConfig, data: &LongTailDataset) -> Result<(ModelParams, TrainLog)> {
    train_rotation_augmentation_with_eval(config, data, None)
}

pub fn train_rotation_augmentation_with_eval(
    config: &TrainConfig,
    data: &LongTailDataset,
    eval: Option<EvalTarget<'_>>,
) -> Result<(ModelParams, TrainLog)> {
    if config.strategy != Strategy::RotAugment {
        return Err(Error::InvalidConfig(format!(
            "rotation augmentation needs strategy rot_augment, got {}",
            config.strategy.name()
        )));
    }
    let mut params = init_params(config, data)?;
    let stage = Stage {
        feed: Feed::Joint {
            rotation: false,
            augment: true,
        },
        iterations: config.iterations,
        lr0: config.lr0,
        weights: config.active_weights(),
    };
    run_stages(config, data, eval, &mut params, &[stage], None).map(|log| (params, log))
}

/// Head and tail class groups for loss diagnostics.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClassGroups {
    pub head: Vec<usize>,
    pub tail: Vec<usize>,
}

impl ClassGroups {
    /// Many-shot classes as head, low-shot classes as tail.
    pub fn from_split(split: &ShotSplit) -> Self {
        Self {
            head: split.many.iter().copied().collect(),
            tail: split.low.iter().copied().collect(),
        }
    }

    /// The `n` most and `n` least frequent classes.
    pub fn extremes(train_counts: &[u32], n: usize) -> Self {
        let order = crate::evalkit::frequency_order(train_counts);
        let n = n.min(order.len());
        Self {
            head: order[..n].to_vec(),
            tail: order[order.len() - n..].to_vec(),
        }
    }
}

/// Smoothed loss traces of the head and tail groups for each sampler. Entry
/// `i` covers iterations `[i * window, (i + 1) * window)`; `None` marks a
/// window with no sample of the group.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupLossTraces {
    pub window: usize,
    pub cbs_head: Vec<Option<f64>>,
    pub cbs_tail: Vec<Option<f64>>,
    pub rrs_head: Vec<Option<f64>>,
    pub rrs_tail: Vec<Option<f64>>,
    /// Group samples contributing to each window.
    pub cbs_head_samples: Vec<u64>,
    pub cbs_tail_samples: Vec<u64>,
    pub rrs_head_samples: Vec<u64>,
    pub rrs_tail_samples: Vec<u64>,
}

/// Per-iteration group mean losses (mean over the group's samples in that
/// batch) averaged over trailing windows of `window` iterations, reported at
/// the end of each full window.
fn smoothed_trace(per_iter: &[Option<ClassLosses>], classes: &[usize], window: usize) -> (Vec<Option<f64>>, Vec<u64>) {
    per_iter
        .chunks_exact(window)
        .map(|chunk| {
            let mut acc = 0.0;
            let mut iters = 0u32;
            let mut samples = 0u64;
            for cl in chunk.iter().flatten() {
                let (s, n) = cl.restricted(classes);
                if n > 0 {
                    acc += s / f64::from(n);
                    iters += 1;
                    samples += u64::from(n);
                }
            }
            ((iters > 0).then(|| acc / f64::from(iters)), samples)
        })
        .unzip()
}

pub fn log_group_losses(log: &TrainLog, groups: &ClassGroups, window: usize) -> Result<GroupLossTraces> {
    if groups.head.is_empty() {
        return Err(Error::EmptyGroup("head".into()));
    }
    if groups.tail.is_empty() {
        return Err(Error::EmptyGroup("tail".into()));
    }
    if window == 0 {
        return Err(Error::InvalidConfig("smoothing window must be positive".into()));
    }
    let (cbs_head, cbs_head_samples) = smoothed_trace(&log.cbs_class_losses, &groups.head, window);
    let (cbs_tail, cbs_tail_samples) = smoothed_trace(&log.cbs_class_losses, &groups.tail, window);
    let (rrs_head, rrs_head_samples) = smoothed_trace(&log.rrs_class_losses, &groups.head, window);
    let (rrs_tail, rrs_tail_samples) = smoothed_trace(&log.rrs_class_losses, &groups.tail, window);
    Ok(GroupLossTraces {
        window,
        cbs_head,
        cbs_tail,
        rrs_head,
        rrs_tail,
        cbs_head_samples,
        cbs_tail_samples,
        rrs_head_samples,
        rrs_tail_samples,
    })
}
