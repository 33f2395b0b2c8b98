use alloc::string::String;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid count bounds: {0}")]
    InvalidBounds(String),
    #[error("invalid shot thresholds: t_many={t_many} must exceed t_low={t_low} >= 1")]
    InvalidThresholds { t_many: u32, t_low: u32 },
    #[error("glyph capacity exceeded: {requested} classes requested, only {available} distinct glyphs fit a {size}x{size} grid")]
    GlyphCapacity {
        requested: usize,
        available: usize,
        size: usize,
    },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("target {target} out of range for {classes} classes")]
    TargetOutOfRange { target: usize, classes: usize },
    #[error("backward requires a scalar root, got {0} elements")]
    NonScalarRoot(usize),
    #[error("tape already consumed by a backward pass")]
    StaleTape,
    #[error("schedule step {step} exceeds total {total}")]
    ScheduleOverrun { step: usize, total: usize },
    #[error("images are not square ({h}x{w})")]
    NonSquare { h: usize, w: usize },
    #[error("sampler configuration: {0}")]
    Sampler(String),
    #[error("invalid loss weights: {0}")]
    InvalidWeights(String),
    #[error("invalid training configuration: {0}")]
    InvalidConfig(String),
    #[error("non-finite loss at iteration {iteration}: {detail}")]
    NonFiniteLoss { iteration: usize, detail: String },
    #[error("class count mismatch: model has {model}, data has {data}")]
    ClassCountMismatch { model: usize, data: usize },
    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),
    #[error("empty class group: {0}")]
    EmptyGroup(String),
    #[error("invalid dataset: {0}")]
    InvalidDataset(String),
}
