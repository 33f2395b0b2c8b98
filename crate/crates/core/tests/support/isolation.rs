//! Head isolation: a head whose loss weight is zero must not move.

use ltlab_core::model::{Block, Head, LossWeights, ModelParams};
use ltlab_core::synthlt::{generate_glyph_dataset, make_longtail_counts, LongTailDataset};
use ltlab_core::train::{train, Strategy, TrainConfig};

pub const ITERATIONS: usize = 100;

pub fn dataset() -> LongTailDataset {
    let counts = make_longtail_counts(12, 60, 3).unwrap();
    generate_glyph_dataset(&counts, 12, 0.25, 5).unwrap()
}

fn config(weights: LossWeights, iterations: usize) -> TrainConfig {
    TrainConfig {
        strategy: Strategy::CbsRrsSs,
        iterations,
        batch_size: 16,
        per_class_draw: 4,
        weights,
        hidden_dim: 16,
        feature_dim: 8,
        seed: 21,
        ..TrainConfig::default()
    }
}

/// Trains with `head`'s weight set to zero and reports whether its blocks are
/// bit-identical to initialisation while every other head moved.
pub fn head_is_frozen(data: &LongTailDataset, head: Head) -> Result<(), String> {
    let mut w = [1.0; 3];
    w[match head {
        Head::Cbs => 0,
        Head::Rrs => 1,
        Head::Ss => 2,
    }] = 0.0;
    let weights = LossWeights::new(w[0], w[1], w[2]).map_err(|e| e.to_string())?;
    let (before, _) = train(&config(weights, 0), data).map_err(|e| e.to_string())?;
    let (after, _) = train(&config(weights, ITERATIONS), data).map_err(|e| e.to_string())?;
    let bits = |p: &ModelParams, b: Block| p.block(b).data().iter().map(|v| v.to_bits()).collect::<Vec<_>>();
    for other in [Head::Cbs, Head::Rrs, Head::Ss] {
        let (wb, bb) = other.blocks();
        let same = bits(&before, wb) == bits(&after, wb) && bits(&before, bb) == bits(&after, bb);
        match (other == head, same) {
            (true, false) => return Err(format!("{head:?} head changed with zero weight")),
            (false, true) => return Err(format!("{other:?} head did not train")),
            _ => {}
        }
    }
    if bits(&before, Block::PhiW1) == bits(&after, Block::PhiW1) {
        return Err("feature extractor did not train".into());
    }
    Ok(())
}
