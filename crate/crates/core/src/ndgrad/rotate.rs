use alloc::vec;

use super::Tensor;
use crate::{Error, Result};

/// Rotates a square `size x size` image counterclockwise by
/// `quarter_turns * 90` degrees, writing into `out`.
///
/// One counterclockwise quarter turn maps `out[i][j] = src[j][size - 1 - i]`,
/// so `[[a, b], [c, d]]` becomes `[[b, d], [a, c]]`.
pub fn rotate_image_into(src: &[f64], size: usize, quarter_turns: u8, out: &mut [f64]) {
    debug_assert_eq!(src.len(), size * size);
    debug_assert_eq!(out.len(), size * size);
    let n = size - 1;
    for i in 0..size {
        for j in 0..size {
            let (r, c) = match quarter_turns % 4 {
                0 => (i, j),
                1 => (j, n - i),
                2 => (n - i, n - j),
                _ => (n - j, i),
            };
            out[i * size + j] = src[r * size + c];
        }
    }
}

/// Rotates every image of a `[B, H, W]` batch by its own number of
/// counterclockwise quarter turns.
pub fn rotate90(batch: &Tensor, quarter_turns: &[u8]) -> Result<Tensor> {
    let [b, h, w] = *batch.shape() else {
        return Err(Error::ShapeMismatch(alloc::format!(
            "rotate90 expects [B, H, W], got {:?}",
            batch.shape()
        )));
    };
    if h != w {
        return Err(Error::NonSquare { h, w });
    }
    if quarter_turns.len() != b {
        return Err(Error::LengthMismatch(quarter_turns.len(), b));
    }
    let mut out = vec![0.0; batch.len()];
    let px = h * w;
    for ((src, dst), &k) in batch
        .data()
        .chunks_exact(px)
        .zip(out.chunks_exact_mut(px))
        .zip(quarter_turns)
    {
        rotate_image_into(src, h, k, dst);
    }
    Tensor::new(batch.shape().to_vec(), out)
}
