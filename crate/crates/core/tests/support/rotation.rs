//! Group laws of counterclockwise quarter turns, checked exactly against an
//! index-formula oracle.

use ltlab_core::ndgrad::{rotate90, rotate_image_into, Tensor};
use ltlab_core::seeded_rng;
use rand::Rng as _;

/// Counterclockwise quarter turn as `(row, col) -> (n - 1 - col, row)`.
fn oracle_turn(src: &[f64], n: usize) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    for r in 0..n {
        for c in 0..n {
            out[(n - 1 - c) * n + r] = src[r * n + c];
        }
    }
    out
}

fn oracle(src: &[f64], n: usize, turns: u8) -> Vec<f64> {
    (0..turns % 4).fold(src.to_vec(), |img, _| oracle_turn(&img, n))
}

fn rot(src: &[f64], n: usize, k: u8) -> Vec<f64> {
    let mut out = vec![0.0; n * n];
    rotate_image_into(src, n, k, &mut out);
    out
}

/// Checks identity, order four, composition, inverse, agreement with the
/// oracle and with the batched op over `cases` random images.
pub fn rotation_laws(cases: u64) -> Result<(), String> {
    for seed in 0..cases {
        let mut rng = seeded_rng(seed);
        let n = rng.random_range(1..9);
        let img: Vec<f64> = (0..n * n).map(|_| rng.random_range(-1.0..1.0)).collect();
        if rot(&img, n, 0) != img || rot(&rot(&img, n, 1), n, 3) != img {
            return Err(format!("case {seed}: identity or inverse failed"));
        }
        for a in 0..4u8 {
            if rot(&img, n, a) != oracle(&img, n, a) {
                return Err(format!("case {seed}: {a} turns disagree with the index formula"));
            }
            for b in 0..4u8 {
                if rot(&rot(&img, n, a), n, b) != rot(&img, n, (a + b) % 4) {
                    return Err(format!("case {seed}: composition {a} + {b} failed"));
                }
            }
        }
        if (0..4).fold(img.clone(), |x, _| rot(&x, n, 1)) != img {
            return Err(format!("case {seed}: four turns are not the identity"));
        }
        let turns: Vec<u8> = (0..3).map(|_| rng.random_range(0..4)).collect();
        let mut data = img.clone();
        data.extend(img.iter().map(|v| v * 2.0));
        data.extend(img.iter().map(|v| -v));
        let batch = Tensor::new(vec![3, n, n], data.clone()).unwrap();
        let rotated = rotate90(&batch, &turns).unwrap();
        for (i, &t) in turns.iter().enumerate() {
            let want = oracle(&data[i * n * n..(i + 1) * n * n], n, t);
            if rotated.data()[i * n * n..(i + 1) * n * n] != want[..] {
                return Err(format!("case {seed}: batched rotation of image {i} differs"));
            }
        }
    }
    Ok(())
}
