//! Dense 64-bit tensors, a recording tape with reverse-mode gradients, SGD
//! with momentum, the cosine learning-rate schedule and exact quarter-turn
//! rotation of square images.

mod optim;
mod rotate;
mod tape;
mod tensor;

pub use optim::{cosine_lr, sgd_step, Sgd};
pub use rotate::{rotate90, rotate_image_into};
pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;

const LANES: usize = 4;

#[inline(always)]
fn reduce(acc: [f64; LANES], tail: f64) -> f64 {
    (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail
}

/// Dot product with four lane accumulators. Every kernel below sums in the
/// same lane order, so a row's result does not depend on how rows are blocked.
#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let split = a.len() / LANES * LANES;
    let mut acc = [0.0; LANES];
    for (ca, cb) in a[..split].chunks_exact(LANES).zip(b[..split].chunks_exact(LANES)) {
        for l in 0..LANES {
            acc[l] += ca[l] * cb[l];
        }
    }
    let mut tail = 0.0;
    for j in split..a.len() {
        tail += a[j] * b[j];
    }
    reduce(acc, tail)
}

/// Four dot products of `x0..x3` against the same `w`.
#[inline]
fn dot4(x: [&[f64]; 4], w: &[f64]) -> [f64; 4] {
    let n = w.len();
    let split = n / LANES * LANES;
    let mut acc = [[0.0; LANES]; 4];
    let mut j = 0;
    while j < split {
        let wc = &w[j..j + LANES];
        for r in 0..4 {
            let xc = &x[r][j..j + LANES];
            for l in 0..LANES {
                acc[r][l] += xc[l] * wc[l];
            }
        }
        j += LANES;
    }
    let mut out = [0.0; 4];
    for r in 0..4 {
        let mut tail = 0.0;
        for j in split..n {
            tail += x[r][j] * w[j];
        }
        out[r] = reduce(acc[r], tail);
    }
    out
}

/// `out[b, o] = x[b, :] . w[o, :] + bias[o]`
pub(crate) fn affine_forward(x: &[f64], w: &[f64], bias: &[f64], d_in: usize, out: &mut [f64]) {
    let d_out = bias.len();
    let batch = out.len() / d_out.max(1);
    let blocked = batch / 4 * 4;
    let mut b = 0;
    while b < blocked {
        let rows = [
            &x[b * d_in..(b + 1) * d_in],
            &x[(b + 1) * d_in..(b + 2) * d_in],
            &x[(b + 2) * d_in..(b + 3) * d_in],
            &x[(b + 3) * d_in..(b + 4) * d_in],
        ];
        for o in 0..d_out {
            let v = dot4(rows, &w[o * d_in..(o + 1) * d_in]);
            for r in 0..4 {
                out[(b + r) * d_out + o] = v[r] + bias[o];
            }
        }
        b += 4;
    }
    for b in blocked..batch {
        let row = &x[b * d_in..(b + 1) * d_in];
        for o in 0..d_out {
            out[b * d_out + o] = dot(row, &w[o * d_in..(o + 1) * d_in]) + bias[o];
        }
    }
}

/// `y += g[0] * x[0] + g[1] * x[1] + g[2] * x[2] + g[3] * x[3]`
#[inline]
fn axpy4(g: [f64; 4], x: [&[f64]; 4], y: &mut [f64]) {
    for (j, yj) in y.iter_mut().enumerate() {
        *yj += (g[0] * x[0][j] + g[1] * x[1][j]) + (g[2] * x[2][j] + g[3] * x[3][j]);
    }
}

/// `dw[o, :] += sum_b dy[b, o] * x[b, :]`
pub(crate) fn affine_weight_grad(dy: &[f64], x: &[f64], d_in: usize, d_out: usize, dw: &mut [f64]) {
    let batch = dy.len() / d_out;
    let blocked = batch / 4 * 4;
    let xrow = |b: usize| &x[b * d_in..(b + 1) * d_in];
    for o in 0..d_out {
        let row = &mut dw[o * d_in..(o + 1) * d_in];
        let mut b = 0;
        while b < blocked {
            let g = [dy[b * d_out + o], dy[(b + 1) * d_out + o], dy[(b + 2) * d_out + o], dy[(b + 3) * d_out + o]];
            if g != [0.0; 4] {
                axpy4(g, [xrow(b), xrow(b + 1), xrow(b + 2), xrow(b + 3)], row);
            }
            b += 4;
        }
        for b in blocked..batch {
            let g = dy[b * d_out + o];
            if g != 0.0 {
                axpy(g, xrow(b), row);
            }
        }
    }
}

/// `dx[b, :] += sum_o dy[b, o] * w[o, :]`
pub(crate) fn affine_input_grad(dy: &[f64], w: &[f64], d_in: usize, d_out: usize, dx: &mut [f64]) {
    let blocked = d_out / 4 * 4;
    let wrow = |o: usize| &w[o * d_in..(o + 1) * d_in];
    for (dy_row, dx_row) in dy.chunks_exact(d_out).zip(dx.chunks_exact_mut(d_in)) {
        let mut o = 0;
        while o < blocked {
            let g = [dy_row[o], dy_row[o + 1], dy_row[o + 2], dy_row[o + 3]];
            if g != [0.0; 4] {
                axpy4(g, [wrow(o), wrow(o + 1), wrow(o + 2), wrow(o + 3)], dx_row);
            }
            o += 4;
        }
        for o in blocked..d_out {
            if dy_row[o] != 0.0 {
                axpy(dy_row[o], wrow(o), dx_row);
            }
        }
    }
}

/// `y += alpha * x`
#[inline]
pub(crate) fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}
