use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use super::{affine_forward, affine_input_grad, affine_weight_grad, Tensor};
use crate::{Error, Result};

/// Handle to a node recorded on a [`Tape`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Debug)]
enum Op {
    Leaf,
    Linear { x: Var, w: Var, b: Var },
    Relu { x: Var },
    SoftmaxCe {
        logits: Var,
        targets: Vec<usize>,
        /// Row-major softmax probabilities, `B x C`.
        probs: Vec<f64>,
        per_sample: Vec<f64>,
    },
    Sum { x: Var },
    Scale { x: Var, factor: f64 },
    Add { a: Var, b: Var },
}

#[derive(Debug)]
struct Node {
    value: Tensor,
    op: Op,
    requires_grad: bool,
}

/// Records primal values eagerly; [`Tape::backward`] replays the recording in
/// reverse to produce gradients for every node that requires them.
///
/// Nodes are appended in evaluation order, so index order is a topological
/// order of the graph.
#[derive(Debug, Default)]
pub struct Tape {
    nodes: Vec<Node>,
    spent: bool,
}

/// Gradients produced by one backward pass, indexed by [`Var`].
#[derive(Debug)]
pub struct Gradients {
    grads: Vec<Option<Tensor>>,
    shapes: Vec<Vec<usize>>,
}

impl Gradients {
    /// Gradient with respect to `var`; exactly zero when `var` does not
    /// influence the root.
    pub fn wrt(&self, var: Var) -> Tensor {
        match &self.grads[var.0] {
            Some(g) => g.clone(),
            None => Tensor::zeros(&self.shapes[var.0]),
        }
    }

    /// Moves the gradient out; `None` when `var` does not reach the root.
    pub fn take(&mut self, var: Var) -> Option<Tensor> {
        self.grads[var.0].take()
    }

    pub fn is_connected(&self, var: Var) -> bool {
        self.grads[var.0].is_some()
    }
}

impl Tape {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    fn push(&mut self, value: Tensor, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            value,
            op,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    /// Trainable leaf; gradients are accumulated for it.
    pub fn param(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, true)
    }

    /// Constant leaf (inputs, targets); no gradient is produced.
    pub fn input(&mut self, value: Tensor) -> Var {
        self.push(value, Op::Leaf, false)
    }

    pub fn value(&self, var: Var) -> &Tensor {
        &self.nodes[var.0].value
    }

    fn grad_flag(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    /// `input[B x D_in] * weight[D_out x D_in]^T + bias[D_out]`.
    pub fn linear(&mut self, x: Var, w: Var, b: Var) -> Result<Var> {
        let (batch, d_in) = self.value(x).matrix_dims("linear input")?;
        let (d_out, w_in) = self.value(w).matrix_dims("linear weight")?;
        let bias = self.value(b);
        if w_in != d_in || bias.len() != d_out || bias.rank() != 1 {
            return Err(Error::ShapeMismatch(format!(
                "linear: input {:?}, weight {:?}, bias {:?}",
                self.value(x).shape(),
                self.value(w).shape(),
                bias.shape()
            )));
        }
        let mut out = vec![0.0; batch * d_out];
        affine_forward(self.value(x).data(), self.value(w).data(), bias.data(), d_in, &mut out);
        let value = Tensor::new(vec![batch, d_out], out)?;
        let rg = self.grad_flag(&[x, w, b]);
        Ok(self.push(value, Op::Linear { x, w, b }, rg))
    }

    /// Elementwise `max(0, x)`; the subgradient at 0 is 0.
    pub fn relu(&mut self, x: Var) -> Var {
        let src = self.value(x);
        let data = src.data().iter().map(|&v| if v > 0.0 { v } else { 0.0 }).collect();
        let value = Tensor::new(src.shape().to_vec(), data).expect("same shape");
        let rg = self.grad_flag(&[x]);
        self.push(value, Op::Relu { x }, rg)
    }

    /// Mean over the batch of `-log softmax(logits)[target]`.
    pub fn softmax_cross_entropy(&mut self, logits: Var, targets: &[usize]) -> Result<Var> {
        let (batch, classes) = self.value(logits).matrix_dims("logits")?;
        if targets.len() != batch {
            return Err(Error::LengthMismatch(targets.len(), batch));
        }
        if let Some(&t) = targets.iter().find(|&&t| t >= classes) {
            return Err(Error::TargetOutOfRange { target: t, classes });
        }
        let z = self.value(logits).data();
        let mut probs = vec![0.0; batch * classes];
        let mut per_sample = Vec::with_capacity(batch);
        for ((row, p), &t) in z
            .chunks_exact(classes)
            .zip(probs.chunks_exact_mut(classes))
            .zip(targets)
        {
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut sum = 0.0;
            for (pi, &zi) in p.iter_mut().zip(row) {
                *pi = libm::exp(zi - max);
                sum += *pi;
            }
            for pi in p.iter_mut() {
                *pi /= sum;
            }
            per_sample.push(libm::log(sum) - (row[t] - max));
        }
        let mean = per_sample.iter().sum::<f64>() / batch as f64;
        let rg = self.grad_flag(&[logits]);
        Ok(self.push(
            Tensor::scalar(mean),
            Op::SoftmaxCe {
                logits,
                targets: targets.to_vec(),
                probs,
                per_sample,
            },
            rg,
        ))
    }

    /// Per-sample losses recorded by a cross-entropy node.
    pub fn per_sample_losses(&self, var: Var) -> Option<&[f64]> {
        match &self.nodes[var.0].op {
            Op::SoftmaxCe { per_sample, .. } => Some(per_sample),
            _ => None,
        }
    }

    /// Softmax probabilities recorded by a cross-entropy node.
    pub fn softmax_probs(&self, var: Var) -> Option<&[f64]> {
        match &self.nodes[var.0].op {
            Op::SoftmaxCe { probs, .. } => Some(probs),
            _ => None,
        }
    }

    pub fn sum(&mut self, x: Var) -> Var {
        let s = self.value(x).data().iter().sum();
        let rg = self.grad_flag(&[x]);
        self.push(Tensor::scalar(s), Op::Sum { x }, rg)
    }

    pub fn scale(&mut self, x: Var, factor: f64) -> Var {
        let src = self.value(x);
        let data = src.data().iter().map(|v| v * factor).collect();
        let value = Tensor::new(src.shape().to_vec(), data).expect("same shape");
        let rg = self.grad_flag(&[x]);
        self.push(value, Op::Scale { x, factor }, rg)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let (va, vb) = (self.value(a), self.value(b));
        if va.shape() != vb.shape() {
            return Err(Error::ShapeMismatch(format!(
                "add: {:?} vs {:?}",
                va.shape(),
                vb.shape()
            )));
        }
        let data = va.data().iter().zip(vb.data()).map(|(x, y)| x + y).collect();
        let value = Tensor::new(va.shape().to_vec(), data)?;
        let rg = self.grad_flag(&[a, b]);
        Ok(self.push(value, Op::Add { a, b }, rg))
    }

    /// Reverse-mode pass from a scalar `root`. Consumes the recording: a second
    /// call fails with [`Error::StaleTape`].
    pub fn backward(&mut self, root: Var) -> Result<Gradients> {
        if self.spent {
            return Err(Error::StaleTape);
        }
        let n = self.value(root).len();
        if n != 1 {
            return Err(Error::NonScalarRoot(n));
        }
        self.spent = true;

        let shapes: Vec<Vec<usize>> = self.nodes.iter().map(|n| n.value.shape().to_vec()).collect();
        let mut grads: Vec<Option<Tensor>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[root.0] = Some(Tensor::full(&shapes[root.0], 1.0));

        for i in (0..=root.0).rev() {
            if !self.nodes[i].requires_grad {
                continue;
            }
            let Some(upstream) = grads[i].take() else {
                continue;
            };
            match &self.nodes[i].op {
                Op::Leaf => {
                    grads[i] = Some(upstream);
                    continue;
                }
                Op::Linear { x, w, b } => {
                    let xv = &self.nodes[x.0].value;
                    let wv = &self.nodes[w.0].value;
                    let (batch, d_in) = (xv.shape()[0], xv.shape()[1]);
                    let d_out = wv.shape()[0];
                    let dy = upstream.data();
                    if self.nodes[x.0].requires_grad {
                        let mut dx = vec![0.0; batch * d_in];
                        affine_input_grad(dy, wv.data(), d_in, d_out, &mut dx);
                        accumulate(&mut grads, *x, &shapes, &dx);
                    }
                    if self.nodes[w.0].requires_grad {
                        let mut dw = vec![0.0; d_out * d_in];
                        affine_weight_grad(dy, xv.data(), d_in, d_out, &mut dw);
                        accumulate(&mut grads, *w, &shapes, &dw);
                    }
                    if self.nodes[b.0].requires_grad {
                        let mut db = vec![0.0; d_out];
                        for dy_row in dy.chunks_exact(d_out) {
                            for (s, g) in db.iter_mut().zip(dy_row) {
                                *s += g;
                            }
                        }
                        accumulate(&mut grads, *b, &shapes, &db);
                    }
                }
                Op::Relu { x } => {
                    let out = self.nodes[i].value.data();
                    let dx: Vec<f64> = upstream
                        .data()
                        .iter()
                        .zip(out)
                        .map(|(g, &y)| if y > 0.0 { *g } else { 0.0 })
                        .collect();
                    accumulate(&mut grads, *x, &shapes, &dx);
                }
                Op::SoftmaxCe {
                    logits,
                    targets,
                    probs,
                    ..
                } => {
                    let classes = shapes[logits.0][1];
                    let scale = upstream.item() / targets.len() as f64;
                    let mut dz = probs.clone();
                    for (row, &t) in dz.chunks_exact_mut(classes).zip(targets) {
                        row[t] -= 1.0;
                        for v in row.iter_mut() {
                            *v *= scale;
                        }
                    }
                    accumulate(&mut grads, *logits, &shapes, &dz);
                }
                Op::Sum { x } => {
                    let g = upstream.item();
                    let dx = vec![g; shapes[x.0].iter().product()];
                    accumulate(&mut grads, *x, &shapes, &dx);
                }
                Op::Scale { x, factor } => {
                    let dx: Vec<f64> = upstream.data().iter().map(|g| g * factor).collect();
                    accumulate(&mut grads, *x, &shapes, &dx);
                }
                Op::Add { a, b } => {
                    if self.nodes[a.0].requires_grad {
                        accumulate(&mut grads, *a, &shapes, upstream.data());
                    }
                    if self.nodes[b.0].requires_grad {
                        accumulate(&mut grads, *b, &shapes, upstream.data());
                    }
                }
            }
        }
        // Only leaves keep their gradient; intermediates were consumed above.
        Ok(Gradients { grads, shapes })
    }
}

fn accumulate(grads: &mut [Option<Tensor>], target: Var, shapes: &[Vec<usize>], delta: &[f64]) {
    match &mut grads[target.0] {
        Some(g) => {
            for (gi, d) in g.data_mut().iter_mut().zip(delta) {
                *gi += d;
            }
        }
        slot @ None => {
            *slot = Some(Tensor::new(shapes[target.0].clone(), delta.to_vec()).expect("shape"));
        }
    }
}
