use alloc::format;
use alloc::vec::Vec;

use super::Tensor;
use crate::{Error, Result};

/// `lr0 * 0.5 * (1 + cos(pi * step / total))`
pub fn cosine_lr(step: usize, total: usize, lr0: f64) -> Result<f64> {
    if total == 0 {
        return Err(Error::InvalidConfig("cosine schedule needs total >= 1".into()));
    }
    if step > total {
        return Err(Error::ScheduleOverrun { step, total });
    }
    if step == total {
        return Ok(0.0);
    }
    let phase = core::f64::consts::PI * step as f64 / total as f64;
    Ok(lr0 * 0.5 * (1.0 + libm::cos(phase)))
}

/// SGD with heavy-ball momentum; one velocity buffer per parameter block.
/// Optional L2 decay is folded into the gradient of blocks that receive one.
#[derive(Debug, Clone)]
pub struct Sgd {
    pub momentum: f64,
    pub weight_decay: f64,
    velocity: Vec<Option<Tensor>>,
}

impl Sgd {
    pub fn new(momentum: f64, blocks: usize) -> Self {
        Self {
            momentum,
            weight_decay: 0.0,
            velocity: (0..blocks).map(|_| None).collect(),
        }
    }

    pub fn with_weight_decay(mut self, weight_decay: f64) -> Self {
        self.weight_decay = weight_decay;
        self
    }

    /// Applies one update. Blocks whose gradient is `None` and whose velocity
    /// has never been set are left untouched.
    pub fn step(&mut self, params: &mut [&mut Tensor], grads: &[Option<Tensor>], lr: f64) -> Result<()> {
        if params.len() != grads.len() || params.len() != self.velocity.len() {
            return Err(Error::LengthMismatch(params.len(), grads.len()));
        }
        for ((param, grad), vel) in params.iter_mut().zip(grads).zip(&mut self.velocity) {
            if let Some(g) = grad {
                if g.shape() != param.shape() {
                    return Err(Error::ShapeMismatch(format!(
                        "gradient {:?} for parameter {:?}",
                        g.shape(),
                        param.shape()
                    )));
                }
            }
            let wd = self.weight_decay;
            let decayed = |g: &Tensor, i: usize| {
                let gi = g.data()[i];
                if wd == 0.0 {
                    gi
                } else {
                    gi + wd * param.data()[i]
                }
            };
            let v = match (vel.as_mut(), grad) {
                (None, None) => continue,
                (None, Some(g)) => {
                    let mut v = g.clone();
                    for (i, vi) in v.data_mut().iter_mut().enumerate() {
                        *vi = decayed(g, i);
                    }
                    vel.insert(v)
                }
                (Some(v), g) => {
                    for (i, vi) in v.data_mut().iter_mut().enumerate() {
                        *vi = self.momentum * *vi + g.as_ref().map_or(0.0, |g| decayed(g, i));
                    }
                    v
                }
            };
            for (p, vi) in param.data_mut().iter_mut().zip(v.data()) {
                *p -= lr * vi;
            }
        }
        Ok(())
    }
}

/// Stateless single step: updates `velocity` and `param` in place.
pub fn sgd_step(param: &mut Tensor, grad: &Tensor, velocity: &mut Tensor, lr: f64, momentum: f64) -> Result<()> {
    if lr < 0.0 {
        return Err(Error::InvalidConfig(format!("negative learning rate {lr}")));
    }
    if param.shape() != grad.shape() || param.shape() != velocity.shape() {
        return Err(Error::ShapeMismatch(format!(
            "sgd: param {:?}, grad {:?}, velocity {:?}",
            param.shape(),
            grad.shape(),
            velocity.shape()
        )));
    }
    for ((p, g), v) in param.data_mut().iter_mut().zip(grad.data()).zip(velocity.data_mut()) {
        *v = momentum * *v + g;
        *p -= lr * *v;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn cosine_endpoints_and_midpoint() {
        assert_eq!(cosine_lr(0, 10, 0.1).unwrap(), 0.1);
        assert_eq!(cosine_lr(10, 10, 0.1).unwrap(), 0.0);
        assert_eq!(cosine_lr(5, 10, 0.1).unwrap(), 0.05);
        assert_eq!(
            cosine_lr(11, 10, 0.1),
            Err(Error::ScheduleOverrun { step: 11, total: 10 })
        );
        assert!(cosine_lr(0, 0, 0.1).is_err());
    }

    #[test]
    fn cosine_non_increasing() {
        let total = 997;
        let mut prev = f64::INFINITY;
        for t in 0..=total {
            let lr = cosine_lr(t, total, 0.3).unwrap();
            assert!(lr <= prev);
            prev = lr;
        }
    }

    #[test]
    fn zero_lr_leaves_params() {
        let mut p = Tensor::new(vec![2], vec![1.0, -1.0]).unwrap();
        let g = Tensor::new(vec![2], vec![5.0, 6.0]).unwrap();
        let mut v = Tensor::zeros(&[2]);
        sgd_step(&mut p, &g, &mut v, 0.0, 0.9).unwrap();
        assert_eq!(p.data(), &[1.0, -1.0]);
    }

    #[test]
    fn plain_gradient_step() {
        let mut p = Tensor::new(vec![2], vec![1.0, -1.0]).unwrap();
        let g = Tensor::new(vec![2], vec![0.25, 2.0]).unwrap();
        let mut v = Tensor::zeros(&[2]);
        sgd_step(&mut p, &g, &mut v, 1.0, 0.0).unwrap();
        assert_eq!(p.data(), &[0.75, -3.0]);
    }

    #[test]
    fn momentum_matches_unrolled_recurrence() {
        // v1 = g1, p1 = p0 - lr v1
        // v2 = m g1 + g2, p2 = p1 - lr v2
        // v3 = m^2 g1 + m g2 + g3, p3 = p2 - lr v3
        let (lr, m) = (0.1, 0.9);
        let gs = [0.5, -1.0, 2.0];
        let p0 = 3.0;
        let v1 = gs[0];
        let v2 = m * gs[0] + gs[1];
        let v3 = m * m * gs[0] + m * gs[1] + gs[2];
        let expected = p0 - lr * v1 - lr * v2 - lr * v3;

        let mut p = Tensor::new(vec![1], vec![p0]).unwrap();
        let mut v = Tensor::zeros(&[1]);
        let mut opt = Sgd::new(m, 1);
        let mut q = p.clone();
        for g in gs {
            let gt = Tensor::new(vec![1], vec![g]).unwrap();
            sgd_step(&mut p, &gt, &mut v, lr, m).unwrap();
            opt.step(&mut [&mut q], &[Some(gt)], lr).unwrap();
        }
        assert!((p.item() - expected).abs() < 1e-14);
        assert_eq!(p, q);
    }

    #[test]
    fn sgd_rejects_shape_mismatch() {
        let mut p = Tensor::zeros(&[2]);
        let g = Tensor::zeros(&[3]);
        let mut v = Tensor::zeros(&[2]);
        assert!(matches!(
            sgd_step(&mut p, &g, &mut v, 0.1, 0.9),
            Err(Error::ShapeMismatch(_))
        ));
    }

    #[test]
    fn untouched_block_stays_bit_identical() {
        let mut a = Tensor::new(vec![2], vec![0.1, 0.2]).unwrap();
        let mut b = Tensor::new(vec![1], vec![0.3]).unwrap();
        let before = b.clone();
        let mut opt = Sgd::new(0.9, 2);
        for _ in 0..5 {
            let g = Tensor::new(vec![2], vec![1.0, 1.0]).unwrap();
            opt.step(&mut [&mut a, &mut b], &[Some(g), None], 0.5).unwrap();
        }
        assert_eq!(b, before);
    }
}
