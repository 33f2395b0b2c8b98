//! Central finite-difference checks of every differentiable tape op and of
//! the composite joint objective. Shared by the core tests and the acceptance
//! suite.

use ltlab_core::model::{joint_loss, Batch, BatchTriple, Block, LossWeights, ModelParams, ModelShape, ROTATIONS};
use ltlab_core::ndgrad::{Tape, Tensor, Var};
use ltlab_core::{seeded_rng, Rng};
use rand::Rng as _;

pub const CASES: u64 = 30;
pub const STEP: f64 = 1e-5;
pub const TOLERANCE: f64 = 1e-6;

/// `||a - n|| / (||a|| + ||n||)`, zero when both vanish.
fn relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    let norm = |v: &mut dyn Iterator<Item = f64>| v.map(|x| x * x).sum::<f64>().sqrt();
    let diff = norm(&mut analytic.iter().zip(numeric).map(|(a, n)| a - n));
    let scale = norm(&mut analytic.iter().copied()) + norm(&mut numeric.iter().copied());
    if scale == 0.0 {
        0.0
    } else {
        diff / scale
    }
}

fn random_tensor(rng: &mut Rng, shape: &[usize], sd: f64) -> Tensor {
    let n = shape.iter().product();
    Tensor::new(shape.to_vec(), (0..n).map(|_| rng.random_range(-sd..sd)).collect()).unwrap()
}

/// Values bounded away from zero so no relu kink lies within `STEP`.
fn off_kink_tensor(rng: &mut Rng, shape: &[usize]) -> Tensor {
    let mut t = random_tensor(rng, shape, 1.0);
    for v in t.data_mut() {
        if v.abs() < 0.05 {
            *v += 0.1f64.copysign(*v);
        }
    }
    t
}

type Build<'a> = &'a dyn Fn(&mut Tape, &[Tensor]) -> (Vec<Var>, Var);

/// Compares tape gradients of the graph recorded by `build` against central
/// differences, returning the worst relative error over all inputs. `build`
/// records `inputs` as leaves and returns them with the scalar root.
fn check_graph(inputs: &[Tensor], build: Build) -> f64 {
    let mut tape = Tape::new();
    let (vars, root) = build(&mut tape, inputs);
    let grads = tape.backward(root).unwrap();

    let eval = |perturbed: &[Tensor]| {
        let mut tape = Tape::new();
        let (_, root) = build(&mut tape, perturbed);
        tape.value(root).item()
    };
    let mut worst: f64 = 0.0;
    let mut work = inputs.to_vec();
    for (i, &var) in vars.iter().enumerate() {
        let analytic = grads.wrt(var);
        let mut numeric = Vec::with_capacity(inputs[i].len());
        for j in 0..inputs[i].len() {
            let x = inputs[i].data()[j];
            work[i].data_mut()[j] = x + STEP;
            let up = eval(&work);
            work[i].data_mut()[j] = x - STEP;
            let down = eval(&work);
            work[i].data_mut()[j] = x;
            numeric.push((up - down) / (2.0 * STEP));
        }
        worst = worst.max(relative_error(analytic.data(), &numeric));
    }
    worst
}

/// [`check_graph`] for graphs whose leaves are exactly `inputs`.
fn check(inputs: &[Tensor], build: &dyn Fn(&mut Tape, &[Var]) -> Var) -> f64 {
    check_graph(inputs, &|tape, values| {
        let vars: Vec<Var> = values.iter().map(|t| tape.param(t.clone())).collect();
        let root = build(tape, &vars);
        (vars, root)
    })
}

/// Scalar read-out giving every element of `y` a distinct upstream gradient.
fn readout(tape: &mut Tape, y: Var, proj: &Tensor, targets: &[usize]) -> Var {
    let r = tape.input(proj.clone());
    let zero = tape.input(Tensor::zeros(&[proj.shape()[0]]));
    let z = tape.linear(y, r, zero).unwrap();
    tape.softmax_cross_entropy(z, targets).unwrap()
}

struct Dims {
    batch: usize,
    d_in: usize,
    d_out: usize,
    classes: usize,
}

fn dims(rng: &mut Rng) -> Dims {
    Dims {
        batch: rng.random_range(1..6),
        d_in: rng.random_range(1..9),
        d_out: rng.random_range(1..7),
        classes: rng.random_range(2..5),
    }
}

fn targets(rng: &mut Rng, batch: usize, classes: usize) -> Vec<usize> {
    (0..batch).map(|_| rng.random_range(0..classes)).collect()
}

pub fn linear_gradients(rng: &mut Rng) -> f64 {
    let d = dims(rng);
    let inputs = [
        random_tensor(rng, &[d.batch, d.d_in], 1.0),
        random_tensor(rng, &[d.d_out, d.d_in], 1.0),
        random_tensor(rng, &[d.d_out], 1.0),
    ];
    let proj = random_tensor(rng, &[d.classes, d.d_out], 1.0);
    let t = targets(rng, d.batch, d.classes);
    check(&inputs, &|tape, v| {
        let y = tape.linear(v[0], v[1], v[2]).unwrap();
        readout(tape, y, &proj, &t)
    })
}

pub fn relu_gradients(rng: &mut Rng) -> f64 {
    let d = dims(rng);
    let inputs = [off_kink_tensor(rng, &[d.batch, d.d_in])];
    let proj = random_tensor(rng, &[d.classes, d.d_in], 1.0);
    let t = targets(rng, d.batch, d.classes);
    check(&inputs, &|tape, v| {
        let y = tape.relu(v[0]);
        readout(tape, y, &proj, &t)
    })
}

pub fn cross_entropy_gradients(rng: &mut Rng) -> f64 {
    let d = dims(rng);
    let inputs = [random_tensor(rng, &[d.batch, d.classes], 3.0)];
    let t = targets(rng, d.batch, d.classes);
    check(&inputs, &|tape, v| tape.softmax_cross_entropy(v[0], &t).unwrap())
}

pub fn sum_gradients(rng: &mut Rng) -> f64 {
    let d = dims(rng);
    let inputs = [random_tensor(rng, &[d.batch, d.d_in], 1.0)];
    let proj = random_tensor(rng, &[1, d.d_in], 1.0);
    check(&inputs, &|tape, v| {
        let r = tape.input(proj.clone());
        let zero = tape.input(Tensor::zeros(&[1]));
        let y = tape.linear(v[0], r, zero).unwrap();
        let y = tape.relu(y);
        tape.sum(y)
    })
}

pub fn scale_gradients(rng: &mut Rng) -> f64 {
    let d = dims(rng);
    let factor = rng.random_range(-3.0..3.0);
    let inputs = [random_tensor(rng, &[d.batch, d.d_in], 1.0)];
    let proj = random_tensor(rng, &[d.classes, d.d_in], 1.0);
    let t = targets(rng, d.batch, d.classes);
    check(&inputs, &|tape, v| {
        let y = tape.scale(v[0], factor);
        readout(tape, y, &proj, &t)
    })
}

pub fn add_gradients(rng: &mut Rng) -> f64 {
    let d = dims(rng);
    let inputs = [
        random_tensor(rng, &[d.batch, d.d_in], 1.0),
        random_tensor(rng, &[d.batch, d.d_in], 1.0),
    ];
    let proj = random_tensor(rng, &[d.classes, d.d_in], 1.0);
    let t = targets(rng, d.batch, d.classes);
    check(&inputs, &|tape, v| {
        let y = tape.add(v[0], v[1]).unwrap();
        readout(tape, y, &proj, &t)
    })
}

pub fn shared_input_accumulates(rng: &mut Rng) -> f64 {
    let d = dims(rng);
    let inputs = [random_tensor(rng, &[d.batch, d.d_in], 1.0)];
    let proj = random_tensor(rng, &[d.classes, d.d_in], 1.0);
    let t = targets(rng, d.batch, d.classes);
    check(&inputs, &|tape, v| {
        let y = tape.add(v[0], v[0]).unwrap();
        readout(tape, y, &proj, &t)
    })
}

fn random_batch(rng: &mut Rng, n: usize, side: usize, classes: usize) -> Batch {
    let images = random_tensor(rng, &[n, side, side], 1.0);
    Batch::new(images, targets(rng, n, classes)).unwrap()
}

pub fn joint_objective_gradients(rng: &mut Rng) -> f64 {
    let side = rng.random_range(2..4);
    let shape = ModelShape {
        input_dim: side * side,
        hidden_dim: rng.random_range(2..6),
        feature_dim: rng.random_range(2..5),
        num_classes: rng.random_range(2..5),
    };
    let mut params = ModelParams::init(shape, rng).unwrap();
    for b in [Block::PhiB1, Block::PhiB2, Block::CbsBias, Block::RrsBias, Block::SsBias] {
        *params.block_mut(b) = random_tensor(rng, &shape.block_shape(b), 0.5);
    }
    let c = shape.num_classes;
    let n = [rng.random_range(1..4), rng.random_range(1..4), rng.random_range(1..5)];
    let triple = BatchTriple {
        primary: Some(random_batch(rng, n[0], side, c)),
        auxiliary: Some(random_batch(rng, n[1], side, c)),
        rotation: Some(random_batch(rng, n[2], side, ROTATIONS)),
    };
    let l: [f64; 3] = core::array::from_fn(|_| rng.random_range(0.1..2.0));
    let w = LossWeights::new(l[0], l[1], l[2]).unwrap();
    let inputs: Vec<Tensor> = Block::ALL.iter().map(|&b| params.block(b).clone()).collect();
    check_graph(&inputs, &|tape, values| {
        let mut p = ModelParams::zeros(shape);
        for (&b, t) in Block::ALL.iter().zip(values) {
            *p.block_mut(b) = t.clone();
        }
        let bound = p.bind(tape);
        let root = joint_loss(tape, &bound, &triple, &w).unwrap().total;
        (Block::ALL.iter().map(|&b| bound.var(b)).collect(), root)
    })
}

pub type Case = fn(&mut Rng) -> f64;

pub const OPS: [(&str, Case); 8] = [
    ("linear", linear_gradients),
    ("relu", relu_gradients),
    ("softmax_cross_entropy", cross_entropy_gradients),
    ("sum", sum_gradients),
    ("scale", scale_gradients),
    ("add", add_gradients),
    ("add(x, x)", shared_input_accumulates),
    ("joint_objective", joint_objective_gradients),
];

/// Worst relative error of `case` over seeds `0..CASES`.
pub fn worst_error(case: Case) -> f64 {
    (0..CASES).map(|seed| case(&mut seeded_rng(seed))).fold(0.0, f64::max)
}
