//! Central finite-difference checks of the analytic backward passes.
//!
//! Each check contracts the forward output with a fixed random projection
//! `r`, so the scalar loss is `sum(r * y)` and its analytic input gradient is
//! obtained by feeding `r` as the upstream gradient. The error reported for a
//! parameter group is
//!
//! ```text
//! max_i |analytic_i - numeric_i| / max(max_i |analytic_i|, max_i |numeric_i|, 1e-6)
//! ```
//!
//! which is scale-aware and stays meaningful when individual entries are
//! close to zero.

use rand::seq::index::sample;
use rand::Rng;
use rand_distr::{Distribution, StandardNormal};

use super::{
    avgpool1d, avgpool1d_backward, dropout_backward, dropout_forward, maxpool1d,
    maxpool1d_backward, BatchNorm, Conv1d, Dense, Exec, Mode, PRelu, Tensor,
};

/// Finite-difference step on unit-scale values.
pub const STEP: f64 = 1e-5;

const SCALE_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GroupCheck {
    pub name: String,
    pub checked: usize,
    pub max_rel_error: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct GradReport {
    pub groups: Vec<GroupCheck>,
}

impl GradReport {
    pub fn max_rel_error(&self) -> f64 {
        self.groups
            .iter()
            .map(|g| g.max_rel_error)
            .fold(0.0, f64::max)
    }

    pub fn passed(&self, tolerance: f64) -> bool {
        !self.groups.is_empty() && self.groups.iter().all(|g| g.max_rel_error < tolerance)
    }

    pub fn push(&mut self, group: GroupCheck) {
        self.groups.push(group);
    }

    pub fn extend(&mut self, other: GradReport) {
        self.groups.extend(other.groups);
    }
}

/// Negative-control switch: corrupt the analytic gradient before comparing.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Fault {
    #[default]
    None,
    FlipSign,
}

/// Compares `analytic[i]` against `(loss(i, +h) - loss(i, -h)) / 2h` for every
/// `i` in `indices`. `loss(i, delta)` must evaluate the loss with element `i`
/// shifted by `delta` and leave the original untouched.
pub fn check_group(
    name: impl Into<String>,
    analytic: &[f64],
    indices: &[usize],
    fault: Fault,
    loss: impl FnMut(usize, f64) -> f64,
) -> GroupCheck {
    check_group_with(name, analytic, indices, fault, STEP, SCALE_FLOOR, loss)
}

/// [`check_group`] with a caller-chosen step and lower bound on the error scale.
pub fn check_group_with(
    name: impl Into<String>,
    analytic: &[f64],
    indices: &[usize],
    fault: Fault,
    step: f64,
    floor: f64,
    mut loss: impl FnMut(usize, f64) -> f64,
) -> GroupCheck {
    let sign = match fault {
        Fault::None => 1.0,
        Fault::FlipSign => -1.0,
    };
    let mut pairs = Vec::with_capacity(indices.len());
    for &i in indices {
        let numeric = (loss(i, step) - loss(i, -step)) / (2.0 * step);
        pairs.push((sign * analytic[i], numeric));
    }
    let scale = pairs
        .iter()
        .map(|&(a, n)| a.abs().max(n.abs()))
        .fold(floor, f64::max);
    let max_err = pairs
        .iter()
        .map(|&(a, n)| (a - n).abs())
        .fold(0.0, f64::max);
    GroupCheck {
        name: name.into(),
        checked: indices.len(),
        max_rel_error: max_err / scale,
    }
}

/// All indices when `len <= max`, otherwise a sorted random subset.
pub fn sample_indices<R: Rng + ?Sized>(len: usize, max: usize, rng: &mut R) -> Vec<usize> {
    if len <= max {
        return (0..len).collect();
    }
    let mut v = sample(rng, len, max).into_vec();
    v.sort_unstable();
    v
}

pub fn random_tensor<R: Rng + ?Sized>(shape: &[usize], rng: &mut R) -> Tensor<f64> {
    let len = shape.iter().product();
    let data = (0..len).map(|_| StandardNormal.sample(rng)).collect();
    Tensor::new(shape, data).expect("shape matches data")
}

fn project(y: &Tensor<f64>, r: &Tensor<f64>) -> f64 {
    y.data().iter().zip(r.data()).map(|(a, b)| a * b).sum()
}

fn perturbed(t: &Tensor<f64>, i: usize, d: f64) -> Tensor<f64> {
    let mut t = t.clone();
    t.data_mut()[i] += d;
    t
}

const MAX_PER_GROUP: usize = 64;

pub fn check_conv<R: Rng + ?Sized>(rng: &mut R, fault: Fault) -> GradReport {
    let (n, cin, f, k, len) = (2, 3, 4, 5, 9);
    let layer = Conv1d::new(random_tensor(&[f, cin, k], rng), random_tensor(&[f], rng)).unwrap();
    let x = random_tensor(&[n, cin, len], rng);
    let r = random_tensor(&[n, f, len], rng);
    let (dx, g) = layer.backward(&x, &r, Exec::Serial).unwrap();
    let loss = |l: &Conv1d<f64>, x: &Tensor<f64>| project(&l.forward(x, Exec::Serial).unwrap(), &r);

    let mut report = GradReport::default();
    report.push(check_group(
        "conv1d.input",
        dx.data(),
        &sample_indices(x.len(), MAX_PER_GROUP, rng),
        fault,
        |i, d| loss(&layer, &perturbed(&x, i, d)),
    ));
    report.push(check_group(
        "conv1d.weight",
        g.weight.data(),
        &sample_indices(layer.weight.len(), MAX_PER_GROUP, rng),
        fault,
        |i, d| {
            let l = Conv1d {
                weight: perturbed(&layer.weight, i, d),
                bias: layer.bias.clone(),
            };
            loss(&l, &x)
        },
    ));
    report.push(check_group(
        "conv1d.bias",
        g.bias.data(),
        &sample_indices(f, MAX_PER_GROUP, rng),
        fault,
        |i, d| {
            let l = Conv1d {
                weight: layer.weight.clone(),
                bias: perturbed(&layer.bias, i, d),
            };
            loss(&l, &x)
        },
    ));
    report
}

pub fn check_batchnorm<R: Rng + ?Sized>(rng: &mut R, fault: Fault) -> GradReport {
    let mut report = GradReport::default();
    for (label, shape) in [
        ("batchnorm.conv", vec![3, 2, 5]),
        ("batchnorm.dense", vec![4, 3]),
    ] {
        let mut bn = BatchNorm::<f64>::new(shape[1]);
        bn.gamma = random_tensor(&[shape[1]], rng);
        bn.beta = random_tensor(&[shape[1]], rng);
        let x = random_tensor(&shape, rng);
        let r = random_tensor(&shape, rng);
        let (_, cache) = bn.clone().forward_train(&x, Exec::Serial).unwrap();
        let (dx, g) = bn.backward(&cache, &r, Exec::Serial).unwrap();
        let loss = |b: &BatchNorm<f64>, x: &Tensor<f64>| {
            project(&b.clone().forward_train(x, Exec::Serial).unwrap().0, &r)
        };
        report.push(check_group(
            format!("{label}.input"),
            dx.data(),
            &sample_indices(x.len(), MAX_PER_GROUP, rng),
            fault,
            |i, d| loss(&bn, &perturbed(&x, i, d)),
        ));
        report.push(check_group(
            format!("{label}.gamma"),
            g.gamma.data(),
            &sample_indices(bn.channels(), MAX_PER_GROUP, rng),
            fault,
            |i, d| {
                let mut b = bn.clone();
                b.gamma = perturbed(&bn.gamma, i, d);
                loss(&b, &x)
            },
        ));
        report.push(check_group(
            format!("{label}.beta"),
            g.beta.data(),
            &sample_indices(bn.channels(), MAX_PER_GROUP, rng),
            fault,
            |i, d| {
                let mut b = bn.clone();
                b.beta = perturbed(&bn.beta, i, d);
                loss(&b, &x)
            },
        ));
    }
    report
}

/// Values bounded away from zero so that no perturbation crosses the kink.
fn away_from_zero<R: Rng + ?Sized>(shape: &[usize], rng: &mut R) -> Tensor<f64> {
    random_tensor(shape, rng).map(|v| if v >= 0.0 { v + 0.05 } else { v - 0.05 })
}

pub fn check_prelu<R: Rng + ?Sized>(rng: &mut R, fault: Fault) -> GradReport {
    let layer = PRelu::with_slopes(vec![0.25, -0.1, 0.7]);
    let x = away_from_zero(&[2, 3, 6], rng);
    let r = random_tensor(&[2, 3, 6], rng);
    let (dx, da) = layer.backward(&x, &r).unwrap();
    let loss = |l: &PRelu<f64>, x: &Tensor<f64>| project(&l.forward(x).unwrap(), &r);
    let mut report = GradReport::default();
    report.push(check_group(
        "prelu.input",
        dx.data(),
        &sample_indices(x.len(), MAX_PER_GROUP, rng),
        fault,
        |i, d| loss(&layer, &perturbed(&x, i, d)),
    ));
    report.push(check_group(
        "prelu.slope",
        da.data(),
        &[0, 1, 2],
        fault,
        |i, d| {
            loss(
                &PRelu {
                    slope: perturbed(&layer.slope, i, d),
                },
                &x,
            )
        },
    ));
    report
}

/// Distinct values spaced far wider than the finite-difference step.
fn distinct<R: Rng + ?Sized>(shape: &[usize], rng: &mut R) -> Tensor<f64> {
    let len: usize = shape.iter().product();
    let mut order: Vec<usize> = (0..len).collect();
    rand::seq::SliceRandom::shuffle(order.as_mut_slice(), rng);
    let data = order
        .iter()
        .map(|&o| o as f64 * 0.1 - len as f64 * 0.05)
        .collect();
    Tensor::new(shape, data).unwrap()
}

pub fn check_pooling<R: Rng + ?Sized>(rng: &mut R, fault: Fault) -> GradReport {
    let mut report = GradReport::default();
    let x = random_tensor(&[2, 3, 12], rng);
    let r = random_tensor(&[2, 3, 3], rng);
    let dx = avgpool1d_backward(&r, 4).unwrap();
    report.push(check_group(
        "avgpool.input",
        dx.data(),
        &sample_indices(x.len(), MAX_PER_GROUP, rng),
        fault,
        |i, d| project(&avgpool1d(&perturbed(&x, i, d), 4).unwrap(), &r),
    ));

    let x = distinct(&[2, 3, 12], rng);
    let r = random_tensor(&[2, 3, 4], rng);
    let (_, idx) = maxpool1d(&x, 3).unwrap();
    let dx = maxpool1d_backward(&r, &idx).unwrap();
    report.push(check_group(
        "maxpool.input",
        dx.data(),
        &sample_indices(x.len(), MAX_PER_GROUP, rng),
        fault,
        |i, d| project(&maxpool1d(&perturbed(&x, i, d), 3).unwrap().0, &r),
    ));
    report
}

pub fn check_dense<R: Rng + ?Sized>(rng: &mut R, fault: Fault) -> GradReport {
    let layer = Dense::new(random_tensor(&[4, 6], rng), random_tensor(&[4], rng)).unwrap();
    let x = random_tensor(&[3, 6], rng);
    let r = random_tensor(&[3, 4], rng);
    let (dx, g) = layer.backward(&x, &r, Exec::Serial).unwrap();
    let loss = |l: &Dense<f64>, x: &Tensor<f64>| project(&l.forward(x, Exec::Serial).unwrap(), &r);
    let mut report = GradReport::default();
    report.push(check_group(
        "dense.input",
        dx.data(),
        &sample_indices(x.len(), MAX_PER_GROUP, rng),
        fault,
        |i, d| loss(&layer, &perturbed(&x, i, d)),
    ));
    report.push(check_group(
        "dense.weight",
        g.weight.data(),
        &sample_indices(layer.weight.len(), MAX_PER_GROUP, rng),
        fault,
        |i, d| {
            loss(
                &Dense {
                    weight: perturbed(&layer.weight, i, d),
                    bias: layer.bias.clone(),
                },
                &x,
            )
        },
    ));
    report.push(check_group(
        "dense.bias",
        g.bias.data(),
        &sample_indices(4, MAX_PER_GROUP, rng),
        fault,
        |i, d| {
            loss(
                &Dense {
                    weight: layer.weight.clone(),
                    bias: perturbed(&layer.bias, i, d),
                },
                &x,
            )
        },
    ));
    report
}

pub fn check_dropout<R: Rng + ?Sized>(rng: &mut R, fault: Fault) -> GradReport {
    let x = random_tensor(&[3, 8], rng);
    let r = random_tensor(&[3, 8], rng);
    let (_, mask) = dropout_forward(&x, 0.5, Mode::Train, rng).unwrap();
    let mask = mask.expect("train mode records a mask");
    let dx = dropout_backward(&r, &mask).unwrap();
    let mut report = GradReport::default();
    report.push(check_group(
        "dropout.input",
        dx.data(),
        &sample_indices(x.len(), MAX_PER_GROUP, rng),
        fault,
        |i, d| {
            let y = perturbed(&x, i, d);
            let y = Tensor::new(
                y.shape(),
                y.data()
                    .iter()
                    .zip(mask.data())
                    .map(|(a, m)| a * m)
                    .collect(),
            )
            .unwrap();
            project(&y, &r)
        },
    ));
    report
}

/// Every layer type on small random shapes.
pub fn check_all_layers<R: Rng + ?Sized>(rng: &mut R, fault: Fault) -> GradReport {
    let mut report = GradReport::default();
    report.extend(check_conv(rng, fault));
    report.extend(check_batchnorm(rng, fault));
    report.extend(check_prelu(rng, fault));
    report.extend(check_pooling(rng, fault));
    report.extend(check_dense(rng, fault));
    report.extend(check_dropout(rng, fault));
    report
}
