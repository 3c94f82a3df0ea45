use rayon::prelude::*;

use super::{par_chunks, Exec, Scalar, Tensor};
use crate::{Error, Result};

pub const DEFAULT_MOMENTUM: f64 = 0.1;
pub const DEFAULT_EPSILON: f64 = 1e-5;

/// Per-channel batch normalization over the N and L axes.
///
/// Batch statistics use the biased variance; the running variance is updated
/// with the unbiased estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct BatchNorm<T> {
    pub gamma: Tensor<T>,
    pub beta: Tensor<T>,
    pub running_mean: Tensor<T>,
    pub running_var: Tensor<T>,
    pub momentum: f64,
    pub epsilon: f64,
}

#[derive(Debug, Clone)]
pub struct BatchNormCache<T> {
    x_hat: Tensor<T>,
    inv_std: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct BatchNormGrads<T> {
    pub gamma: Tensor<T>,
    pub beta: Tensor<T>,
}

impl<T: Scalar> BatchNorm<T> {
    pub fn new(channels: usize) -> Self {
        Self {
            gamma: Tensor::full(&[channels], T::one()),
            beta: Tensor::zeros(&[channels]),
            running_mean: Tensor::zeros(&[channels]),
            running_var: Tensor::full(&[channels], T::one()),
            momentum: DEFAULT_MOMENTUM,
            epsilon: DEFAULT_EPSILON,
        }
    }

    pub fn channels(&self) -> usize {
        self.gamma.len()
    }

    pub fn param_count(&self) -> usize {
        self.gamma.len() + self.beta.len()
    }

    fn dims(&self, x: &Tensor<T>) -> Result<(usize, usize, usize)> {
        let (n, c, l) = x.dims3()?;
        if c != self.channels() {
            return Err(Error::Shape(format!(
                "batch norm has {} channels, input {:?}",
                self.channels(),
                x.shape()
            )));
        }
        Ok((n, c, l))
    }

    pub fn forward_train(
        &mut self,
        x: &Tensor<T>,
        exec: Exec,
    ) -> Result<(Tensor<T>, BatchNormCache<T>)> {
        let (n, c, l) = self.dims(x)?;
        let count = n * l;
        if count < 2 {
            return Err(Error::Shape(format!(
                "train-mode batch norm needs at least 2 values per channel, got {count}"
            )));
        }
        let xs = x.data();
        let stats: Vec<(f64, f64)> = channel_map(exec, c, |ch| {
            let mut sum = 0.0;
            for s in 0..n {
                sum += xs[(s * c + ch) * l..][..l]
                    .iter()
                    .map(|v| v.f64())
                    .sum::<f64>();
            }
            let mean = sum / count as f64;
            let mut sq = 0.0;
            for s in 0..n {
                sq += xs[(s * c + ch) * l..][..l]
                    .iter()
                    .map(|v| (v.f64() - mean).powi(2))
                    .sum::<f64>();
            }
            (mean, sq / count as f64)
        });
        let inv_std: Vec<f64> = stats
            .iter()
            .map(|&(_, var)| 1.0 / (var + self.epsilon).sqrt())
            .collect();

        let mut x_hat = Tensor::zeros(x.shape());
        par_chunks(exec, x_hat.data_mut(), l, |row, out| {
            let ch = row % c;
            let (mean, inv) = (stats[ch].0, inv_std[ch]);
            for (o, v) in out.iter_mut().zip(&xs[row * l..][..l]) {
                *o = T::of((v.f64() - mean) * inv);
            }
        });
        let y = self.affine(&x_hat, c, l, exec);

        let m = self.momentum;
        let unbiased = count as f64 / (count - 1) as f64;
        for (ch, &(mean, var)) in stats.iter().enumerate() {
            let rm = &mut self.running_mean.data_mut()[ch];
            *rm = T::of((1.0 - m) * rm.f64() + m * mean);
            let rv = &mut self.running_var.data_mut()[ch];
            *rv = T::of((1.0 - m) * rv.f64() + m * var * unbiased);
        }
        Ok((y, BatchNormCache { x_hat, inv_std }))
    }

    pub fn forward_eval(&self, x: &Tensor<T>, exec: Exec) -> Result<Tensor<T>> {
        let (_, c, l) = self.dims(x)?;
        let mean = self.running_mean.data();
        let var = self.running_var.data();
        let mut x_hat = Tensor::zeros(x.shape());
        let xs = x.data();
        let eps = self.epsilon;
        par_chunks(exec, x_hat.data_mut(), l, |row, out| {
            let ch = row % c;
            let inv = 1.0 / (var[ch].f64() + eps).sqrt();
            let mu = mean[ch].f64();
            for (o, v) in out.iter_mut().zip(&xs[row * l..][..l]) {
                *o = T::of((v.f64() - mu) * inv);
            }
        });
        Ok(self.affine(&x_hat, c, l, exec))
    }

    fn affine(&self, x_hat: &Tensor<T>, c: usize, l: usize, exec: Exec) -> Tensor<T> {
        let mut y = Tensor::zeros(x_hat.shape());
        let g = self.gamma.data();
        let b = self.beta.data();
        let xh = x_hat.data();
        par_chunks(exec, y.data_mut(), l, |row, out| {
            let ch = row % c;
            for (o, &v) in out.iter_mut().zip(&xh[row * l..][..l]) {
                *o = g[ch] * v + b[ch];
            }
        });
        y
    }

    pub fn backward(
        &self,
        cache: &BatchNormCache<T>,
        dy: &Tensor<T>,
        exec: Exec,
    ) -> Result<(Tensor<T>, BatchNormGrads<T>)> {
        if dy.shape() != cache.x_hat.shape() {
            return Err(Error::Shape(format!(
                "batch norm upstream gradient {:?}, expected {:?}",
                dy.shape(),
                cache.x_hat.shape()
            )));
        }
        let (n, c, l) = self.dims(dy)?;
        let count = (n * l) as f64;
        let g = dy.data();
        let xh = cache.x_hat.data();
        let sums: Vec<(f64, f64)> = channel_map(exec, c, |ch| {
            let (mut db, mut dg) = (0.0, 0.0);
            for s in 0..n {
                let off = (s * c + ch) * l;
                for (gv, xv) in g[off..off + l].iter().zip(&xh[off..off + l]) {
                    db += gv.f64();
                    dg += gv.f64() * xv.f64();
                }
            }
            (db, dg)
        });
        let gamma = self.gamma.data();
        let mut dx = Tensor::zeros(dy.shape());
        par_chunks(exec, dx.data_mut(), l, |row, out| {
            let ch = row % c;
            let (db, dg) = sums[ch];
            let scale = gamma[ch].f64() * cache.inv_std[ch] / count;
            let off = row * l;
            for ((o, gv), xv) in out.iter_mut().zip(&g[off..off + l]).zip(&xh[off..off + l]) {
                *o = T::of(scale * (count * gv.f64() - db - xv.f64() * dg));
            }
        });
        let grads = BatchNormGrads {
            gamma: Tensor::new(&[c], sums.iter().map(|s| T::of(s.1)).collect())?,
            beta: Tensor::new(&[c], sums.iter().map(|s| T::of(s.0)).collect())?,
        };
        Ok((dx, grads))
    }
}

fn channel_map<R: Send, F: Fn(usize) -> R + Sync + Send>(exec: Exec, c: usize, f: F) -> Vec<R> {
    match exec {
        Exec::Serial => (0..c).map(f).collect(),
        Exec::Parallel => (0..c).into_par_iter().map(f).collect(),
    }
}
