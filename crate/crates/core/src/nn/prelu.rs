use super::{Scalar, Tensor};
use crate::{Error, Result};

pub const DEFAULT_SLOPE: f64 = 0.25;

/// Parametric ReLU with one negative-side slope per channel.
#[derive(Debug, Clone, PartialEq)]
pub struct PRelu<T> {
    pub slope: Tensor<T>,
}

impl<T: Scalar> PRelu<T> {
    pub fn new(channels: usize) -> Self {
        Self {
            slope: Tensor::full(&[channels], T::of(DEFAULT_SLOPE)),
        }
    }

    pub fn with_slopes(slopes: Vec<T>) -> Self {
        let n = slopes.len();
        Self {
            slope: Tensor::new(&[n], slopes).expect("rank-1 shape"),
        }
    }

    pub fn channels(&self) -> usize {
        self.slope.len()
    }

    pub fn param_count(&self) -> usize {
        self.slope.len()
    }

    fn dims(&self, x: &Tensor<T>) -> Result<(usize, usize, usize)> {
        let (n, c, l) = x.dims3()?;
        if c != self.channels() {
            return Err(Error::Shape(format!(
                "PReLU has {} slopes, input {:?}",
                self.channels(),
                x.shape()
            )));
        }
        Ok((n, c, l))
    }

    pub fn forward(&self, x: &Tensor<T>) -> Result<Tensor<T>> {
        let (_, c, l) = self.dims(x)?;
        let a = self.slope.data();
        let mut y = x.clone();
        for (row, chunk) in y.data_mut().chunks_mut(l).enumerate() {
            let s = a[row % c];
            for v in chunk {
                if *v < T::zero() {
                    *v = s * *v;
                }
            }
        }
        Ok(y)
    }

    /// Returns `(dx, dslope)`.
    pub fn backward(&self, x: &Tensor<T>, dy: &Tensor<T>) -> Result<(Tensor<T>, Tensor<T>)> {
        let (_, c, l) = self.dims(x)?;
        if dy.shape() != x.shape() {
            return Err(Error::Shape("PReLU upstream gradient shape".into()));
        }
        let a = self.slope.data();
        let mut dx = dy.clone();
        let mut da = vec![T::zero(); c];
        for (row, (chunk, xr)) in dx
            .data_mut()
            .chunks_mut(l)
            .zip(x.data().chunks(l))
            .enumerate()
        {
            let ch = row % c;
            for (g, &xv) in chunk.iter_mut().zip(xr) {
                if xv < T::zero() {
                    da[ch] += *g * xv;
                    *g = a[ch] * *g;
                }
            }
        }
        Ok((dx, Tensor::new(&[c], da)?))
    }
}
