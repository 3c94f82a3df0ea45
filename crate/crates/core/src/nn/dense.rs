use super::tensor::axpy;
use super::{dot, par_chunks, Exec, Scalar, Tensor};
use crate::{Error, Result};

/// Fully connected layer, `out = x W^T + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct Dense<T> {
    /// `[d_o, d_i]`
    pub weight: Tensor<T>,
    /// `[d_o]`
    pub bias: Tensor<T>,
}

#[derive(Debug, Clone)]
pub struct DenseGrads<T> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Scalar> Dense<T> {
    pub fn zeros(inputs: usize, outputs: usize) -> Self {
        Self {
            weight: Tensor::zeros(&[outputs, inputs]),
            bias: Tensor::zeros(&[outputs]),
        }
    }

    pub fn new(weight: Tensor<T>, bias: Tensor<T>) -> Result<Self> {
        let ok = matches!(*weight.shape(), [o, _] if bias.shape() == [o]);
        if !ok {
            return Err(Error::Shape(format!(
                "dense weight {:?} / bias {:?}",
                weight.shape(),
                bias.shape()
            )));
        }
        Ok(Self { weight, bias })
    }

    pub fn inputs(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn outputs(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn param_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    fn batch(&self, x: &Tensor<T>) -> Result<usize> {
        match *x.shape() {
            [n, d] if d == self.inputs() => Ok(n),
            _ => Err(Error::Shape(format!(
                "dense expects [N, {}], got {:?}",
                self.inputs(),
                x.shape()
            ))),
        }
    }

    pub fn forward(&self, x: &Tensor<T>, exec: Exec) -> Result<Tensor<T>> {
        let n = self.batch(x)?;
        let (di, d_o) = (self.inputs(), self.outputs());
        let mut out = Tensor::zeros(&[n, d_o]);
        let (w, b, xs) = (self.weight.data(), self.bias.data(), x.data());
        par_chunks(exec, out.data_mut(), d_o, |s, row| {
            let xr = &xs[s * di..][..di];
            for (o, y) in row.iter_mut().enumerate() {
                *y = b[o] + dot(&w[o * di..][..di], xr);
            }
        });
        Ok(out)
    }

    pub fn backward(
        &self,
        x: &Tensor<T>,
        dy: &Tensor<T>,
        exec: Exec,
    ) -> Result<(Tensor<T>, DenseGrads<T>)> {
        let n = self.batch(x)?;
        let (di, d_o) = (self.inputs(), self.outputs());
        if dy.shape() != [n, d_o] {
            return Err(Error::Shape(format!(
                "dense upstream gradient {:?}, expected {:?}",
                dy.shape(),
                [n, d_o]
            )));
        }
        let (w, xs, g) = (self.weight.data(), x.data(), dy.data());

        let mut dx = Tensor::zeros(&[n, di]);
        par_chunks(exec, dx.data_mut(), di, |s, row| {
            for o in 0..d_o {
                axpy(g[s * d_o + o], &w[o * di..][..di], row);
            }
        });
        let mut dw = Tensor::zeros(&[d_o, di]);
        par_chunks(exec, dw.data_mut(), di, |o, row| {
            for s in 0..n {
                axpy(g[s * d_o + o], &xs[s * di..][..di], row);
            }
        });
        let db = (0..d_o)
            .map(|o| (0..n).fold(T::zero(), |acc, s| acc + g[s * d_o + o]))
            .collect();
        Ok((
            dx,
            DenseGrads {
                weight: dw,
                bias: Tensor::new(&[d_o], db)?,
            },
        ))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn hand_example() {
        let d = Dense::new(
            Tensor::new(&[2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap(),
            Tensor::zeros(&[2]),
        )
        .unwrap();
        let y = d
            .forward(
                &Tensor::new(&[1, 2], vec![1.0f64, 1.0]).unwrap(),
                Exec::Serial,
            )
            .unwrap();
        assert_eq!(y.data(), &[3.0, 7.0]);
    }

    #[test]
    fn identity_weights() {
        let d = Dense::new(
            Tensor::new(&[3, 3], vec![1.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0]).unwrap(),
            Tensor::zeros(&[3]),
        )
        .unwrap();
        let x = Tensor::new(&[2, 3], vec![0.5f32, -1.0, 2.0, 3.0, 0.0, -0.25]).unwrap();
        assert_eq!(d.forward(&x, Exec::Parallel).unwrap(), x);
    }

    #[test]
    fn first_dense_layer_shape() {
        let d = Dense::<f32>::zeros(64_000, 512);
        let x = Tensor::zeros(&[55, 64_000]);
        assert_eq!(d.forward(&x, Exec::Parallel).unwrap().shape(), &[55, 512]);
    }

    #[test]
    fn shape_mismatch() {
        let d = Dense::<f32>::zeros(4, 2);
        assert!(d.forward(&Tensor::zeros(&[1, 3]), Exec::Serial).is_err());
        assert!(Dense::new(Tensor::<f32>::zeros(&[2, 4]), Tensor::zeros(&[3])).is_err());
    }

    #[test]
    fn backward_by_hand() {
        let d = Dense::new(
            Tensor::new(&[2, 2], vec![1.0, 2.0, 3.0, 4.0]).unwrap(),
            Tensor::zeros(&[2]),
        )
        .unwrap();
        let x = Tensor::new(&[1, 2], vec![1.0f64, -1.0]).unwrap();
        let dy = Tensor::new(&[1, 2], vec![1.0, 0.5]).unwrap();
        let (dx, g) = d.backward(&x, &dy, Exec::Serial).unwrap();
        assert_eq!(dx.data(), &[2.5, 4.0]);
        assert_eq!(g.weight.data(), &[1.0, -1.0, 0.5, -0.5]);
        assert_eq!(g.bias.data(), &[1.0, 0.5]);
    }
}
