use super::tensor::axpy;
use super::{dot, par_chunks, Exec, Scalar, Tensor};
use crate::{Error, Result};

/// Same-padded 1-D convolution with stride 1 and zero padding `f_l / 2`.
#[derive(Debug, Clone, PartialEq)]
pub struct Conv1d<T> {
    /// `[f_n, c_in, f_l]`
    pub weight: Tensor<T>,
    /// `[f_n]`
    pub bias: Tensor<T>,
}

#[derive(Debug, Clone)]
pub struct ConvGrads<T> {
    pub weight: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Scalar> Conv1d<T> {
    pub fn zeros(filters: usize, in_channels: usize, length: usize) -> Self {
        Self {
            weight: Tensor::zeros(&[filters, in_channels, length]),
            bias: Tensor::zeros(&[filters]),
        }
    }

    pub fn new(weight: Tensor<T>, bias: Tensor<T>) -> Result<Self> {
        let layer = Self { weight, bias };
        if layer.weight.shape().len() != 3 || layer.bias.shape() != [layer.filters()] {
            return Err(Error::Shape(format!(
                "conv weight {:?} / bias {:?}",
                layer.weight.shape(),
                layer.bias.shape()
            )));
        }
        Ok(layer)
    }

    pub fn filters(&self) -> usize {
        self.weight.shape()[0]
    }

    pub fn in_channels(&self) -> usize {
        self.weight.shape()[1]
    }

    pub fn kernel(&self) -> usize {
        self.weight.shape()[2]
    }

    pub fn padding(&self) -> usize {
        self.kernel() / 2
    }

    pub fn param_count(&self) -> usize {
        self.weight.len() + self.bias.len()
    }

    fn check_input(&self, x: &Tensor<T>) -> Result<(usize, usize)> {
        match *x.shape() {
            [n, c, l] if c == self.in_channels() && l >= 1 => Ok((n, l)),
            _ => Err(Error::Shape(format!(
                "conv expects [N, {}, L], got {:?}",
                self.in_channels(),
                x.shape()
            ))),
        }
    }

    /// `out[n, o, i] = bias[o] + sum_{c,k} w[o, c, k] * x[n, c, i + k - pad]`
    pub fn forward(&self, x: &Tensor<T>, exec: Exec) -> Result<Tensor<T>> {
        let (n, len) = self.check_input(x)?;
        let (filters, cin, k) = (self.filters(), self.in_channels(), self.kernel());
        let pad = self.padding();
        let mut out = Tensor::zeros(&[n, filters, len]);
        let xs = x.data();
        let w = self.weight.data();
        let b = self.bias.data();
        par_chunks(exec, out.data_mut(), len, |row, y| {
            let (sample, o) = (row / filters, row % filters);
            y.fill(b[o]);
            for c in 0..cin {
                let xr = &xs[(sample * cin + c) * len..][..len];
                let wr = &w[(o * cin + c) * k..][..k];
                for (tap, &wv) in wr.iter().enumerate() {
                    let (lo, hi, shift) = tap_range(tap, pad, len);
                    if lo < hi {
                        axpy(wv, &xr[lo + shift - pad..hi + shift - pad], &mut y[lo..hi]);
                    }
                }
            }
        });
        Ok(out)
    }

    /// Returns the input gradient and the parameter gradients.
    pub fn backward(
        &self,
        x: &Tensor<T>,
        dy: &Tensor<T>,
        exec: Exec,
    ) -> Result<(Tensor<T>, ConvGrads<T>)> {
        let (n, len) = self.check_input(x)?;
        let (filters, cin, k) = (self.filters(), self.in_channels(), self.kernel());
        if dy.shape() != [n, filters, len] {
            return Err(Error::Shape(format!(
                "conv upstream gradient {:?}, expected {:?}",
                dy.shape(),
                [n, filters, len]
            )));
        }
        let pad = self.padding();
        let xs = x.data();
        let g = dy.data();
        let w = self.weight.data();

        let mut dx = Tensor::zeros(&[n, cin, len]);
        par_chunks(exec, dx.data_mut(), len, |row, dxr| {
            let (sample, c) = (row / cin, row % cin);
            for o in 0..filters {
                let gr = &g[(sample * filters + o) * len..][..len];
                let wr = &w[(o * cin + c) * k..][..k];
                for (tap, &wv) in wr.iter().enumerate() {
                    // x index j = i + tap - pad feeds output i
                    let (lo, hi, shift) = tap_range(tap, pad, len);
                    if lo < hi {
                        axpy(
                            wv,
                            &gr[lo..hi],
                            &mut dxr[lo + shift - pad..hi + shift - pad],
                        );
                    }
                }
            }
        });

        let mut dw = Tensor::zeros(&[filters, cin, k]);
        par_chunks(exec, dw.data_mut(), cin * k, |o, dwr| {
            for sample in 0..n {
                let gr = &g[(sample * filters + o) * len..][..len];
                for c in 0..cin {
                    let xr = &xs[(sample * cin + c) * len..][..len];
                    for tap in 0..k {
                        let (lo, hi, shift) = tap_range(tap, pad, len);
                        if lo < hi {
                            dwr[c * k + tap] +=
                                dot(&gr[lo..hi], &xr[lo + shift - pad..hi + shift - pad]);
                        }
                    }
                }
            }
        });

        let mut db = Tensor::zeros(&[filters]);
        par_chunks(exec, db.data_mut(), 1, |o, dbr| {
            dbr[0] = (0..n)
                .map(|sample| {
                    g[(sample * filters + o) * len..][..len]
                        .iter()
                        .copied()
                        .sum::<T>()
                })
                .fold(T::zero(), |a, b| a + b);
        });

        Ok((
            dx,
            ConvGrads {
                weight: dw,
                bias: db,
            },
        ))
    }
}

/// Output index range `[lo, hi)` for which `i + tap - pad` lies in `[0, len)`,
/// plus `tap` so callers can form the input offset `i + tap - pad`.
#[inline]
fn tap_range(tap: usize, pad: usize, len: usize) -> (usize, usize, usize) {
    let lo = pad.saturating_sub(tap);
    let hi = (len + pad).saturating_sub(tap).min(len);
    (lo, hi.max(lo), tap)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[allow(clippy::too_many_arguments)]
    fn brute_force(
        x: &[f64],
        n: usize,
        cin: usize,
        len: usize,
        w: &[f64],
        f: usize,
        k: usize,
        b: &[f64],
    ) -> Vec<f64> {
        let pad = (k / 2) as isize;
        let mut out = vec![0.0; n * f * len];
        for s in 0..n {
            for o in 0..f {
                for i in 0..len {
                    let mut acc = b[o];
                    for c in 0..cin {
                        for t in 0..k {
                            let j = i as isize + t as isize - pad;
                            if j >= 0 && (j as usize) < len {
                                acc +=
                                    w[(o * cin + c) * k + t] * x[(s * cin + c) * len + j as usize];
                            }
                        }
                    }
                    out[(s * f + o) * len + i] = acc;
                }
            }
        }
        out
    }

    #[test]
    fn hand_example() {
        let layer = Conv1d::new(
            Tensor::new(&[1, 1, 3], vec![1.0, 2.0, 3.0]).unwrap(),
            Tensor::zeros(&[1]),
        )
        .unwrap();
        let x = Tensor::new(&[1, 1, 5], vec![0.0, 0.0, 1.0, 0.0, 0.0]).unwrap();
        let y = layer.forward(&x, Exec::Serial).unwrap();
        assert_eq!(y.data(), &[0.0, 3.0, 2.0, 1.0, 0.0]);
        let oracle = brute_force(x.data(), 1, 1, 5, layer.weight.data(), 1, 3, &[0.0]);
        assert_eq!(y.data(), oracle.as_slice());
    }

    #[test]
    fn identity_kernel() {
        let layer = Conv1d::new(
            Tensor::new(&[1, 1, 1], vec![1.0f32]).unwrap(),
            Tensor::zeros(&[1]),
        )
        .unwrap();
        let x = Tensor::new(&[1, 1, 4], vec![0.5, -1.0, 0.25, 0.0]).unwrap();
        assert_eq!(layer.forward(&x, Exec::Serial).unwrap(), x);
    }

    #[test]
    fn first_section_shape() {
        let layer = Conv1d::<f32>::zeros(192, 1, 11);
        let x = Tensor::zeros(&[1, 1, 24_000]);
        assert_eq!(
            layer.forward(&x, Exec::Parallel).unwrap().shape(),
            &[1, 192, 24_000]
        );
    }

    #[test]
    fn channel_mismatch() {
        let layer = Conv1d::<f32>::zeros(4, 2, 3);
        assert!(layer
            .forward(&Tensor::zeros(&[1, 3, 10]), Exec::Serial)
            .is_err());
    }

    #[test]
    fn kernel_longer_than_input() {
        let w: Vec<f64> = (0..7).map(|i| i as f64).collect();
        let layer = Conv1d::new(
            Tensor::new(&[1, 1, 7], w.clone()).unwrap(),
            Tensor::zeros(&[1]),
        )
        .unwrap();
        let x = Tensor::new(&[1, 1, 2], vec![1.0, -2.0]).unwrap();
        let y = layer.forward(&x, Exec::Serial).unwrap();
        assert_eq!(
            y.data(),
            brute_force(x.data(), 1, 1, 2, &w, 1, 7, &[0.0]).as_slice()
        );
    }

    fn values(len: usize, seed: u64) -> Vec<f64> {
        (0..len)
            .map(|i| (((i as u64 * 2654435761 + seed * 97) % 1000) as f64 / 500.0) - 1.0)
            .collect()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(24))]
        #[test]
        fn matches_brute_force(n in 1usize..3, cin in 1usize..4, f in 1usize..4, half in 0usize..4, len in 1usize..20, seed in 0u64..1000) {
            let k = 2 * half + 1;
            let w = values(f * cin * k, seed);
            let b = values(f, seed + 1);
            let x = values(n * cin * len, seed + 2);
            let layer = Conv1d::new(Tensor::new(&[f, cin, k], w.clone()).unwrap(), Tensor::new(&[f], b.clone()).unwrap()).unwrap();
            let xt = Tensor::new(&[n, cin, len], x.clone()).unwrap();
            let y = layer.forward(&xt, Exec::Serial).unwrap();
            let oracle = brute_force(&x, n, cin, len, &w, f, k, &b);
            for (a, b) in y.data().iter().zip(&oracle) {
                prop_assert!((a - b).abs() < 1e-12);
            }
            // parallel agrees bitwise
            prop_assert_eq!(layer.forward(&xt, Exec::Parallel).unwrap(), y);
        }

        #[test]
        fn linear_without_bias(alpha in -3.0f64..3.0, seed in 0u64..1000) {
            let layer = Conv1d::new(Tensor::new(&[2, 2, 5], values(20, seed)).unwrap(), Tensor::zeros(&[2])).unwrap();
            let x = Tensor::new(&[1, 2, 9], values(18, seed + 5)).unwrap();
            let ya = layer.forward(&x.map(|v| v * alpha), Exec::Serial).unwrap();
            let y = layer.forward(&x, Exec::Serial).unwrap();
            for (a, b) in ya.data().iter().zip(y.data()) {
                prop_assert!((a - alpha * b).abs() < 1e-12);
            }
        }
    }
}
