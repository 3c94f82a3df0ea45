//! Non-overlapping 1-D pooling with window = stride = `k`.

use super::{Scalar, Tensor};
use crate::{Error, Result};

fn pooled_dims<T: Scalar>(x: &Tensor<T>, k: usize) -> Result<(usize, usize, usize)> {
    let (n, c, l) = match *x.shape() {
        [n, c, l] => (n, c, l),
        _ => {
            return Err(Error::Shape(format!(
                "pooling expects [N, C, L], got {:?}",
                x.shape()
            )))
        }
    };
    if k == 0 || l % k != 0 {
        return Err(Error::Shape(format!(
            "length {l} is not divisible by pool size {k}"
        )));
    }
    Ok((n, c, l))
}

pub fn avgpool1d<T: Scalar>(x: &Tensor<T>, k: usize) -> Result<Tensor<T>> {
    let (n, c, l) = pooled_dims(x, k)?;
    let inv = T::of(1.0 / k as f64);
    let data = x
        .data()
        .chunks_exact(k)
        .map(|w| w.iter().copied().fold(T::zero(), |a, b| a + b) * inv)
        .collect();
    Tensor::new(&[n, c, l / k], data)
}

pub fn avgpool1d_backward<T: Scalar>(dy: &Tensor<T>, k: usize) -> Result<Tensor<T>> {
    let (n, c, lo) = match *dy.shape() {
        [n, c, l] => (n, c, l),
        _ => return Err(Error::Shape("pooling gradient must be rank 3".into())),
    };
    let inv = T::of(1.0 / k as f64);
    let data = dy
        .data()
        .iter()
        .flat_map(|&g| std::iter::repeat_n(g * inv, k))
        .collect();
    Tensor::new(&[n, c, lo * k], data)
}

/// Winning flat input index for every pooled output.
#[derive(Debug, Clone, PartialEq)]
pub struct MaxPoolIndices {
    pub input_shape: Vec<usize>,
    pub argmax: Vec<usize>,
}

/// Window maximum; ties go to the lowest index.
pub fn maxpool1d<T: Scalar>(x: &Tensor<T>, k: usize) -> Result<(Tensor<T>, MaxPoolIndices)> {
    let (n, c, l) = pooled_dims(x, k)?;
    let mut values = Vec::with_capacity(x.len() / k);
    let mut argmax = Vec::with_capacity(x.len() / k);
    for (w, win) in x.data().chunks_exact(k).enumerate() {
        let mut best = 0;
        for (i, v) in win.iter().enumerate().skip(1) {
            if *v > win[best] {
                best = i;
            }
        }
        values.push(win[best]);
        argmax.push(w * k + best);
    }
    Ok((
        Tensor::new(&[n, c, l / k], values)?,
        MaxPoolIndices {
            input_shape: x.shape().to_vec(),
            argmax,
        },
    ))
}

pub fn maxpool1d_backward<T: Scalar>(
    dy: &Tensor<T>,
    indices: &MaxPoolIndices,
) -> Result<Tensor<T>> {
    if dy.len() != indices.argmax.len() {
        return Err(Error::Shape(
            "max-pool gradient does not match recorded indices".into(),
        ));
    }
    let mut dx = Tensor::zeros(&indices.input_shape);
    let out = dx.data_mut();
    for (&g, &i) in dy.data().iter().zip(&indices.argmax) {
        out[i] = g;
    }
    Ok(dx)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn t(shape: &[usize], v: Vec<f64>) -> Tensor<f64> {
        Tensor::new(shape, v).unwrap()
    }

    #[test]
    fn average() {
        let x = t(&[1, 1, 8], (1..=8).map(f64::from).collect());
        assert_eq!(avgpool1d(&x, 4).unwrap().data(), &[2.5, 6.5]);
        let c = t(&[1, 2, 6], vec![0.75; 12]);
        assert!(avgpool1d(&c, 3).unwrap().data().iter().all(|&v| v == 0.75));
        let dx = avgpool1d_backward(&t(&[1, 1, 2], vec![4.0, 8.0]), 4).unwrap();
        assert_eq!(dx.data(), &[1.0, 1.0, 1.0, 1.0, 2.0, 2.0, 2.0, 2.0]);
    }

    #[test]
    fn maximum_and_ties() {
        let (y, idx) = maxpool1d(&t(&[1, 1, 4], vec![1.0, 3.0, 2.0, 5.0]), 2).unwrap();
        assert_eq!(y.data(), &[3.0, 5.0]);
        assert_eq!(idx.argmax, vec![1, 3]);
        let (y, idx) = maxpool1d(&t(&[1, 1, 2], vec![2.0, 2.0]), 2).unwrap();
        assert_eq!(y.data(), &[2.0]);
        assert_eq!(idx.argmax, vec![0]);
    }

    #[test]
    fn max_backward_routes_one_value_per_window() {
        let x = t(
            &[1, 2, 6],
            vec![
                0.1, 0.9, 0.3, -1.0, -2.0, -0.5, 4.0, 4.0, 1.0, 0.0, 0.0, 0.0,
            ],
        );
        let (_, idx) = maxpool1d(&x, 3).unwrap();
        let dx = maxpool1d_backward(&t(&[1, 2, 2], vec![1.0, 2.0, 3.0, 4.0]), &idx).unwrap();
        assert_eq!(
            dx.data(),
            &[0.0, 1.0, 0.0, 0.0, 0.0, 2.0, 3.0, 0.0, 0.0, 4.0, 0.0, 0.0]
        );
        for w in dx.data().chunks(3) {
            assert_eq!(w.iter().filter(|&&v| v != 0.0).count(), 1);
        }
    }

    #[test]
    fn table_shapes() {
        let x = Tensor::<f32>::zeros(&[1, 192, 24_000]);
        assert_eq!(avgpool1d(&x, 4).unwrap().shape(), &[1, 192, 6000]);
        let x = Tensor::<f32>::zeros(&[1, 512, 250]);
        assert_eq!(maxpool1d(&x, 2).unwrap().0.shape(), &[1, 512, 125]);
    }

    #[test]
    fn indivisible_length() {
        let x = Tensor::<f32>::zeros(&[1, 1, 7]);
        assert!(avgpool1d(&x, 2).is_err());
        assert!(maxpool1d(&x, 4).is_err());
    }
}
