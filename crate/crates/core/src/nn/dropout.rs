use rand::Rng;

use super::{Mode, Scalar, Tensor};
use crate::{Error, Result};

/// Inverted dropout. In train mode each element is zeroed with probability
/// `p` and survivors are scaled by `1 / (1 - p)`; the returned mask holds the
/// per-element multiplier. Eval mode returns the input unchanged and no mask.
pub fn dropout_forward<T: Scalar, R: Rng + ?Sized>(
    x: &Tensor<T>,
    p: f64,
    mode: Mode,
    rng: &mut R,
) -> Result<(Tensor<T>, Option<Tensor<T>>)> {
    if !(0.0..1.0).contains(&p) {
        return Err(Error::Config(format!(
            "dropout probability {p} outside [0, 1)"
        )));
    }
    if mode == Mode::Eval {
        return Ok((x.clone(), None));
    }
    let keep = T::of(1.0 / (1.0 - p));
    let mask_values = (0..x.len())
        .map(|_| {
            if rng.gen::<f64>() < p {
                T::zero()
            } else {
                keep
            }
        })
        .collect();
    let mask = Tensor::new(x.shape(), mask_values)?;
    let y = Tensor::new(
        x.shape(),
        x.data()
            .iter()
            .zip(mask.data())
            .map(|(&a, &m)| a * m)
            .collect(),
    )?;
    Ok((y, Some(mask)))
}

pub fn dropout_backward<T: Scalar>(dy: &Tensor<T>, mask: &Tensor<T>) -> Result<Tensor<T>> {
    if dy.shape() != mask.shape() {
        return Err(Error::Shape(
            "dropout gradient does not match its mask".into(),
        ));
    }
    Tensor::new(
        dy.shape(),
        dy.data()
            .iter()
            .zip(mask.data())
            .map(|(&g, &m)| g * m)
            .collect(),
    )
}
