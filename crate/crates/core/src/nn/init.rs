use rand::Rng;
use rand_distr::{Distribution, Normal};

use super::{Scalar, Tensor};
use crate::{Error, Result};

/// Kaiming normal initialization, fan-out variant: `N(0, 2 / fan_out)`.
///
/// For a convolution `fan_out = f_n * f_l`; for a dense layer `fan_out = d_o`.
pub fn kaiming_normal<T: Scalar, R: Rng + ?Sized>(
    shape: &[usize],
    fan_out: usize,
    rng: &mut R,
) -> Result<Tensor<T>> {
    if fan_out == 0 {
        return Err(Error::Config("fan_out must be at least 1".into()));
    }
    let std = (2.0 / fan_out as f64).sqrt();
    let normal = Normal::new(0.0, std).map_err(|e| Error::Config(e.to_string()))?;
    let len = shape.iter().product();
    let data = (0..len).map(|_| T::of(normal.sample(rng))).collect();
    Tensor::new(shape, data)
}
