//! Shared inputs for the kernel benchmarks in `benches/`.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use wenet_core::nn::gradcheck::random_tensor;
use wenet_core::nn::{Conv1d, Dense};
use wenet_core::Tensor;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Standard normal `f32` tensor.
pub fn normal(shape: &[usize], seed: u64) -> Tensor<f32> {
    random_tensor(shape, &mut rng(seed)).cast()
}

pub fn conv(filters: usize, in_channels: usize, kernel: usize) -> Conv1d<f32> {
    Conv1d::new(
        normal(&[filters, in_channels, kernel], 1),
        normal(&[filters], 2),
    )
    .unwrap()
}

pub fn dense(inputs: usize, outputs: usize) -> Dense<f32> {
    Dense::new(normal(&[outputs, inputs], 3), normal(&[outputs], 4)).unwrap()
}
