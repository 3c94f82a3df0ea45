//! Numeric kernels with analytic gradients.
//!
//! Every forward kernel has a matching backward that returns the exact
//! differential with respect to its input and parameters. Kernels are
//! generic over [`Scalar`] so the same code runs in `f32` for training and
//! `f64` for finite-difference checks.

mod adam;
mod batchnorm;
mod conv;
mod dense;
mod dropout;
pub mod gradcheck;
mod init;
mod pool;
mod prelu;
mod tensor;

pub use adam::{AdamConfig, AdamState};
pub use batchnorm::{BatchNorm, BatchNormCache, BatchNormGrads};
pub use conv::{Conv1d, ConvGrads};
pub use dense::{Dense, DenseGrads};
pub use dropout::{dropout_backward, dropout_forward};
pub use init::kaiming_normal;
pub use pool::{avgpool1d, avgpool1d_backward, maxpool1d, maxpool1d_backward, MaxPoolIndices};
pub use prelu::PRelu;
pub use tensor::{Exec, Mode, Scalar, Tensor};

pub(crate) use tensor::{dot, par_chunks};
