//! Small deterministic numeric core: dense tensors, affine maps,
//! activations, softmax cross-entropy, dropout, Adam and finite-difference
//! gradient verification. Everything runs in `f64`.

mod adam;
mod dropout;
mod gradcheck;
pub mod kernels;
mod loss;
mod params;
mod tensor;

pub use adam::{adam_step, AdamConfig, AdamState, LEARNING_RATE_GRID};
pub use dropout::{apply_mask, dropout, dropout_mask, DropoutSource, Mode};
pub use gradcheck::{gradient_check, GradCheckReport, Sampling, GRAD_CHECK_FLOOR};
pub use kernels::{affine, sigmoid};
pub use loss::{softmax, softmax_cross_entropy, softmax_cross_entropy_slice};
pub use params::{ParamId, ParameterSet, TensorList};
pub use tensor::Tensor;
