//! Dense tensors, forward kernels, a gradient tape, finite-difference
//! checking and SGD. Everything runs in `f64`.

mod check;
pub mod ops;
mod sgd;
mod tape;
mod tensor;

pub use check::grad_check;
pub use sgd::{sgd_step, sgd_update};
pub use tape::{distance, GradTape, Gradients, TensorId};
pub use tensor::Tensor;
