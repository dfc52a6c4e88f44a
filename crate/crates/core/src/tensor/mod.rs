//! Dense tensors, reverse-mode gradients and the Adam optimizer.

mod adam;
mod gradcheck;
mod matrix;
mod tape;

pub use adam::{AdamConfig, AdamState};
pub use gradcheck::{check_gradients, GradCheckReport, GroupCheck};
pub use matrix::Matrix;
pub use tape::{argmax_rows, softmax_rows, BoundParams, Gradients, ParamId, ParamSet, Tape, Tensor, Var};
