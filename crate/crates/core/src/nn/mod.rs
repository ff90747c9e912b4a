//! Small dense networks with exact backpropagation and Adam.
//!
//! Everything runs in `f64`. Losses and gradients are batch means.

mod adam;
mod checkpoint;
mod dense;
mod loss;
mod matrix;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use checkpoint::{Checkpoint, LayerRecord};
pub use dense::{Activation, DenseNet, Gradients, Layer, LayerGradients, Tape};
pub use loss::{sigmoid, sigmoid_bce, softmax, softmax_cross_entropy};
pub use matrix::Matrix;
