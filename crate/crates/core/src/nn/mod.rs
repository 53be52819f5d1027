//! Small dense network kernel: matrices, the MLP, losses and SGD.

mod loss;
mod matrix;
mod mlp;
mod optim;

pub use loss::{loss_bce, loss_bce_masked, loss_ce, LossGrad, PROB_FLOOR};
pub use matrix::Matrix;
pub use mlp::{argmax, ForwardTrace, GradientSet, Head, MlpModel, ModelDocument, MODEL_FORMAT, MODEL_VERSION};
pub use optim::{sgd_step, SgdConfig, SgdState};
