//! A small differentiable-computation engine: dense and 1-D convolution layers,
//! SiLU, two-way softmax, dropout, NLL/MSE losses, Adam, and finite-difference checks.
//!
//! Layers cache what their backward pass needs during `forward`; `backward`
//! accumulates into the parameter gradient buffers and marks them fresh for the
//! next [`LayerParams::adam_step`].

mod checkpoint;
pub mod gradcheck;
mod layers;
mod matrix;
pub mod ops;
mod optim;

pub use checkpoint::{read_checkpoint, write_checkpoint, Checkpoint, NamedTensor, CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
pub use gradcheck::{grad_check, GradCheckReport, Parameterized};
pub use layers::{Conv1d, Dense, LayerParams};
pub use matrix::Matrix;
pub use ops::{dropout, mse_loss, nll_loss, silu, softmax2};
pub use optim::OptimizerConfig;
