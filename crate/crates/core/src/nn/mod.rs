//! Minimal `f32` reverse-mode autodiff used by the encoder and the neural
//! baselines.

mod matrix;
mod param;
mod tape;

pub use matrix::{matmul, Matrix};
pub use param::{AdamW, AdamWConfig, Gradients, Param, ParamId, ParamStore};
pub use tape::{Tape, Var};

