//! Minimal reverse-mode differentiation over dense 2-D `f64` tensors,
//! with the GRU cell, Adam and a finite-difference checker built on it.

mod adam;
pub mod checkpoint;
mod gradcheck;
mod graph;
mod gru;
mod params;
mod tensor;

pub use adam::{warmup_factor, AdamConfig, AdamState};
pub use checkpoint::{Checkpoint, DType, NamedArray};
pub use gradcheck::{compare_with_differences, gradient_check, GradCheckOptions, GradCheckReport};
pub use graph::{sigmoid, Graph, Var};
pub use gru::GruParams;
pub use params::{Bound, ParamId, ParamStore};
pub use tensor::Tensor;
