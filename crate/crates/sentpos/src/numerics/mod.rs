//! Numerical substrate: tensors, reverse-mode gradients, Adam, and
//! finite-difference gradient verification.

pub mod adam;
pub mod gradcheck;
pub mod graph;
pub mod param;
pub mod tensor;

pub use adam::AdamState;
pub use gradcheck::{grad_check, GradCheckOptions, GradCheckReport, TensorCheck};
pub use graph::{attention, attention_with_probs, linear, Gradients, Graph, NodeId};
pub use param::{ParamId, ParamSet, Parameter};
pub use tensor::Tensor;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum NumericsError {
    #[error("shape mismatch in {op}: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },
    #[error("index {index} out of bounds ({bound}) in {op}")]
    IndexOutOfBounds {
        op: &'static str,
        index: usize,
        bound: usize,
    },
    #[error("attention mask hides every position; at least one key must stay unmasked")]
    AllMasked,
}
