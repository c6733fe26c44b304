//! Minimal reverse-mode automatic differentiation over `f64` tensors.
//!
//! A [`Graph`] is built once from nodes that reference earlier nodes, then
//! evaluated with [`Graph::forward`] for any batch size. [`Graph::backward`]
//! accumulates gradients of a scalar root into a [`ParamStore`].

mod check;
mod graph;
pub mod kernels;
mod ops;
mod param;
mod tensor;

pub use check::grad_check;
pub use graph::{Bindings, Graph, NodeId, Op};
pub use ops::{dilated_causal_conv1d, reparameterize};
pub use param::{Param, ParamId, ParamStore};
pub use tensor::Tensor;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum AutodiffError {
    #[error("shape mismatch at {node}: {detail}")]
    ShapeMismatch { node: String, detail: String },
    #[error("channel mismatch at {node}: weights expect {expected} input channels, got {got}")]
    ChannelMismatch { node: String, expected: usize, got: usize },
    #[error("dilation must be at least 1 at {node}")]
    InvalidDilation { node: String },
    #[error("input node {node} is not bound")]
    UnboundInput { node: String },
    #[error("backward called before forward")]
    BackwardBeforeForward,
    #[error("node has no value; run forward first")]
    NotEvaluated,
    #[error("backward root must be a scalar, got shape {shape:?}")]
    NonScalarRoot { shape: Vec<usize> },
    #[error("shape {shape:?} does not hold {len} values")]
    BadTensor { shape: Vec<usize>, len: usize },
}
