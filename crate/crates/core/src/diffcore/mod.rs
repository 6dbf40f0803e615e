//! Reverse-mode differentiation over dense `f64` tensors.
//!
//! A [`Graph`] is an append-only arena of nodes. Every operation evaluates
//! eagerly when it is recorded, so a node's value is available as soon as the
//! [`Var`] handle exists. Backward passes are themselves recorded as graph
//! operations, which is what makes gradients of gradients possible:
//!
//! ```
//! use softdice::diffcore::{Graph, Tensor};
//!
//! let g = Graph::new();
//! let w = g.param(Tensor::row_vector(&[0.6, 0.8]).unwrap());
//! let x = g.constant(Tensor::row_vector(&[1.0, -2.0]).unwrap());
//! // d/dx (x . w) = w, and |w| = 1
//! let grad_x = g.input_gradient(x, |x| x.mul(w).sum()).unwrap();
//! let norm = grad_x.l2_norm();
//! assert!((norm.item() - 1.0).abs() < 1e-12);
//! // the norm is still differentiable w.r.t. w
//! let dw = g.gradient(norm, &[w]).unwrap();
//! assert!((dw[0].data()[0] - 0.6).abs() < 1e-12);
//! ```

mod graph;
mod tensor;

pub use graph::{Graph, Var};
pub use tensor::Tensor;

use thiserror::Error;

/// Inputs to `log` are clamped from below at this value.
pub const LOG_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EngineError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("numerical overflow in `{op}`: {detail}")]
    NonFinite { op: String, detail: String },
    #[error("contract violation: gradient root must be scalar, got shape {shape:?}")]
    NonScalarRoot { shape: Vec<usize> },
    #[error("second-order unsupported op(s) on the differentiated path: {}", ops.join(", "))]
    SecondOrderUnsupported { ops: Vec<String> },
}
