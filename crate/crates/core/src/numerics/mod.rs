//! Dense `f64` tensors and a single-use reverse-mode gradient tape.

pub mod kernels;
mod tape;
mod tensor;

use thiserror::Error;

pub use tape::{Gradients, Tape, Var};
pub use tensor::Tensor;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NumericsError {
    #[error("dimension mismatch in {op}: {left:?} vs {right:?}")]
    Dimension {
        op: &'static str,
        left: Vec<usize>,
        right: Vec<usize>,
    },
    #[error("shape {shape:?} needs {} values, got {len}", shape.iter().product::<usize>())]
    DataLength { shape: Vec<usize>, len: usize },
    #[error("shape {shape:?} has a zero extent")]
    ZeroExtent { shape: Vec<usize> },
    #[error("expected {expected}, got shape {shape:?}")]
    Rank {
        expected: &'static str,
        shape: Vec<usize>,
    },
    #[error("every position of a softmax row is masked")]
    DegenerateMask,
    #[error("index {index} out of range for extent {bound}")]
    Index { index: usize, bound: usize },
    #[error("tape already consumed by a backward pass")]
    TapeConsumed,
    #[error("variable belongs to a different tape")]
    ForeignVar,
}

#[cfg(test)]
mod tests;
