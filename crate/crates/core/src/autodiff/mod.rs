//! Reverse-mode differentiable array engine.

pub mod gradcheck;
pub mod graph;
pub mod kernels;
pub mod tensor;

pub use gradcheck::{grad_check, relative_error, GradCheck, GradCheckReport};
pub use graph::{
    sigmoid, Activation, BatchStats, Graph, NormMode, PoolKind, RunningStats, Var, PROB_CLAMP,
};
pub use tensor::{DType, Scalar, Tensor};
