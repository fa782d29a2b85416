//! Adaptive graph reasoning for optical flow, built on a small reverse-mode
//! tensor engine.

pub mod data;
pub mod error;
pub mod flow;
pub mod graph;
pub mod nn;
pub mod run;
pub mod tensor;

pub use error::{Error, Result};
pub use tensor::{no_grad, Scalar, Tensor};
