//! Minimal reverse-mode differentiation over dense and sparse matrices.
//!
//! Only the primitives the encoders and losses need are provided. Every
//! primitive is checked against central finite differences in `f64`.

mod exec;
pub mod gradcheck;
mod matrix;
mod scalar;
mod sparse;
mod tape;

pub use exec::Exec;
pub use gradcheck::{grad_check, GradCheckReport};
pub use matrix::Matrix;
pub use scalar::Scalar;
pub use sparse::SparseMatrix;
pub use tape::{Gradients, Tape, Var};
