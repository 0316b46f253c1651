use std::fmt::Debug;
use std::iter::Sum;

use num_traits::{Float, NumAssign};

/// Floating-point element type of tensors: `f32` for training, `f64` for
/// the finite-difference shadow.
pub trait Scalar: Float + NumAssign + Sum + Debug + Default + Send + Sync + 'static {
    fn from_f64(v: f64) -> Self;
    fn to_f64(self) -> f64;
}

impl Scalar for f32 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v as f32
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self as f64
    }
}

impl Scalar for f64 {
    #[inline]
    fn from_f64(v: f64) -> Self {
        v
    }
    #[inline]
    fn to_f64(self) -> f64 {
        self
    }
}
