//! Dense tensors, a define-by-run reverse-mode tape and the Adam optimizer.
//!
//! The engine is generic over the element type so the same network code runs in `f32` for
//! training and in `f64` when gradients are checked against finite differences.

mod adam;
mod kernels;
mod layers;
mod tape;
mod tensor;

use std::fmt::Debug;
use std::iter::Sum;
use std::ops::{AddAssign, MulAssign};

use num_traits::Float;

pub use adam::{adam_step, AdamConfig, AdamState};
pub use layers::{Activation, INSTANCE_NORM_EPS, L2_NORMALIZE_EPS};
pub use tape::{Tape, Var};
pub use tensor::{Precision, Tensor};

/// Element type of a tensor.
pub trait Real:
    Float + Sum + AddAssign + MulAssign + Send + Sync + Debug + Default + 'static
{
    fn lit(x: f64) -> Self;
    fn as_f64(self) -> f64;
    /// Round to the nearest IEEE-754 binary16 value (ties to even).
    fn quantize_f16(self) -> Self;
}

impl Real for f32 {
    #[inline]
    fn lit(x: f64) -> Self {
        x as f32
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self as f64
    }
    #[inline]
    fn quantize_f16(self) -> Self {
        crate::precision::quantize_f16(self)
    }
}

impl Real for f64 {
    #[inline]
    fn lit(x: f64) -> Self {
        x
    }
    #[inline]
    fn as_f64(self) -> f64 {
        self
    }
    #[inline]
    fn quantize_f16(self) -> Self {
        crate::precision::quantize_f16(self as f32) as f64
    }
}
