//! Emulated mixed-precision training.
//!
//! Half precision is emulated on `f32` storage: a "binary16" tensor is an `f32` tensor whose
//! every element is exactly representable in IEEE-754 binary16. Byte costs are tracked by a
//! separate logical [`MemoryLedger`].

mod f16;
mod ledger;
mod master;
mod scaler;

pub use f16::{f16_bits_to_f32, f32_to_f16_bits, quantize_f16, F16_MAX, F16_MIN_SUBNORMAL};
pub use ledger::{BufferCategory, MemoryLedger, MemoryReport, PrecisionMode};
pub use master::{MasterWeights, StepOutcome};
pub use scaler::{check_finite_and_unscale, scaled_backward, LossScaler, Unscaled};
