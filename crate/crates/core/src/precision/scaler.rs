use crate::error::{contract, Result};
use crate::nn::{Tape, Tensor, Var};

const MAX_SCALE: f32 = 16_777_216.0; // 2^24
const MIN_SCALE: f32 = 1.0 / 16_384.0; // 2^-14

/// Dynamic loss scale: halves on overflow, doubles after `growth_interval` finite steps.
#[derive(Clone, Debug, PartialEq)]
pub struct LossScaler {
    scale: f32,
    growth_interval: u32,
    good_steps: u32,
}

impl Default for LossScaler {
    fn default() -> Self {
        LossScaler {
            scale: 4096.0,
            growth_interval: 200,
            good_steps: 0,
        }
    }
}

fn is_power_of_two(v: f32) -> bool {
    v > 0.0 && v.is_finite() && v.to_bits() & 0x7f_ffff == 0 && v.to_bits() >> 23 != 0
}

impl LossScaler {
    pub fn new(scale: f32, growth_interval: u32) -> Result<Self> {
        contract!(
            is_power_of_two(scale) && (MIN_SCALE..=MAX_SCALE).contains(&scale),
            "loss scale must be a power of two in [2^-14, 2^24], got {scale}"
        );
        contract!(growth_interval > 0, "growth interval must be positive");
        Ok(LossScaler {
            scale,
            growth_interval,
            good_steps: 0,
        })
    }

    pub fn scale(&self) -> f32 {
        self.scale
    }

    pub fn good_steps(&self) -> u32 {
        self.good_steps
    }

    pub fn growth_interval(&self) -> u32 {
        self.growth_interval
    }

    /// Records the outcome of one step.
    pub fn update(&mut self, overflow: bool) {
        if overflow {
            self.scale = (self.scale * 0.5).max(MIN_SCALE);
            self.good_steps = 0;
        } else {
            self.good_steps += 1;
            if self.good_steps >= self.growth_interval {
                self.scale = (self.scale * 2.0).min(MAX_SCALE);
                self.good_steps = 0;
            }
        }
    }
}

/// Gradients of `scale · loss`, stored as binary16.
pub fn scaled_backward(
    tape: &mut Tape<f32>,
    loss: Var,
    params: &[Var],
    scaler: &LossScaler,
) -> Result<Vec<Tensor>> {
    let scaled = tape.scale(loss, scaler.scale() as f64);
    let grads = tape.backward(scaled, params)?;
    Ok(grads.iter().map(Tensor::to_fp16).collect())
}

#[derive(Clone, Debug, PartialEq)]
pub enum Unscaled {
    Finite(Vec<Tensor>),
    Overflow,
}

/// Divides by the current scale in fp32, or reports an overflow if any element is not finite.
/// Updates the scaler either way.
pub fn check_finite_and_unscale(grads: Vec<Tensor>, scaler: &mut LossScaler) -> Unscaled {
    if grads.iter().any(|g| !g.all_finite()) {
        scaler.update(true);
        return Unscaled::Overflow;
    }
    let inv = scaler.scale();
    let out = grads.iter().map(|g| g.to_fp32().map(|v| v / inv)).collect();
    scaler.update(false);
    Unscaled::Finite(out)
}
