use super::scaler::{check_finite_and_unscale, LossScaler, Unscaled};
use crate::error::{contract, Result};
use crate::nn::{adam_step, AdamConfig, AdamState, Tensor};

/// fp32 master parameters together with their binary16 working copies.
#[derive(Clone, Debug, PartialEq)]
pub struct MasterWeights {
    master: Vec<Tensor>,
    working: Vec<Tensor>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StepOutcome {
    Applied,
    Skipped,
}

impl MasterWeights {
    pub fn new(params: Vec<Tensor>) -> Self {
        let working = params.iter().map(Tensor::to_fp16).collect();
        MasterWeights {
            master: params,
            working,
        }
    }

    pub fn master(&self) -> &[Tensor] {
        &self.master
    }

    pub fn working(&self) -> &[Tensor] {
        &self.working
    }

    pub fn into_master(self) -> Vec<Tensor> {
        self.master
    }

    /// Adam on the fp32 masters, then re-derives the working copies.
    pub fn master_update(
        &mut self,
        grads: &[Tensor],
        adam: &mut AdamState,
        cfg: &AdamConfig,
    ) -> Result<()> {
        contract!(
            grads.iter().all(Tensor::all_finite),
            "master_update requires finite gradients"
        );
        adam_step(&mut self.master, grads, adam, cfg)?;
        for (w, m) in self.working.iter_mut().zip(&self.master) {
            *w = m.to_fp16();
        }
        Ok(())
    }

    /// Unscales binary16 gradients and applies them, or skips the step on overflow.
    pub fn apply_scaled(
        &mut self,
        scaled_grads: Vec<Tensor>,
        scaler: &mut LossScaler,
        adam: &mut AdamState,
        cfg: &AdamConfig,
    ) -> Result<StepOutcome> {
        match check_finite_and_unscale(scaled_grads, scaler) {
            Unscaled::Overflow => Ok(StepOutcome::Skipped),
            Unscaled::Finite(g) => {
                self.master_update(&g, adam, cfg)?;
                Ok(StepOutcome::Applied)
            }
        }
    }
}
