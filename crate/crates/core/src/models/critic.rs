use rand_chacha::ChaCha8Rng;

use super::{add_channel_bias, boundary, dense, Init, ModelConfig, ParamStore};
use crate::error::{contract, Result};
use crate::nn::{Real, Tape, Var};

/// Four stride-2 conv blocks with leaky ReLU and no normalization, followed by a 1×1
/// adversarial head (spatially averaged) and a dense classification head.
#[derive(Clone, Debug)]
pub struct Critic {
    cfg: ModelConfig,
}

#[derive(Clone, Copy, Debug)]
pub struct CriticOutput {
    /// Raw critic value per sample, shape `[N]`.
    pub adv: Var,
    /// Attribute logits, shape `N×L_cls`.
    pub cls: Var,
}

impl Critic {
    pub fn new(cfg: &ModelConfig) -> Self {
        Critic { cfg: cfg.clone() }
    }

    fn final_extent(&self) -> usize {
        self.cfg.image_size / 16
    }

    pub fn init_params(&self, rng: &mut ChaCha8Rng) -> ParamStore {
        let mut init = Init {
            rng,
            store: ParamStore::new(),
        };
        let mut cin = self.cfg.image_channels;
        for (i, &c) in self.cfg.critic_widths.iter().enumerate() {
            init.uniform(&format!("conv{}.weight", i + 1), &[c, cin, 4, 4], cin * 16);
            init.uniform(&format!("conv{}.bias", i + 1), &[c], cin * 16);
            cin = c;
        }
        init.uniform("adv.weight", &[1, cin, 1, 1], cin);
        init.uniform("adv.bias", &[1], cin);
        let flat = cin * self.final_extent() * self.final_extent();
        let lcls = self.cfg.labels.cls_dim();
        init.uniform("cls.weight", &[flat, lcls], flat);
        init.uniform("cls.bias", &[lcls], flat);
        init.store
    }

    pub fn forward<S: Real>(
        &self,
        tape: &mut Tape<S>,
        params: &[Var],
        x: Var,
        mpt: bool,
    ) -> Result<CriticOutput> {
        contract!(
            params.len() == 12,
            "critic expects 12 parameters, got {}",
            params.len()
        );
        let trunk = self.trunk(tape, params, x, mpt)?;
        let adv = self.adv_head(tape, params, trunk)?;
        let cls = self.cls_head(tape, params, trunk, mpt)?;
        Ok(CriticOutput { adv, cls })
    }

    /// Critic value only; used for the gradient penalty.
    pub fn score<S: Real>(
        &self,
        tape: &mut Tape<S>,
        params: &[Var],
        x: Var,
        mpt: bool,
    ) -> Result<Var> {
        contract!(
            params.len() == 12,
            "critic expects 12 parameters, got {}",
            params.len()
        );
        let trunk = self.trunk(tape, params, x, mpt)?;
        self.adv_head(tape, params, trunk)
    }

    fn trunk<S: Real>(&self, tape: &mut Tape<S>, p: &[Var], x: Var, mpt: bool) -> Result<Var> {
        let s = tape.shape(x);
        contract!(
            s.len() == 4 && s[2] == self.cfg.image_size && s[3] == self.cfg.image_size,
            "critic input must be N×C×{0}×{0}, got {s:?}",
            self.cfg.image_size
        );
        let mut h = boundary(tape, x, mpt);
        for i in 0..4 {
            let y = tape.conv2d(h, p[2 * i], 2, 1)?;
            let y = add_channel_bias(tape, y, p[2 * i + 1])?;
            let y = tape.leaky_relu(y, self.cfg.leaky_slope);
            h = boundary(tape, y, mpt);
        }
        Ok(h)
    }

    fn adv_head<S: Real>(&self, tape: &mut Tape<S>, p: &[Var], h: Var) -> Result<Var> {
        let y = tape.conv2d(h, p[8], 1, 0)?;
        let y = add_channel_bias(tape, y, p[9])?;
        let s = tape.shape(y).to_vec();
        let sum = tape.sum_to(y, &[s[0], 1, 1, 1])?;
        let mean = tape.scale(sum, 1.0 / (s[2] * s[3]) as f64);
        tape.reshape(mean, &[s[0]])
    }

    fn cls_head<S: Real>(&self, tape: &mut Tape<S>, p: &[Var], h: Var, mpt: bool) -> Result<Var> {
        let s = tape.shape(h).to_vec();
        let flat = tape.reshape(h, &[s[0], s[1] * s[2] * s[3]])?;
        let y = dense(tape, flat, p[10], p[11])?;
        Ok(boundary(tape, y, mpt))
    }
}
