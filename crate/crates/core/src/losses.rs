//! Loss terms of the Siamese-guided GAN.
//!
//! Functions take tape variables so every term can be differentiated, including the
//! gradient penalty, whose value already contains a gradient.

use serde::{Deserialize, Serialize};

use crate::error::{contract, Result};
use crate::nn::{Real, Tape, Tensor, Var};

/// Probability clamp used by the saturating adversarial loss.
pub const LOG_CLAMP: f64 = 1e-7;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LossWeights {
    pub gp: f64,
    pub rec: f64,
    pub cls: f64,
}

impl Default for LossWeights {
    fn default() -> Self {
        LossWeights {
            gp: 10.0,
            rec: 10.0,
            cls: 1.0,
        }
    }
}

/// Which adversarial objective drives training.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AdvMode {
    /// Critic difference plus gradient penalty.
    #[default]
    Wgan,
    /// Sigmoid cross-entropy form `E[log D(x)] + E[log(1 − D(x̃))]`.
    #[serde(rename = "eq4")]
    Saturating,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Role {
    Critic,
    Generator,
}

/// `½(1 + f_realᵀ f_fake)` per row; returns `[N, 1]` for matrices, a scalar for vectors.
pub fn similarity_kernel<S: Real>(tape: &mut Tape<S>, f_real: Var, f_fake: Var) -> Result<Var> {
    let s = tape.shape(f_real).to_vec();
    contract!(
        s == tape.shape(f_fake),
        "similarity kernel shape mismatch: {s:?} vs {:?}",
        tape.shape(f_fake)
    );
    let prod = tape.mul(f_real, f_fake)?;
    let dot = if s.len() == 2 {
        tape.sum_to(prod, &[s[0], 1])?
    } else {
        tape.sum(prod)?
    };
    let shifted = tape.offset(dot, 1.0);
    Ok(tape.scale(shifted, 0.5))
}

/// Mean absolute difference between an image and its reconstruction.
pub fn cycle_l1_loss<S: Real>(tape: &mut Tape<S>, x: Var, x_rec: Var) -> Result<Var> {
    contract!(
        tape.shape(x) == tape.shape(x_rec),
        "cycle loss shape mismatch: {:?} vs {:?}",
        tape.shape(x),
        tape.shape(x_rec)
    );
    let d = tape.sub(x, x_rec)?;
    let a = tape.abs(d);
    tape.mean(a)
}

/// Batch mean of the similarity kernel between embeddings of originals and reconstructions.
pub fn feature_reconstruction_loss<S: Real>(
    tape: &mut Tape<S>,
    f_real: Var,
    f_rec: Var,
) -> Result<Var> {
    let s = similarity_kernel(tape, f_real, f_rec)?;
    tape.mean(s)
}

fn clamp_prob<S: Real>(tape: &mut Tape<S>, p: Var) -> Var {
    let lo = tape.clamp_min(p, LOG_CLAMP);
    let neg = tape.neg(lo);
    let hi = tape.clamp_min(neg, -(1.0 - LOG_CLAMP));
    tape.neg(hi)
}

/// `E[log p_real] + E[log(1 − p_fake)]` with probabilities clamped to `[1e-7, 1 − 1e-7]`.
pub fn adversarial_loss_from_probs<S: Real>(
    tape: &mut Tape<S>,
    p_real: Var,
    p_fake: Var,
) -> Result<Var> {
    let pr = clamp_prob(tape, p_real);
    let pf = clamp_prob(tape, p_fake);
    let lr = tape.log(pr);
    let real = tape.mean(lr)?;
    let one_minus = tape.neg(pf);
    let one_minus = tape.offset(one_minus, 1.0);
    let lf = tape.log(one_minus);
    let fake = tape.mean(lf)?;
    tape.add(real, fake)
}

/// Saturating adversarial loss on raw critic scores (a sigmoid is applied here).
pub fn adversarial_loss_saturating<S: Real>(
    tape: &mut Tape<S>,
    real_scores: Var,
    fake_scores: Var,
) -> Result<Var> {
    let pr = tape.sigmoid(real_scores);
    let pf = tape.sigmoid(fake_scores);
    adversarial_loss_from_probs(tape, pr, pf)
}

/// Critic role: `mean D(x̃) − mean D(x)`; generator role: the negation.
pub fn wasserstein_pair<S: Real>(
    tape: &mut Tape<S>,
    real_scores: Var,
    fake_scores: Var,
    role: Role,
) -> Result<Var> {
    let r = tape.mean(real_scores)?;
    let f = tape.mean(fake_scores)?;
    match role {
        Role::Critic => tape.sub(f, r),
        Role::Generator => tape.sub(r, f),
    }
}

/// Batch mean of `(‖∇_x̂ D(x̂)‖₂ − 1)²` at `x̂ = εx + (1 − ε)x̃`, one `ε` per sample.
///
/// `critic` maps an `N×…` batch to per-sample scores `[N]`. The returned value is itself
/// differentiable with respect to the critic's parameters.
pub fn gradient_penalty<S: Real, F>(
    tape: &mut Tape<S>,
    critic: F,
    x: Var,
    x_fake: Var,
    eps: &[f64],
) -> Result<Var>
where
    F: FnOnce(&mut Tape<S>, Var) -> Result<Var>,
{
    let s = tape.shape(x).to_vec();
    contract!(
        s == tape.shape(x_fake),
        "gradient penalty shape mismatch: {s:?} vs {:?}",
        tape.shape(x_fake)
    );
    let n = s[0];
    contract!(
        eps.len() == n,
        "need one epsilon per sample ({n}), got {}",
        eps.len()
    );
    let mut bshape = vec![1; s.len()];
    bshape[0] = n;
    let e = tape.constant(Tensor::from_fn(&bshape, |i| S::lit(eps[i])));
    let one_minus = tape.constant(Tensor::from_fn(&bshape, |i| S::lit(1.0 - eps[i])));
    let a = tape.mul(x, e)?;
    let b = tape.mul(x_fake, one_minus)?;
    let x_hat = tape.add(a, b)?;
    let scores = critic(tape, x_hat)?;
    let total = tape.sum(scores)?;
    let g = tape.grad(total, &[x_hat])?[0];
    let flat = tape.reshape(g, &[n, s[1..].iter().product()])?;
    let sq = tape.square(flat)?;
    let ss = tape.sum_to(sq, &[n, 1])?;
    // keeps the sqrt differentiable when a sample's gradient vanishes
    let ss = tape.clamp_min(ss, 1e-24);
    let norm = tape.powf(ss, 0.5);
    let dev = tape.offset(norm, -1.0);
    let dev2 = tape.square(dev)?;
    tape.mean(dev2)
}

/// Checks that every row of `target` is one-hot within each block.
pub fn check_one_hot<S: Real>(target: &Tensor<S>, blocks: &[usize]) -> Result<()> {
    let width: usize = blocks.iter().sum();
    contract!(
        target.shape().len() == 2 && target.shape()[1] == width,
        "target must be N×{width}, got {:?}",
        target.shape()
    );
    for row in target.data().chunks(width) {
        let mut off = 0;
        for &b in blocks {
            let block = &row[off..off + b];
            let ones = block.iter().filter(|v| **v == S::one()).count();
            let zeros = block.iter().filter(|v| **v == S::zero()).count();
            contract!(
                ones == 1 && zeros == b - 1,
                "classification target block at {off} is not one-hot"
            );
            off += b;
        }
    }
    Ok(())
}

/// Cross-entropy of per-block softmaxes against one-hot targets, summed over blocks and
/// averaged over the batch.
pub fn domain_classification_loss<S: Real>(
    tape: &mut Tape<S>,
    logits: Var,
    target: &Tensor<S>,
    blocks: &[usize],
) -> Result<Var> {
    check_one_hot(target, blocks)?;
    contract!(
        tape.shape(logits) == target.shape(),
        "logits {:?} do not match target {:?}",
        tape.shape(logits),
        target.shape()
    );
    let n = target.shape()[0];
    let t = tape.constant(target.clone());
    let mut total: Option<Var> = None;
    let mut off = 0;
    for &b in blocks {
        let z = tape.narrow(logits, 1, off, b)?;
        let tb = tape.narrow(t, 1, off, b)?;
        let zv = tape.value(z).clone();
        let row_max = Tensor::from_fn(&[n, 1], |i| {
            zv.data()[i * b..(i + 1) * b]
                .iter()
                .copied()
                .fold(S::neg_infinity(), S::max)
        });
        let m = tape.constant(row_max);
        let zs = tape.sub(z, m)?;
        let e = tape.exp(zs);
        let se = tape.sum_to(e, &[n, 1])?;
        let lse = tape.log(se);
        let logp = tape.sub(zs, lse)?;
        let picked = tape.mul(logp, tb)?;
        let s = tape.sum(picked)?;
        total = Some(match total {
            Some(acc) => tape.add(acc, s)?,
            None => s,
        });
        off += b;
    }
    let total = total.expect("at least one block");
    Ok(tape.scale(total, -1.0 / n as f64))
}

/// Per-term critic losses as plain numbers.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct DTerms {
    pub adv: f64,
    pub gp: f64,
    pub cls: f64,
}

/// Per-term generator losses as plain numbers.
#[derive(Clone, Copy, Debug, Default, PartialEq)]
pub struct GTerms {
    pub adv: f64,
    pub cls: f64,
    pub rec: f64,
}

impl DTerms {
    /// In `Saturating` mode `adv` already holds `−L_adv` and `gp` is not used.
    pub fn total(&self, w: &LossWeights, mode: AdvMode) -> f64 {
        match mode {
            AdvMode::Wgan => self.adv + w.gp * self.gp + w.cls * self.cls,
            AdvMode::Saturating => self.adv + w.cls * self.cls,
        }
    }
}

impl GTerms {
    pub fn total(&self, w: &LossWeights) -> f64 {
        self.adv + w.cls * self.cls + w.rec * self.rec
    }
}

/// Critic objective on the tape. `gp` is ignored in `Saturating` mode.
pub fn total_d_loss<S: Real>(
    tape: &mut Tape<S>,
    adv: Var,
    gp: Option<Var>,
    cls: Var,
    w: &LossWeights,
) -> Result<Var> {
    let mut total = adv;
    if let Some(gp) = gp {
        let g = tape.scale(gp, w.gp);
        total = tape.add(total, g)?;
    }
    let c = tape.scale(cls, w.cls);
    tape.add(total, c)
}

pub fn total_g_loss<S: Real>(
    tape: &mut Tape<S>,
    adv: Var,
    cls: Var,
    rec: Var,
    w: &LossWeights,
) -> Result<Var> {
    let c = tape.scale(cls, w.cls);
    let r = tape.scale(rec, w.rec);
    let t = tape.add(adv, c)?;
    tape.add(t, r)
}
