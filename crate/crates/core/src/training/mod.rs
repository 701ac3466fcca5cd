//! Alternating critic/generator optimization with Adam, optional emulated mixed precision
//! and a jointly trained Siamese encoder.

mod run;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use run::{
    bootstrap_labels, csv_row, memory_ledger, train, TrainSummary, LOG_FILE, LOG_HEADER,
};

use crate::data::ImageSet;
use crate::error::{contract, Error, Result};
use crate::ksame::LabelScheme;
use crate::losses::{
    adversarial_loss_saturating, domain_classification_loss, feature_reconstruction_loss,
    gradient_penalty, total_d_loss, total_g_loss, wasserstein_pair, AdvMode, DTerms, GTerms,
    LossWeights, Role,
};
use crate::models::{
    bind_tensors, contrastive_loss, Critic, LabelLayout, ModelConfig, ModelParams,
};
use crate::nn::{adam_step, AdamConfig, AdamState, Tape, Tensor, Var};
use crate::precision::{scaled_backward, LossScaler, MasterWeights, StepOutcome};
use crate::seed::derive;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HyperParams {
    pub lambda_gp: f64,
    pub lambda_rec: f64,
    pub lambda_cls: f64,
    pub n_critic: usize,
    /// Batch size `m`.
    pub batch_size: usize,
    pub alpha: f32,
    pub beta1: f32,
    pub beta2: f32,
    /// Generator iterations.
    pub iterations: u64,
    pub mpt: bool,
    pub adv: AdvMode,
    pub seed: u64,
    /// Group size of the pixel-distance clustering that labels the training set.
    pub k: usize,
    /// Also resample the expression block of the target label.
    pub resample_expression: bool,
    pub contrastive_margin: f64,
    pub log_every: u64,
    pub checkpoint_every: u64,
}

impl Default for HyperParams {
    fn default() -> Self {
        HyperParams {
            lambda_gp: 10.0,
            lambda_rec: 10.0,
            lambda_cls: 1.0,
            n_critic: 5,
            batch_size: 16,
            alpha: 1e-4,
            beta1: 0.5,
            beta2: 0.999,
            iterations: 500,
            mpt: false,
            adv: AdvMode::Wgan,
            seed: 0,
            k: 3,
            resample_expression: true,
            contrastive_margin: 1.0,
            log_every: 10,
            checkpoint_every: 100,
        }
    }
}

impl HyperParams {
    pub fn validate(&self) -> Result<()> {
        contract!(
            self.lambda_gp >= 0.0 && self.lambda_rec >= 0.0 && self.lambda_cls >= 0.0,
            "loss weights must be non-negative"
        );
        contract!(self.n_critic >= 1, "n_critic must be at least 1");
        contract!(self.batch_size >= 1, "batch size must be at least 1");
        contract!(self.alpha >= 0.0, "learning rate must be non-negative");
        contract!(
            (0.0..1.0).contains(&self.beta1) && (0.0..1.0).contains(&self.beta2),
            "Adam betas must lie in [0, 1)"
        );
        contract!(self.k >= 1, "k must be at least 1");
        contract!(
            self.contrastive_margin > 0.0,
            "contrastive margin must be positive"
        );
        contract!(self.log_every >= 1, "log interval must be at least 1");
        contract!(
            self.checkpoint_every >= 1,
            "checkpoint interval must be at least 1"
        );
        Ok(())
    }

    pub fn weights(&self) -> LossWeights {
        LossWeights {
            gp: self.lambda_gp,
            rec: self.lambda_rec,
            cls: self.lambda_cls,
        }
    }

    pub fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.alpha,
            beta1: self.beta1,
            beta2: self.beta2,
            ..AdamConfig::default()
        }
    }
}

/// One sampled minibatch.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub indices: Vec<usize>,
    pub identities: Vec<usize>,
    /// `m×C×H×W`.
    pub x: Tensor,
    /// Original labels `c′`, `m×L`.
    pub original: Tensor,
    /// Target labels `c`, `m×L`.
    pub target: Tensor,
    /// `m×dz` in `[0, 1)`.
    pub noise: Tensor,
}

/// Copies `label` and redraws its group block (and optionally the expression block).
pub fn resample_target(
    label: &[f32],
    layout: &LabelLayout,
    resample_expression: bool,
    rng: &mut impl Rng,
) -> Vec<f32> {
    let mut out = label.to_vec();
    let g = layout.group_slots;
    out[..g].fill(0.0);
    out[rng.gen_range(0..g)] = 1.0;
    if resample_expression {
        let e = layout.expression_classes;
        out[g..g + e].fill(0.0);
        out[g + rng.gen_range(0..e)] = 1.0;
    }
    out
}

/// Uniform sample of `m` distinct images with target labels and noise.
pub fn sample_batch(
    set: &ImageSet,
    scheme: &LabelScheme,
    m: usize,
    dz: usize,
    resample_expression: bool,
    rng: &mut impl Rng,
) -> Result<Batch> {
    contract!(
        m >= 1 && m <= set.len(),
        "batch size {m} exceeds the {} available images",
        set.len()
    );
    contract!(
        scheme.len() == set.len(),
        "label scheme does not match the image set"
    );
    let indices = sample(rng, set.len(), m).into_vec();
    let layout = scheme.layout();
    let mut target = Vec::with_capacity(m * layout.dim());
    for &i in &indices {
        target.extend(resample_target(
            scheme.label(i),
            &layout,
            resample_expression,
            rng,
        ));
    }
    let noise = (0..m * dz).map(|_| rng.gen::<f32>()).collect();
    Ok(Batch {
        identities: indices
            .iter()
            .map(|&i| set.images()[i].record.identity)
            .collect(),
        x: set.stack(&indices),
        original: scheme.stack(&indices),
        target: Tensor::new(vec![m, layout.dim()], target)?,
        noise: Tensor::new(vec![m, dz], noise)?,
        indices,
    })
}

/// Attribute (expression and hair) columns of `N×L` labels, the critic's class target.
pub fn attribute_columns(labels: &Tensor, layout: &LabelLayout) -> Tensor {
    let l = layout.dim();
    let g = layout.group_slots;
    let n = labels.shape()[0];
    let data = labels
        .data()
        .chunks(l)
        .flat_map(|row| row[g..].to_vec())
        .collect();
    Tensor::new(vec![n, l - g], data).expect("attribute columns")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Net {
    Generator,
    Critic,
    Siamese,
}

/// Hook over a critic step's gradients before the update: `(grads, loss_scale)`. Under MPT
/// the gradients are the scaled binary16 values and are re-quantized after the hook.
pub type GradHook = Box<dyn FnMut(&mut [Tensor], f32) + Send>;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CriticReport {
    pub terms: DTerms,
    pub total: f64,
    pub outcome: StepOutcome,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GeneratorReport {
    pub terms: GTerms,
    pub total: f64,
    pub outcome: StepOutcome,
    pub siamese_loss: f64,
    pub siamese_outcome: StepOutcome,
}

#[derive(Clone, Debug, PartialEq)]
struct Masters {
    generator: MasterWeights,
    critic: MasterWeights,
    siamese: MasterWeights,
}

/// Complete optimization state of one training run.
pub struct Trainer {
    hp: HyperParams,
    set: ImageSet,
    scheme: LabelScheme,
    params: ModelParams,
    adam_g: AdamState,
    adam_d: AdamState,
    adam_s: AdamState,
    masters: Option<Masters>,
    scaler: LossScaler,
    rng: ChaCha8Rng,
    generator_iterations: u64,
    critic_applied: u64,
    critic_skipped: u64,
    critic_hook: Option<GradHook>,
}

impl Trainer {
    /// Fresh parameters for `set`, whose labels are `scheme`.
    pub fn new(set: ImageSet, scheme: LabelScheme, hp: HyperParams) -> Result<Self> {
        let [c, h, w] = set.image_shape();
        contract!(h == w, "images must be square, got {h}x{w}");
        let mut config = ModelConfig::toy(scheme.layout());
        config.image_size = h;
        config.image_channels = c;
        let params = ModelParams::init(config, hp.seed)?;
        Self::from_params(set, scheme, hp, params)
    }

    pub fn from_params(
        set: ImageSet,
        scheme: LabelScheme,
        hp: HyperParams,
        params: ModelParams,
    ) -> Result<Self> {
        hp.validate()?;
        contract!(
            scheme.len() == set.len(),
            "label scheme does not match the image set"
        );
        contract!(
            scheme.layout() == params.config.labels,
            "label layout {:?} does not match the model's {:?}",
            scheme.layout(),
            params.config.labels
        );
        contract!(
            hp.batch_size <= set.len(),
            "batch size {} exceeds the {} training images",
            hp.batch_size,
            set.len()
        );
        let masters = hp.mpt.then(|| Masters {
            generator: MasterWeights::new(params.generator.tensors().to_vec()),
            critic: MasterWeights::new(params.critic.tensors().to_vec()),
            siamese: MasterWeights::new(params.siamese.tensors().to_vec()),
        });
        Ok(Trainer {
            adam_g: AdamState::new(params.generator.tensors()),
            adam_d: AdamState::new(params.critic.tensors()),
            adam_s: AdamState::new(params.siamese.tensors()),
            rng: ChaCha8Rng::seed_from_u64(derive(hp.seed, &[4])),
            hp,
            set,
            scheme,
            params,
            masters,
            scaler: LossScaler::default(),
            generator_iterations: 0,
            critic_applied: 0,
            critic_skipped: 0,
            critic_hook: None,
        })
    }

    pub fn params(&self) -> &ModelParams {
        &self.params
    }

    pub fn hyper_params(&self) -> &HyperParams {
        &self.hp
    }

    pub fn scheme(&self) -> &LabelScheme {
        &self.scheme
    }

    pub fn scaler(&self) -> &LossScaler {
        &self.scaler
    }

    pub fn adam_state(&self, net: Net) -> &AdamState {
        match net {
            Net::Generator => &self.adam_g,
            Net::Critic => &self.adam_d,
            Net::Siamese => &self.adam_s,
        }
    }

    pub fn generator_iterations(&self) -> u64 {
        self.generator_iterations
    }

    /// `(applied, skipped)` critic steps.
    pub fn critic_steps(&self) -> (u64, u64) {
        (self.critic_applied, self.critic_skipped)
    }

    pub fn set_critic_hook(&mut self, hook: Option<GradHook>) {
        self.critic_hook = hook;
    }

    /// Weights used in forward passes: binary16 working copies under MPT.
    fn forward_weights(&self, net: Net) -> &[Tensor] {
        match (&self.masters, net) {
            (Some(m), Net::Generator) => m.generator.working(),
            (Some(m), Net::Critic) => m.critic.working(),
            (Some(m), Net::Siamese) => m.siamese.working(),
            (None, Net::Generator) => self.params.generator.tensors(),
            (None, Net::Critic) => self.params.critic.tensors(),
            (None, Net::Siamese) => self.params.siamese.tensors(),
        }
    }

    fn bind(&self, tape: &mut Tape<f32>, net: Net, trainable: bool) -> Vec<Var> {
        bind_tensors(self.forward_weights(net), tape, trainable)
    }

    /// Backpropagates `loss` into `vars` of `net` and applies Adam (or skips on overflow).
    fn update(
        &mut self,
        net: Net,
        tape: &mut Tape<f32>,
        loss: Var,
        vars: &[Var],
    ) -> Result<StepOutcome> {
        let value = tape.item(loss)?;
        if !value.is_finite() {
            return Err(Error::Diverged(format!(
                "{net:?} loss is {value} at generator iteration {}",
                self.generator_iterations
            )));
        }
        let cfg = self.hp.adam();
        let mpt = self.masters.is_some();
        let mut grads = if mpt {
            scaled_backward(tape, loss, vars, &self.scaler)?
        } else {
            tape.backward(loss, vars)?
        };
        if net == Net::Critic {
            if let Some(hook) = self.critic_hook.as_mut() {
                let scale = if mpt { self.scaler.scale() } else { 1.0 };
                hook(&mut grads, scale);
                if mpt {
                    grads = grads.iter().map(Tensor::to_fp16).collect();
                }
            }
        }
        let (adam, store) = match net {
            Net::Generator => (&mut self.adam_g, &mut self.params.generator),
            Net::Critic => (&mut self.adam_d, &mut self.params.critic),
            Net::Siamese => (&mut self.adam_s, &mut self.params.siamese),
        };
        match self.masters.as_mut() {
            None => {
                adam_step(store.tensors_mut(), &grads, adam, &cfg)?;
                Ok(StepOutcome::Applied)
            }
            Some(m) => {
                let mw = match net {
                    Net::Generator => &mut m.generator,
                    Net::Critic => &mut m.critic,
                    Net::Siamese => &mut m.siamese,
                };
                let outcome = mw.apply_scaled(grads, &mut self.scaler, adam, &cfg)?;
                if outcome == StepOutcome::Applied {
                    store.set_tensors(mw.master().to_vec())?;
                }
                Ok(outcome)
            }
        }
    }

    pub fn sample(&mut self) -> Result<Batch> {
        sample_batch(
            &self.set,
            &self.scheme,
            self.hp.batch_size,
            self.params.config.noise_channels,
            self.hp.resample_expression,
            &mut self.rng,
        )
    }

    /// `G(x, c)` with the current weights, outside any trainable graph.
    fn translate(&self, x: &Tensor, label: &Tensor, noise: &Tensor) -> Result<Tensor> {
        let mut tape = Tape::<f32>::new();
        let g = self.bind(&mut tape, Net::Generator, false);
        let (x, c, z) = (
            tape.constant(x.clone()),
            tape.constant(label.clone()),
            tape.constant(noise.clone()),
        );
        let y =
            self.params
                .generator_net()
                .forward(&mut tape, &g, x, c, z, self.masters.is_some())?;
        Ok(tape.value(y).clone())
    }

    /// One critic update on `batch` with the generator frozen.
    pub fn critic_step(&mut self, batch: &Batch) -> Result<CriticReport> {
        let mpt = self.masters.is_some();
        let layout = self.scheme.layout();
        let fake = self.translate(&batch.x, &batch.target, &batch.noise)?;
        let eps: Vec<f64> = (0..batch.indices.len())
            .map(|_| self.rng.gen::<f64>())
            .collect();
        let mut tape = Tape::<f32>::new();
        let d = self.bind(&mut tape, Net::Critic, true);
        let x = tape.constant(batch.x.clone());
        let xf = tape.constant(fake);
        let cls_target = attribute_columns(&batch.original, &layout);
        let obj = critic_objective(
            &mut tape,
            &self.params.critic_net(),
            &d,
            (x, xf),
            &cls_target,
            &layout,
            &eps,
            self.hp.adv,
            &self.hp.weights(),
            mpt,
        )?;
        let total = obj.total;
        let terms = obj.terms(&tape)?;
        let total_value = tape.item(total)? as f64;
        let outcome = self.update(Net::Critic, &mut tape, total, &d)?;
        match outcome {
            StepOutcome::Applied => self.critic_applied += 1,
            StepOutcome::Skipped => self.critic_skipped += 1,
        }
        Ok(CriticReport {
            terms,
            total: total_value,
            outcome,
        })
    }

    /// One generator update with the critic and Siamese frozen, followed by one contrastive
    /// Siamese update on real pairs from the same batch.
    pub fn generator_step(&mut self, batch: &Batch) -> Result<GeneratorReport> {
        let mpt = self.masters.is_some();
        let layout = self.scheme.layout();
        let mut tape = Tape::<f32>::new();
        let g = self.bind(&mut tape, Net::Generator, true);
        let d = self.bind(&mut tape, Net::Critic, false);
        let s = self.bind(&mut tape, Net::Siamese, false);
        let vars = GeneratorVars {
            x: tape.constant(batch.x.clone()),
            target: tape.constant(batch.target.clone()),
            original: tape.constant(batch.original.clone()),
            noise: tape.constant(batch.noise.clone()),
        };
        let cls_target = attribute_columns(&batch.target, &layout);
        let obj = generator_objective(
            &mut tape,
            &self.params,
            [&g, &d, &s],
            vars,
            &cls_target,
            self.hp.adv,
            &self.hp.weights(),
            mpt,
        )?;
        let total = obj.total;
        let terms = obj.terms(&tape)?;
        let total_value = tape.item(total)? as f64;
        let outcome = self.update(Net::Generator, &mut tape, total, &g)?;
        drop(tape);

        let (siamese_loss, siamese_outcome) = self.siamese_step(batch)?;
        Ok(GeneratorReport {
            terms,
            total: total_value,
            outcome,
            siamese_loss,
            siamese_outcome,
        })
    }

    /// Partner per batch item: another image of the same identity with probability ½ when
    /// one exists in the batch, otherwise an image of a different identity.
    fn pick_partners(&mut self, ids: &[usize]) -> (Vec<usize>, Vec<bool>) {
        let n = ids.len();
        let mut partners = Vec::with_capacity(n);
        let mut same = Vec::with_capacity(n);
        for i in 0..n {
            let pos: Vec<usize> = (0..n).filter(|&j| j != i && ids[j] == ids[i]).collect();
            let neg: Vec<usize> = (0..n).filter(|&j| ids[j] != ids[i]).collect();
            let want_same = self.rng.gen_bool(0.5);
            let (pool, flag) = if (want_same && !pos.is_empty()) || neg.is_empty() {
                (&pos, true)
            } else {
                (&neg, false)
            };
            if pool.is_empty() {
                partners.push(i);
                same.push(true);
            } else {
                partners.push(pool[self.rng.gen_range(0..pool.len())]);
                same.push(flag);
            }
        }
        (partners, same)
    }

    fn siamese_step(&mut self, batch: &Batch) -> Result<(f64, StepOutcome)> {
        let mpt = self.masters.is_some();
        let (partners, same) = self.pick_partners(&batch.identities);
        let paired: Vec<usize> = partners.iter().map(|&j| batch.indices[j]).collect();
        let siamese = self.params.siamese_net();
        let mut tape = Tape::<f32>::new();
        let s = self.bind(&mut tape, Net::Siamese, true);
        let a = tape.constant(batch.x.clone());
        let b = tape.constant(self.set.stack(&paired));
        let fa = siamese.embed(&mut tape, &s, a, mpt)?;
        let fb = siamese.embed(&mut tape, &s, b, mpt)?;
        let loss = contrastive_loss(&mut tape, fa, fb, &same, self.hp.contrastive_margin)?;
        let value = tape.item(loss)? as f64;
        let outcome = self.update(Net::Siamese, &mut tape, loss, &s)?;
        Ok((value, outcome))
    }

    /// `n_critic` critic steps on fresh batches, then one generator step.
    pub fn step(&mut self) -> Result<IterationReport> {
        let mut last = None;
        for _ in 0..self.hp.n_critic {
            let b = self.sample()?;
            last = Some(self.critic_step(&b)?);
        }
        let b = self.sample()?;
        let g = self.generator_step(&b)?;
        self.generator_iterations += 1;
        Ok(IterationReport {
            iteration: self.generator_iterations,
            critic: last.expect("n_critic >= 1"),
            generator: g,
            scale: self.scaler.scale(),
            skipped: self.critic_skipped,
        })
    }

    /// Mean `S(f(x), f(G(G(x, c), c′)))` over `set` with targets drawn from `seed`.
    pub fn reconstruction_similarity(
        &self,
        set: &ImageSet,
        scheme: &LabelScheme,
        seed: u64,
    ) -> Result<f64> {
        contract!(
            scheme.len() == set.len(),
            "label scheme does not match the image set"
        );
        let mut rng = ChaCha8Rng::seed_from_u64(derive(seed, &[5]));
        let layout = scheme.layout();
        let dz = self.params.config.noise_channels;
        let idx: Vec<usize> = (0..set.len()).collect();
        let siamese = self.params.siamese_net();
        let mut total = 0.0;
        for chunk in idx.chunks(crate::ksame::INFERENCE_BATCH) {
            let m = chunk.len();
            let x = set.stack(chunk);
            let original = scheme.stack(chunk);
            let target: Vec<f32> = chunk
                .iter()
                .flat_map(|&i| {
                    resample_target(
                        scheme.label(i),
                        &layout,
                        self.hp.resample_expression,
                        &mut rng,
                    )
                })
                .collect();
            let target = Tensor::new(vec![m, layout.dim()], target)?;
            let noise = Tensor::new(vec![m, dz], (0..m * dz).map(|_| rng.gen::<f32>()).collect())?;
            let fake = self.translate(&x, &target, &noise)?;
            let rec = self.translate(&fake, &original, &noise)?;
            let mut tape = Tape::<f32>::new();
            let s = self.bind(&mut tape, Net::Siamese, false);
            let xv = tape.constant(x);
            let rv = tape.constant(rec);
            let fr = siamese.embed(&mut tape, &s, xv, false)?;
            let ff = siamese.embed(&mut tape, &s, rv, false)?;
            let sim = crate::losses::similarity_kernel(&mut tape, fr, ff)?;
            let sum = tape.sum(sim)?;
            total += tape.item(sum)? as f64;
        }
        Ok(total / set.len() as f64)
    }
}

/// Tape handles of the critic objective and its parts.
pub(crate) struct CriticObjective {
    pub total: Var,
    adv: Var,
    gp: Option<Var>,
    cls: Var,
}

impl CriticObjective {
    fn terms(&self, tape: &Tape<f32>) -> Result<DTerms> {
        Ok(DTerms {
            adv: tape.item(self.adv)? as f64,
            gp: match self.gp {
                Some(g) => tape.item(g)? as f64,
                None => 0.0,
            },
            cls: tape.item(self.cls)? as f64,
        })
    }
}

/// Critic loss on real `x` and fixed fakes `xf`; `eps` holds one interpolation weight per
/// sample for the gradient penalty.
#[allow(clippy::too_many_arguments)]
pub(crate) fn critic_objective(
    tape: &mut Tape<f32>,
    critic: &Critic,
    d: &[Var],
    (x, xf): (Var, Var),
    cls_target: &Tensor,
    layout: &LabelLayout,
    eps: &[f64],
    mode: AdvMode,
    w: &LossWeights,
    mpt: bool,
) -> Result<CriticObjective> {
    let real = critic.forward(tape, d, x, mpt)?;
    let fake = critic.forward(tape, d, xf, mpt)?;
    let cls = domain_classification_loss(tape, real.cls, cls_target, &layout.cls_blocks())?;
    let (adv, gp) = match mode {
        AdvMode::Wgan => {
            let adv = wasserstein_pair(tape, real.adv, fake.adv, Role::Critic)?;
            let gp = gradient_penalty(tape, |t, xh| critic.score(t, d, xh, mpt), x, xf, eps)?;
            (adv, Some(gp))
        }
        AdvMode::Saturating => {
            let l = adversarial_loss_saturating(tape, real.adv, fake.adv)?;
            (tape.neg(l), None)
        }
    };
    let total = total_d_loss(tape, adv, gp, cls, w)?;
    Ok(CriticObjective {
        total,
        adv,
        gp,
        cls,
    })
}

#[derive(Clone, Copy)]
pub(crate) struct GeneratorVars {
    pub x: Var,
    pub target: Var,
    pub original: Var,
    pub noise: Var,
}

pub(crate) struct GeneratorObjective {
    pub total: Var,
    adv: Var,
    cls: Var,
    rec: Var,
}

impl GeneratorObjective {
    fn terms(&self, tape: &Tape<f32>) -> Result<GTerms> {
        Ok(GTerms {
            adv: tape.item(self.adv)? as f64,
            cls: tape.item(self.cls)? as f64,
            rec: tape.item(self.rec)? as f64,
        })
    }
}

/// Generator loss: adversarial term on `G(x, c)`, attribute classification against `c`,
/// and the Siamese similarity between `x` and `G(G(x, c), c′)`.
#[allow(clippy::too_many_arguments)]
pub(crate) fn generator_objective(
    tape: &mut Tape<f32>,
    params: &ModelParams,
    [g, d, s]: [&[Var]; 3],
    v: GeneratorVars,
    cls_target: &Tensor,
    mode: AdvMode,
    w: &LossWeights,
    mpt: bool,
) -> Result<GeneratorObjective> {
    let gen = params.generator_net();
    let critic = params.critic_net();
    let siamese = params.siamese_net();
    let layout = params.config.labels;
    let fake = gen.forward(tape, g, v.x, v.target, v.noise, mpt)?;
    let real_adv = critic.score(tape, d, v.x, mpt)?;
    let fake_out = critic.forward(tape, d, fake, mpt)?;
    let adv = match mode {
        AdvMode::Wgan => wasserstein_pair(tape, real_adv, fake_out.adv, Role::Generator)?,
        AdvMode::Saturating => adversarial_loss_saturating(tape, real_adv, fake_out.adv)?,
    };
    let cls = domain_classification_loss(tape, fake_out.cls, cls_target, &layout.cls_blocks())?;
    let rec_img = gen.forward(tape, g, fake, v.original, v.noise, mpt)?;
    let f_real = siamese.embed(tape, s, v.x, mpt)?;
    let f_rec = siamese.embed(tape, s, rec_img, mpt)?;
    let rec = feature_reconstruction_loss(tape, f_real, f_rec)?;
    let total = total_g_loss(tape, adv, cls, rec, w)?;
    Ok(GeneratorObjective {
        total,
        adv,
        cls,
        rec,
    })
}

/// Losses of one generator iteration; `critic` is the last of its critic steps.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IterationReport {
    pub iteration: u64,
    pub critic: CriticReport,
    pub generator: GeneratorReport,
    pub scale: f32,
    pub skipped: u64,
}
